import numpy as np
import pytest

from ipld.applications import LogUtilityFamily
from ipld.blocks import BoxBarrierFamily, QuadraticFamily
from ipld.composites import ZeroComposite
from ipld.model import BlockGroup, ProblemInstance
from ipld.slave import SlaveNonConvergence, solve_slave, verify_delta_bound

from conftest import make_num, make_one_d


def test_exact_stationary_point(one_d):
    res = solve_slave(one_d, 1.0, np.zeros(1), 0.3,
                      warm_start=one_d.point([np.array([[1.0]])]))
    assert res.residual == 0.0
    assert res.newton_iters[0][0] == 0
    assert res.x.parts[0][0, 0] == 1.0


def test_warm_start_residual_bound(one_d):
    delta = 0.05
    res = solve_slave(one_d, 1.0, np.zeros(1), delta,
                      warm_start=one_d.point([np.array([[0.5]])]))
    assert res.residual <= delta / (1 + delta)
    assert res.x.interior


def test_num_block_tight_delta(small_num):
    delta = 1e-5
    res = solve_slave(small_num, 0.25, np.zeros(small_num.n), delta)
    assert res.residual <= delta / (1 + delta)
    assert res.residual <= 9.9999e-6


def test_verify_delta_bound(one_d, small_num):
    y = np.zeros(1)
    exact = solve_slave(one_d, 1.0, y, 1e-12).x
    res = solve_slave(one_d, 1.0, y, 0.05,
                      warm_start=one_d.point([np.array([[0.4]])]))
    assert verify_delta_bound(one_d, 1.0, y, res, exact)

    y2 = np.zeros(small_num.n)
    exact2 = solve_slave(small_num, 0.5, y2, 1e-12).x
    res2 = solve_slave(small_num, 0.5, y2, 0.05)
    assert verify_delta_bound(small_num, 0.5, y2, res2, exact2)
    # the measured distance is small because Newton lands well below delta
    diff = [a - b for a, b in zip(res2.x.parts, exact2.parts)]
    assert res2.hess.norm(diff) <= 0.05


class _RecordingLogUtility(LogUtilityFamily):
    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.seen = []

    def grad(self, X):
        self.seen.append(X.copy())
        return super().grad(X)


def _recording_instance(base):
    groups = []
    recorders = []
    for g in base.groups:
        sm = g.smooth
        rec = _RecordingLogUtility(sm.d, sm.mu, sm.r, sm.rho)
        recorders.append(rec)
        groups.append(BlockGroup(rec, g.barrier, g.coupling))
    return ProblemInstance(groups, base.composite), recorders


def test_iterates_stay_interior_and_residuals_decrease(small_num):
    inst, recorders = _recording_instance(small_num)
    rng = np.random.default_rng(5)
    y = rng.normal(0, 0.5, inst.n)
    t = 0.3
    solve_slave(inst, t, y, 1e-8)
    aty = inst.apply_At(y)
    for g, rec, w in zip(inst.groups, recorders, aty):
        lam_prev = None
        for X in list(rec.seen):
            assert np.all(g.barrier.in_domain(X) & g.smooth.in_domain(X))
            grad = (1 / t) * (g.smooth.grad(X) - w) + g.barrier.grad(X)
            hess = (1 / t) * g.smooth.hess(X) + g.barrier.hess(X)
            d = np.linalg.solve(hess, grad[..., None])[..., 0]
            lam = np.sqrt(np.maximum((grad * d).sum(axis=1), 0.0))
            if lam_prev is not None:
                # monotone per-block decrease after the first step on this corpus
                assert np.all(lam <= lam_prev + 1e-12)
            lam_prev = lam


def test_block_order_independence(tiny_num):
    """Permuting group order yields bitwise-identical per-block results."""
    inst = tiny_num
    rng = np.random.default_rng(8)
    y = rng.normal(0, 0.3, inst.n)
    res = solve_slave(inst, 0.5, y, 1e-6)

    perm = ProblemInstance(list(reversed(inst.groups)), inst.composite)
    res_p = solve_slave(perm, 0.5, y, 1e-6)
    for a, b in zip(res.x.parts, reversed(res_p.x.parts)):
        assert np.array_equal(a, b)
    for a, b in zip(res.block_residuals, reversed(res_p.block_residuals)):
        assert np.array_equal(a, b)


def test_nonconvergence_carries_residuals(one_d):
    with pytest.raises(SlaveNonConvergence) as exc:
        solve_slave(one_d, 1.0, np.zeros(1), 1e-9,
                    warm_start=one_d.point([np.array([[1.9]])]), max_iter=1)
    assert exc.value.residuals is not None


def test_warm_start_domain_error(one_d):
    with pytest.raises(ValueError):
        solve_slave(one_d, 1.0, np.zeros(1), 0.1,
                    warm_start=one_d.point([np.array([[2.5]])]))


def test_delta_validation(one_d):
    for bad in (0.0, 1.0, -0.5):
        with pytest.raises(ValueError):
            solve_slave(one_d, 1.0, np.zeros(1), bad)


def test_definition_implication_across_deltas(tiny_num):
    """Residual <= delta/(1+delta) at exit implies distance <= delta."""
    rng = np.random.default_rng(11)
    y = rng.normal(0, 0.2, tiny_num.n)
    for t in (1.0, 0.25):
        exact = solve_slave(tiny_num, t, y, 1e-12).x
        for delta in (0.3, 0.05, 1e-3):
            res = solve_slave(tiny_num, t, y, delta)
            assert res.residual <= delta / (1 + delta)
            assert verify_delta_bound(tiny_num, t, y, res, exact)
