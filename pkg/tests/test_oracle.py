import numpy as np
import pytest

from ipld.oracle import build_oracle, dual_norm, oracle_error_suite
from ipld.slave import solve_slave

from conftest import make_num


def test_one_d_oracle_values(one_d):
    y = np.zeros(1)
    slave = solve_slave(one_d, 1.0, y, 1e-12)
    ev = build_oracle(one_d, 1.0, y, slave)
    assert ev.grad[0] == pytest.approx(1.0, abs=1e-10)
    assert ev.hess[0, 0] == pytest.approx(1.0 / 3.0, abs=1e-10)
    assert ev.d_value == pytest.approx(0.0, abs=1e-10)
    assert dual_norm(ev, np.ones(1), "primal") == pytest.approx(np.sqrt(1 / 3), rel=1e-9)
    assert dual_norm(ev, np.ones(1), "dual") == pytest.approx(np.sqrt(3.0), rel=1e-9)
    assert dual_norm(ev, np.zeros(1)) == 0.0
    with pytest.raises(ValueError):
        dual_norm(ev, np.ones(1), "sideways")


def test_gradient_identity_is_exact(small_num):
    rng = np.random.default_rng(0)
    y = rng.normal(0, 0.4, small_num.n)
    t = 0.3
    slave = solve_slave(small_num, t, y, 1e-4)
    ev = build_oracle(small_num, t, y, slave)
    assert np.array_equal(ev.grad, small_num.apply_A(slave.x.parts) / t)


def test_hessian_symmetry_and_schur_identity(small_num):
    rng = np.random.default_rng(1)
    y = rng.normal(0, 0.4, small_num.n)
    t = 0.4
    slave = solve_slave(small_num, t, y, 1e-6)
    ev = build_oracle(small_num, t, y, slave)
    assert np.abs(ev.hess - ev.hess.T).max() <= 1e-12 * np.abs(ev.hess).max()
    # second evaluation path: w -> A (psi hess)^{-1} A^T w, blockwise
    for _ in range(5):
        w = rng.normal(size=small_num.n)
        path1 = (t * t) * (ev.hess @ w)
        atw = small_num.apply_At(w)
        path2 = small_num.apply_A(slave.hess.solve(atw))
        assert np.allclose(path1, path2, rtol=1e-10, atol=1e-12)


def test_dual_gradient_matches_finite_differences(tiny_num):
    rng = np.random.default_rng(4)
    for _ in range(5):
        t = float(10 ** rng.uniform(-1.5, 0))
        y = rng.normal(0, 0.4, tiny_num.n)
        slave = solve_slave(tiny_num, t, y, 1e-10)
        ev = build_oracle(tiny_num, t, y, slave)
        i = int(rng.integers(tiny_num.n))
        h = 1e-5 * (1 + abs(y[i]))
        yp, ym = y.copy(), y.copy()
        yp[i] += h
        ym[i] -= h
        dp = build_oracle(tiny_num, t, yp,
                          solve_slave(tiny_num, t, yp, 1e-10, warm_start=slave.x)).d_value
        dm = build_oracle(tiny_num, t, ym,
                          solve_slave(tiny_num, t, ym, 1e-10, warm_start=slave.x)).d_value
        fd = (dp - dm) / (2 * h)
        assert fd == pytest.approx(ev.grad[i], rel=1e-5, abs=1e-8)


def test_oracle_error_suite_bounds(tiny_num):
    rng = np.random.default_rng(2)
    y = rng.normal(0, 0.3, tiny_num.n)
    report = oracle_error_suite(tiny_num, 0.5, y, [0.3, 0.05, 1e-3])
    assert report.passed
    for row in report.rows:
        assert row.delta_measured <= row.delta_requested
        assert row.value_gap >= 0.0


def test_oracle_error_suite_near_exact(tiny_num):
    y = np.zeros(tiny_num.n)
    report = oracle_error_suite(tiny_num, 1.0, y, [1e-9], delta_ref=1e-12)
    row = report.rows[0]
    assert row.passed
    assert abs(row.value_gap) <= 1e-12
    assert row.pencil_min == pytest.approx(1.0, abs=1e-6)
    assert row.pencil_max == pytest.approx(1.0, abs=1e-6)


def test_oracle_error_suite_five_block_sandwich():
    inst = make_num(5, seed=4, pairs_per_node=2)
    assert inst.num_blocks == 5
    rng = np.random.default_rng(9)
    y = rng.normal(0, 0.3, inst.n)
    report = oracle_error_suite(inst, 0.25, y, [0.05])
    row = report.rows[0]
    assert row.sandwich_ok
    lo, hi = (1 - row.delta_measured) ** 2, (1 - row.delta_measured) ** -2
    assert lo - 1e-9 <= row.pencil_min and row.pencil_max <= hi + 1e-9


def test_build_oracle_t_mismatch(one_d):
    slave = solve_slave(one_d, 0.5, np.zeros(1), 1e-6)
    with pytest.raises(ValueError):
        build_oracle(one_d, 0.25, np.zeros(1), slave)
