import math

import numpy as np
import pytest

from ipld.oracle import build_oracle
from ipld.pathfollow import (Phase1Error, SolveStatus, SolverConfig, certify,
                             neighborhood_diagnostics, phase1, solve)
from ipld.scalars import kmax_bound, omega, sigma_rule
from ipld.slave import solve_slave

from conftest import make_num, make_one_d


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(t0=1.5)
    with pytest.raises(ValueError):
        SolverConfig(t0=0.0)
    with pytest.raises(ValueError):
        SolverConfig(beta=0.2)
    with pytest.raises(ValueError):
        SolverConfig(beta=0.05, delta_slave=1e-3)  # above beta/100
    cfg = SolverConfig(beta=0.05)
    assert cfg.delta_slave == 1e-5
    assert cfg.eps_master == 1e-5
    # the default is capped at beta/100 for small beta
    cfg2 = SolverConfig(beta=5e-4)
    assert cfg2.delta_slave == 5e-6
    loose = SolverConfig(beta=0.05, eps_master=1e-2, enforce_tolerance_caps=False)
    assert loose.eps_master == 1e-2


def test_phase1_immediate_exit(one_d):
    # y = 0 is already optimal for the smoothed dual of the symmetric instance
    res = phase1(one_d, SolverConfig(t0=1.0, eps=1e-6))
    assert res.j_used == 0
    assert res.lam0 <= 0.05
    assert res.x0.interior


def test_phase1_terminates_within_cap(one_d):
    cfg = SolverConfig(t0=1.0, beta=0.05, eps=1e-6)
    res = phase1(one_d, cfg)
    assert res.lam0 <= cfg.beta


def test_phase1_descent_per_step():
    inst = make_num(12, seed=9, pairs_per_node=3)
    cfg = SolverConfig(eps=1e-6)
    res = phase1(inst, cfg)
    need = omega(0.97 * cfg.beta * (1 - 1e-2 * cfg.beta))
    ds = [r.d_value for r in res.records]
    assert res.j_used >= 2
    for a, b in zip(ds[:-1], ds[1:]):
        assert a - b >= need - 1e-8
    assert res.lam0 <= cfg.beta


def test_phase1_jmax_failure():
    inst = make_num(12, seed=9, pairs_per_node=3)
    with pytest.raises(Phase1Error):
        phase1(inst, SolverConfig(eps=1e-6, jmax=1))


def test_solve_small_num_invariants(small_num):
    cfg = SolverConfig(eps=1e-2)
    res = solve(small_num, cfg)
    assert res.status == SolveStatus.CONVERGED
    sigma = sigma_rule(cfg.beta, small_num.nu_total)
    assert res.sigma == sigma
    eps_hat = cfg.eps / (1 + math.sqrt(small_num.nu_total))
    assert res.iterations <= kmax_bound(cfg.t0, eps_hat, sigma) + 1
    # geometric t decay, exact per formula
    for rec in res.trace:
        assert rec.t == cfg.t0 * sigma**rec.k
    # decrement stays inside the neighborhood on the converged run
    assert all(rec.lam <= cfg.beta for rec in res.trace)
    # certificate identities and bounds at every iterate
    for rec in res.trace:
        c = rec.cert
        assert c.primal_opt <= c.bound_primal
        assert c.dual_resid_e == pytest.approx(c.bound_dual, rel=1e-10, abs=1e-14)
        assert c.dual_resid_r == pytest.approx(c.bound_dual, rel=1e-10, abs=1e-14)
        assert c.interior
    # final certificate passes the approximate-optimality definition at eps
    assert res.certificate.satisfies(cfg.eps)
    assert res.x.interior


def test_certify_exact_pair(one_d):
    # at the exact smoothed-dual optimum every residual vanishes
    t = 1.0
    y = np.zeros(1)
    slave = solve_slave(one_d, t, y, 1e-12)
    ev = build_oracle(one_d, t, y, slave)
    cert = certify(one_d, t, slave.x, y, 0.0, y, ev, 1e-12)
    assert cert.interior
    assert cert.dual_resid_e <= 1e-12
    assert cert.dual_resid_r <= 1e-12
    assert cert.bound_dual == 0.0


def test_solve_iteration_cap_status(small_num):
    cfg = SolverConfig(eps=1e-6, kmax=3)
    res = solve(small_num, cfg)
    assert res.status == SolveStatus.ITERATION_CAP
    assert res.iterations == 3
    assert not res.converged


def test_solve_quality_stop(small_num):
    cfg = SolverConfig(eps=1e-9, stop_mode="quality", feas_tol=1e-4, gap_tol=1e-3)
    res = solve(small_num, cfg)
    assert res.converged
    assert res.feasibility <= 1e-4
    assert res.trace[-1].rel_gap <= 1e-3
    # quality stop fires long before the t threshold
    assert res.trace[-1].t > res.eps_hat


def test_diagnostics_and_lemma_checks(tiny_num):
    cfg = SolverConfig(eps=0.1, diagnostics=True)
    res = solve(tiny_num, cfg)
    rep = neighborhood_diagnostics(res)
    assert rep.passed
    assert res.final_lam is not None and res.final_lam <= cfg.beta
    for row in rep.rows:
        assert row.lam_entry <= cfg.beta
        assert row.lam_shifted <= 2.1 * cfg.beta
        assert max(row.delta_lo, row.delta_hi) <= 0.4493 * cfg.beta
    # the recursion rows chain into the next iteration's entry measurement
    assert rep.rows[0].lemma1_lhs == rep.rows[1].lam_entry


def test_diagnostics_requires_flag(tiny_num):
    res = solve(tiny_num, SolverConfig(eps=0.1))
    with pytest.raises(ValueError):
        neighborhood_diagnostics(res)


def test_adaptive_schedule_is_capped(tiny_num):
    cfg = SolverConfig(eps=1e-2, adaptive_tolerances=True, adaptive_coeff=1.0)
    d, e = cfg.schedule(0.25)
    assert d == cfg.beta / 100 and e == cfg.beta / 100
    d, e = cfg.schedule(1e-9)
    assert d == cfg.delta_slave and e == cfg.eps_master
    res = solve(tiny_num, cfg)
    assert res.converged
    assert all(rec.lam <= cfg.beta for rec in res.trace)


def test_solve_defaults_run(one_d):
    res = solve(make_one_d(), SolverConfig(eps=1e-3))
    assert res.converged
    assert res.certificate.satisfies(1e-3)
    # the optimal rate sits at the utility-vs-penalty balance point
    assert res.objective == pytest.approx(0.0, abs=1e-4)
