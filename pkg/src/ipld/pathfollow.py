"""Path-following main loop, initialization, and optimality certificates.

The main loop shrinks the penalty parameter geometrically, t_{k} = sigma^k
t_0 with sigma from the contraction rule, re-solves the slave problem at the
new parameter, assembles the inexact dual oracle, and takes one inexact
scaled proximal-Newton step. Initialization (phase 1) runs damped steps at
fixed t_0 until the proximal-Newton decrement drops below the neighborhood
radius beta. Certificates bound the primal and dual optimality residuals of
every iterate in the local metrics.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .composites import CompositeTerm
from .master import MasterStepResult, scaled_prox
from .model import PrimalPoint, ProblemInstance
from .oracle import OracleEval, build_oracle
from .scalars import c_nu, kmax_bound, sigma_rule
from .slave import SlaveResult, solve_slave

__all__ = [
    "SolverConfig",
    "SolveStatus",
    "Certificate",
    "IterationRecord",
    "DiagRecord",
    "Phase1Record",
    "Phase1Result",
    "SolveResult",
    "Phase1Error",
    "phase1",
    "solve",
    "certify",
    "neighborhood_diagnostics",
    "DiagnosticsReport",
]


class Phase1Error(RuntimeError):
    pass


class SolveStatus(str, Enum):
    CONVERGED = "converged"
    ITERATION_CAP = "iteration_cap"


@dataclass
class SolverConfig:
    """Knobs of the path-following solver.

    Tolerances default to 1e-5 capped at beta/100; the cap is enforced
    unless ``enforce_tolerance_caps`` is switched off for robustness
    experiments outside the guaranteed regime. ``stop_mode='t'`` terminates
    on the penalty threshold eps/(1 + sqrt(nu_f)); ``'quality'`` terminates
    on measured feasibility and relative-gap targets instead (the tolerance
    sweep protocol).
    """

    t0: float = 0.25
    beta: float = 0.05
    eps: float = 1e-6
    delta_slave: float | None = None
    eps_master: float | None = None
    delta_init: float | None = None
    adaptive_tolerances: bool = False
    adaptive_coeff: float = 1e-2
    slave_max_iter: int = 200
    master_max_inner: int = 10000
    kmax: int | None = None
    jmax: int = 1000
    stop_mode: str = "t"
    feas_tol: float = 1e-5
    gap_tol: float = 1e-6
    enforce_tolerance_caps: bool = True
    diagnostics: bool = False
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.t0 <= 1.0:
            raise ValueError(f"t0 must lie in (0, 1], got {self.t0}")
        if not 0.0 < self.beta <= 0.1:
            raise ValueError(f"beta must lie in (0, 0.1], got {self.beta}")
        if self.eps <= 0.0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if self.stop_mode not in ("t", "quality"):
            raise ValueError(f"stop_mode must be 't' or 'quality', got {self.stop_mode!r}")
        cap = self.beta / 100.0
        if self.delta_slave is None:
            self.delta_slave = min(1e-5, cap)
        if self.eps_master is None:
            self.eps_master = min(1e-5, cap)
        if self.delta_init is None:
            self.delta_init = min(1e-5, cap)
        if self.enforce_tolerance_caps:
            for name in ("delta_slave", "eps_master", "delta_init"):
                val = getattr(self, name)
                if not 0.0 < val <= cap:
                    raise ValueError(
                        f"{name}={val} outside (0, beta/100] = (0, {cap}]; "
                        "disable enforce_tolerance_caps to experiment beyond it"
                    )

    def schedule(self, t: float) -> tuple:
        """(delta_k, eps_k) at penalty value t."""
        if not self.adaptive_tolerances:
            return self.delta_slave, self.eps_master
        cap = self.beta / 100.0
        d = min(max(self.delta_slave, self.adaptive_coeff * t), cap)
        e = min(max(self.eps_master, self.adaptive_coeff * t), cap)
        return d, e


@dataclass
class Certificate:
    """Measured optimality quantities of one iterate pair (x, y) at t."""

    t: float
    lam: float
    #: ||A^T y - grad g(x)||_* in the psi metric at x
    primal_opt: float
    #: (sqrt(nu_f) + delta/(1+delta)) * t
    bound_primal: float
    #: ||e||_* in the dual metric, e the coupling perturbation
    dual_resid_e: float
    #: ||A^T r||_* in the psi metric, r the dual shift
    dual_resid_r: float
    #: t * lam
    bound_dual: float
    interior: bool

    def satisfies(self, eps: float) -> bool:
        """Approximate primal-dual optimality at accuracy eps."""
        return (
            self.interior
            and self.primal_opt <= eps
            and self.dual_resid_e <= eps
            and self.dual_resid_r <= eps
        )


@dataclass
class DiagRecord:
    """Extra measurements at the iteration's entry state (t_{k-1}, y^{k-1})."""

    lam_entry: float
    delta_lo: float
    delta_hi: float
    slave_delta: float


@dataclass
class IterationRecord:
    k: int
    t: float
    lam: float
    slave_resid: float
    newton_iters: int
    master_inner: int
    delta_k: float
    eps_k: float
    cert: Certificate
    wall_ms: float
    feasibility: float
    rel_gap: float
    diag: DiagRecord | None = None


@dataclass
class Phase1Record:
    j: int
    lam_hat: float
    alpha: float
    d_value: float
    slave_resid: float
    newton_iters: int
    master_inner: int


@dataclass
class Phase1Result:
    x0: PrimalPoint
    y0: np.ndarray
    j_used: int
    lam0: float
    records: list


@dataclass
class SolveResult:
    x: PrimalPoint
    y: np.ndarray
    trace: list
    certificate: Certificate | None
    status: SolveStatus
    iterations: int
    phase1: Phase1Result
    objective: float
    feasibility: float
    config: SolverConfig
    sigma: float
    eps_hat: float
    final_lam: float | None = None
    wall_s: float = 0.0

    @property
    def converged(self) -> bool:
        return self.status == SolveStatus.CONVERGED


def _phase1_stepsize(lam_hat, eps, delta):
    from .scalars import phase1_stepsize

    return phase1_stepsize(lam_hat, eps, delta)


def phase1(instance: ProblemInstance, config: SolverConfig) -> Phase1Result:
    """Damped proximal-Newton initialization at fixed t0, started at y = 0.

    Terminates once the measured decrement certifies lam <= beta; each step
    uses the damped size alpha(lam_hat, eps_j, delta_j).
    """
    t0, beta = config.t0, config.beta
    y = np.zeros(instance.n)
    x_warm = None
    records = []
    for j in range(config.jmax + 1):
        slave = solve_slave(
            instance, t0, y, config.delta_init, warm_start=x_warm, max_iter=config.slave_max_iter
        )
        x_warm = slave.x
        ev = build_oracle(instance, t0, y, slave)
        eps_j, delta_j = config.eps_master, config.delta_init
        step = scaled_prox(ev, instance.composite, eps_j, max_inner=config.master_max_inner)
        lam_hat = step.lam
        d_value = ev.d_value + instance.composite.conj_value(y) / t0
        if lam_hat <= beta - eps_j:
            records.append(
                Phase1Record(j, lam_hat, 0.0, d_value, slave.residual,
                             slave.total_newton_iters, step.inner_iters)
            )
            return Phase1Result(slave.x, y, j, lam_hat, records)
        if lam_hat <= eps_j + delta_j:
            # step size undefined this close to the target: re-measure tighter
            tight = scaled_prox(
                ev, instance.composite, eps_j, inner_tol=eps_j / 100.0,
                max_inner=config.master_max_inner,
            )
            if tight.lam + eps_j / 100.0 <= beta:
                records.append(
                    Phase1Record(j, tight.lam, 0.0, d_value, slave.residual,
                                 slave.total_newton_iters, tight.inner_iters)
                )
                return Phase1Result(slave.x, y, j, tight.lam, records)
            raise Phase1Error(
                f"decrement {lam_hat:.3e} below the step-size threshold but above beta"
            )
        alpha = _phase1_stepsize(lam_hat, eps_j, delta_j)
        records.append(
            Phase1Record(j, lam_hat, alpha, d_value, slave.residual,
                         slave.total_newton_iters, step.inner_iters)
        )
        y = (1.0 - alpha) * y + alpha * step.y_next
    raise Phase1Error(f"initialization did not reach lam <= beta in {config.jmax} steps")


def certify(
    instance: ProblemInstance,
    t: float,
    x: PrimalPoint,
    y: np.ndarray,
    lam: float,
    prox_point: np.ndarray,
    ev: OracleEval,
    delta: float,
) -> Certificate:
    """Measured optimality certificate for the pair (x, y) at parameter t.

    The exact model minimizer is replaced by the computed prox point; the
    substitution error is bounded by the master accuracy in the dual metric.
    The two dual residuals are computed along independent paths (dual-space
    factorization vs block solves in the primal metric), so their agreement
    with t * lam is a nontrivial consistency check.
    """
    aty = instance.apply_At(y)
    u_parts = [g.smooth.grad(X) - w for g, X, w in zip(instance.groups, x.parts, aty)]
    primal_opt = ev.psi_hess.dual_norm(u_parts)
    bound_primal = (math.sqrt(instance.nu_total) + delta / (1.0 + delta)) * t

    r = y - prox_point
    e = t * (ev.hess @ (prox_point - y))
    dual_resid_e = ev.hess_dual_norm(e)
    atr = instance.apply_At(r)
    dual_resid_r = ev.psi_hess.dual_norm(atr)

    return Certificate(
        t=t,
        lam=lam,
        primal_opt=primal_opt,
        bound_primal=bound_primal,
        dual_resid_e=dual_resid_e,
        dual_resid_r=dual_resid_r,
        bound_dual=t * lam,
        interior=instance.is_interior(x.parts),
    )


def _measured_gap(instance, ev, y) -> float:
    """Relative surrogate duality gap at the current iterate pair."""
    obj = instance.smooth_value(ev.x.parts)
    hbar = instance.composite.conj_value(y)
    if not np.isfinite(hbar):
        return float("inf")
    dual_bar = ev.t * ev.d_value + hbar
    return abs(obj + dual_bar) / (1.0 + abs(obj))


def solve(instance: ProblemInstance, config: SolverConfig | None = None) -> SolveResult:
    """Run phase 1 and the path-following main loop.

    Returns the certified pair (x, y): x the last slave point, y the dual
    iterate it was computed from, together with the full per-iteration trace.
    """
    config = config if config is not None else SolverConfig()
    wall_start = time.perf_counter()
    nu = instance.nu_total
    sigma = sigma_rule(config.beta, nu)
    eps_hat = config.eps / (1.0 + math.sqrt(nu))
    guard = config.kmax
    if guard is None:
        guard = kmax_bound(config.t0, min(eps_hat, config.t0), sigma) + 2

    p1 = phase1(instance, config)
    x_cur, y_cur = p1.x0, p1.y0

    trace: list = []
    status = SolveStatus.ITERATION_CAP
    certificate = None
    x_out, y_out = x_cur, y_cur
    k = 0
    t_cur = config.t0

    if config.stop_mode == "t" and config.t0 <= eps_hat:
        # already past the penalty threshold: certify the phase-1 pair
        slave = solve_slave(instance, t_cur, y_cur, config.delta_slave,
                            warm_start=x_cur, max_iter=config.slave_max_iter)
        ev = build_oracle(instance, t_cur, y_cur, slave)
        step = scaled_prox(ev, instance.composite, config.eps_master,
                           inner_tol=config.eps_master / 10.0,
                           max_inner=config.master_max_inner)
        certificate = certify(instance, t_cur, slave.x, y_cur, step.lam,
                              step.y_next, ev, config.delta_slave)
        parts = slave.x.parts
        return SolveResult(
            x=slave.x, y=y_cur, trace=[], certificate=certificate,
            status=SolveStatus.CONVERGED, iterations=0, phase1=p1,
            objective=instance.smooth_value(parts),
            feasibility=instance.feasibility_violation(parts),
            config=config, sigma=sigma, eps_hat=eps_hat,
            wall_s=time.perf_counter() - wall_start,
        )

    while k < guard:
        k += 1
        tick = time.perf_counter()
        diag = None
        if config.diagnostics:
            diag_slave = solve_slave(instance, t_cur, y_cur, config.delta_slave,
                                     warm_start=x_cur, max_iter=config.slave_max_iter)
            diag_ev = build_oracle(instance, t_cur, y_cur, diag_slave)
            eps_here = config.schedule(t_cur)[1]
            diag_step = scaled_prox(diag_ev, instance.composite, eps_here,
                                    inner_tol=eps_here / 10.0,
                                    max_inner=config.master_max_inner)
        t_next = config.t0 * sigma**k
        delta_k, eps_k = config.schedule(t_next)

        slave = solve_slave(instance, t_next, y_cur, delta_k,
                            warm_start=x_cur, max_iter=config.slave_max_iter)
        ev = build_oracle(instance, t_next, y_cur, slave)
        step = scaled_prox(ev, instance.composite, eps_k,
                           inner_tol=eps_k / 10.0, max_inner=config.master_max_inner)
        cert = certify(instance, t_next, slave.x, y_cur, step.lam,
                       step.y_next, ev, delta_k)
        if config.diagnostics:
            # distance between the two slave solutions in both metrics
            diff = [a - b for a, b in zip(slave.x.parts, diag_slave.x.parts)]
            diag = DiagRecord(
                lam_entry=diag_step.lam,
                delta_lo=diag_slave.hess.norm(diff),
                delta_hi=slave.hess.norm(diff),
                slave_delta=config.delta_slave,
            )

        feas = instance.feasibility_violation(slave.x.parts)
        gap = _measured_gap(instance, ev, y_cur)
        trace.append(
            IterationRecord(
                k=k, t=t_next, lam=step.lam, slave_resid=slave.residual,
                newton_iters=slave.total_newton_iters, master_inner=step.inner_iters,
                delta_k=delta_k, eps_k=eps_k, cert=cert,
                wall_ms=(time.perf_counter() - tick) * 1e3,
                feasibility=feas, rel_gap=gap, diag=diag,
            )
        )

        x_out, y_out = slave.x, y_cur
        certificate = cert
        x_cur, y_cur = slave.x, step.y_next
        t_cur = t_next

        if config.stop_mode == "t":
            if t_next <= eps_hat:
                status = SolveStatus.CONVERGED
                break
        else:
            if feas <= config.feas_tol and gap <= config.gap_tol:
                status = SolveStatus.CONVERGED
                break

    final_lam = None
    if config.diagnostics:
        f_slave = solve_slave(instance, t_cur, y_cur, config.delta_slave,
                              warm_start=x_cur, max_iter=config.slave_max_iter)
        f_ev = build_oracle(instance, t_cur, y_cur, f_slave)
        eps_here = config.schedule(t_cur)[1]
        f_step = scaled_prox(f_ev, instance.composite, eps_here,
                             inner_tol=eps_here / 10.0, max_inner=config.master_max_inner)
        final_lam = f_step.lam

    parts = x_out.parts
    return SolveResult(
        x=x_out, y=y_out, trace=trace, certificate=certificate, status=status,
        iterations=k, phase1=p1, objective=instance.smooth_value(parts),
        feasibility=instance.feasibility_violation(parts), config=config,
        sigma=sigma, eps_hat=eps_hat, final_lam=final_lam,
        wall_s=time.perf_counter() - wall_start,
    )


# ---------------------------------------------------------------------------
# neighborhood diagnostics


@dataclass
class DiagnosticsRow:
    k: int
    lam_entry: float
    thm4_ok: bool
    lemma1_lhs: float | None
    lemma1_rhs: float | None
    lemma1_ok: bool | None
    lemma2_rhs: float
    lemma2_ok: bool
    lemma3_bound: float
    lemma3_ok: bool
    delta_lo: float
    delta_hi: float
    lam_shifted: float


@dataclass
class DiagnosticsReport:
    rows: list
    beta: float
    sigma: float

    @property
    def passed(self) -> bool:
        return all(
            r.thm4_ok and r.lemma2_ok and r.lemma3_ok and (r.lemma1_ok is not False)
            for r in self.rows
        )


def _lemma1_rhs(lam_shift, delta, eps, delta_next):
    denom = (1.0 - delta_next) * (1.0 - delta - lam_shift - eps)
    if denom <= 0.0:
        return float("inf")
    inner = (
        3.0 * eps
        + delta
        + math.sqrt(max(4.0 * delta - 2.0 * delta * delta, 0.0)) * (lam_shift + eps)
        + (lam_shift + eps) ** 2 / (1.0 - lam_shift - delta - eps)
    )
    return delta_next + inner / denom


def _lemma2_rhs(delta_lo, delta_hi, lam_entry, sigma):
    if delta_lo >= 1.0:
        return float("inf")
    rad = 1.0 - 2.0 * sigma * (1.0 - delta_lo) ** 2 + sigma
    coef = (1.0 + math.sqrt(max(rad, 0.0))) / (sigma * (1.0 - delta_lo))
    return delta_hi + coef * lam_entry


def neighborhood_diagnostics(result: SolveResult, slack: float = 1e-9) -> DiagnosticsReport:
    """Check the per-iteration neighborhood inequalities on a solve trace.

    Requires a solve run with ``diagnostics=True`` (extra slave solves at the
    entry parameter). Each row verifies: the neighborhood membership of the
    entry decrement; the one-step decrement recursion (the exact-case form
    reduces to lam+ <= lam^2/(1-lam)^2); the shifted-parameter decrement
    bound; and the solution-shift bounds against (delta + c)/(1 - delta - c).
    """
    if not result.trace or result.trace[0].diag is None:
        raise ValueError("diagnostics were not recorded; run solve(diagnostics=True)")
    beta = result.config.beta
    sigma = result.sigma
    delta_cap = result.config.delta_slave
    nu = (result.config.eps / result.eps_hat - 1.0) ** 2
    cn = c_nu(sigma, delta_cap, nu)
    rows = []
    trace = result.trace
    for i, rec in enumerate(trace):
        d = rec.diag
        lemma3_bound = (
            (delta_cap + cn) / (1.0 - delta_cap - cn)
            if delta_cap + cn < 1.0
            else float("inf")
        )
        lemma3_ok = max(d.delta_lo, d.delta_hi) <= lemma3_bound + slack

        lemma2_rhs = _lemma2_rhs(d.delta_lo, d.delta_hi, d.lam_entry, sigma)
        lemma2_ok = rec.lam <= lemma2_rhs + slack

        if i + 1 < len(trace) and trace[i + 1].diag is not None:
            lam_next = trace[i + 1].diag.lam_entry
        elif i + 1 == len(trace) and result.final_lam is not None:
            lam_next = result.final_lam
        else:
            lam_next = None
        if lam_next is not None:
            rhs = _lemma1_rhs(rec.lam, rec.delta_k, rec.eps_k, delta_cap)
            lemma1 = (lam_next, rhs, lam_next <= rhs + slack)
        else:
            lemma1 = (None, None, None)

        rows.append(
            DiagnosticsRow(
                k=rec.k,
                lam_entry=d.lam_entry,
                thm4_ok=d.lam_entry <= beta + slack,
                lemma1_lhs=lemma1[0],
                lemma1_rhs=lemma1[1],
                lemma1_ok=lemma1[2],
                lemma2_rhs=lemma2_rhs,
                lemma2_ok=lemma2_ok,
                lemma3_bound=lemma3_bound,
                lemma3_ok=lemma3_ok,
                delta_lo=d.delta_lo,
                delta_hi=d.delta_hi,
                lam_shifted=rec.lam,
            )
        )
    return DiagnosticsReport(rows=rows, beta=beta, sigma=sigma)
