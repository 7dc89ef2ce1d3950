"""Inexact oracle of the smoothed dual function, assembled from a slave solve.

With x~ the approximate slave minimizer at (t, y), the oracle carries

    value    d~(y)  = -psi_t(x~; y)
    gradient g~(y)  = (1/t) A x~
    Hessian  H~(y)  = (1/t^2) sum_i A_i (psi_t Hessian block i)^{-1} A_i^T

formed densely (the coupling dimension n is small relative to p) and
Cholesky-factorized once; the master step reuses the factorization for many
solves. The accuracy of the oracle is inherited from the slave residual.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .model import PrimalPoint, ProblemInstance, PsiHessian
from .scalars import mt_coeff, omega, omega_star
from .slave import SlaveResult, solve_slave

__all__ = ["OracleEval", "build_oracle", "dual_norm", "oracle_error_suite", "OracleErrorReport"]


class HessianFactorizationError(RuntimeError):
    """Dense dual Hessian could not be factorized (rank loss or breakdown)."""


@dataclass
class OracleEval:
    """Inexact dual oracle bundle at (t, y); immutable after construction."""

    t: float
    y: np.ndarray
    x: PrimalPoint
    delta_used: float
    residual: float
    d_value: float
    grad: np.ndarray
    hess: np.ndarray
    psi_hess: PsiHessian
    _cho: tuple = field(repr=False, default=None)
    _spectral: tuple = field(repr=False, default=None)

    @property
    def n(self) -> int:
        return self.grad.shape[0]

    def solve_hess(self, v: np.ndarray) -> np.ndarray:
        return scipy.linalg.cho_solve(self._cho, v)

    def hess_norm(self, u: np.ndarray) -> float:
        """||u|| in the metric of the inexact dual Hessian."""
        return float(np.sqrt(max(float(u @ (self.hess @ u)), 0.0)))

    def hess_dual_norm(self, v: np.ndarray) -> float:
        """||v||_* in the inverse metric, via the cached factorization."""
        return float(np.sqrt(max(float(v @ self.solve_hess(v)), 0.0)))

    def spectral_bounds(self) -> tuple:
        """(mu, L): extreme eigenvalues of the dual Hessian, cached."""
        if self._spectral is None:
            eigs = np.linalg.eigvalsh(self.hess)
            self._spectral = (float(eigs[0]), float(eigs[-1]))
        return self._spectral


def build_oracle(
    instance: ProblemInstance, t: float, y: np.ndarray, slave: SlaveResult
) -> OracleEval:
    """Assemble the inexact dual oracle from a successful slave solve."""
    if slave.t != t:
        raise ValueError(f"slave result was computed at t={slave.t}, not t={t}")
    y = np.asarray(y, dtype=float)
    inv_t = mt_coeff(t)
    parts = slave.x.parts

    ax = instance.apply_A(parts)
    grad = inv_t * ax
    d_value = -(
        inv_t * (instance.smooth_value(parts) - float(y @ ax))
        + instance.barrier_value(parts)
    )

    # blockwise Schur accumulation: (1/t^2) sum_i A_i H_i^{-1} A_i^T
    n = instance.n
    hess = np.zeros((n, n))
    for g, H in zip(instance.groups, slave.hess.parts):
        sol = np.linalg.solve(H, g.coupling_t).reshape(-1, n)  # (B*q, n)
        hess += g.coupling_flat @ sol
    hess *= inv_t * inv_t
    hess = 0.5 * (hess + hess.T)

    try:
        cho = scipy.linalg.cho_factor(hess, lower=True)
    except scipy.linalg.LinAlgError as exc:
        raise HessianFactorizationError(
            "dual Hessian factorization failed; coupling may be rank deficient"
        ) from exc

    return OracleEval(
        t=t,
        y=y,
        x=slave.x,
        delta_used=slave.delta,
        residual=slave.residual,
        d_value=d_value,
        grad=grad,
        hess=hess,
        psi_hess=slave.hess,
        _cho=cho,
    )


def dual_norm(ev: OracleEval, u: np.ndarray, which: str = "primal") -> float:
    """Local norms on the dual space in the inexact-Hessian metric.

    ``which='primal'`` gives (u^T H~ u)^(1/2), ``which='dual'`` the conjugate
    norm (u^T H~^{-1} u)^(1/2).
    """
    u = np.asarray(u, dtype=float)
    if which == "primal":
        return ev.hess_norm(u)
    if which == "dual":
        return ev.hess_dual_norm(u)
    raise ValueError(f"which must be 'primal' or 'dual', got {which!r}")


# ---------------------------------------------------------------------------
# oracle error measurement against a high-accuracy reference


@dataclass
class OracleErrorRow:
    delta_requested: float
    delta_measured: float
    value_gap: float
    value_lower: float
    value_upper: float
    value_bracket_ok: bool
    pencil_min: float
    pencil_max: float
    sandwich_ok: bool
    grad_error: float
    grad_bound_ok: bool

    @property
    def passed(self) -> bool:
        return self.value_bracket_ok and self.sandwich_ok and self.grad_bound_ok


@dataclass
class OracleErrorReport:
    t: float
    rows: list

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)


def oracle_error_suite(
    instance: ProblemInstance,
    t: float,
    y: np.ndarray,
    deltas,
    delta_ref: float = 1e-12,
    slack: float = 1e-9,
) -> OracleErrorReport:
    """Measure how the inexact oracle approximates a near-exact reference.

    For each requested delta the slave is solved cold at that accuracy and
    compared against a reference solve at ``delta_ref``; the measured
    distance delta_m anchors three checks: the value bracket
    omega(delta_m/(1+delta_m)) <= d - d~ <= omega_star(delta_m/(1-delta_m)),
    the two-sided Hessian sandwich via the generalized eigenvalues of the
    (exact, inexact) pencil, and the gradient error bound delta_m in the
    inexact dual norm.
    """
    y = np.asarray(y, dtype=float)
    ref_slave = solve_slave(instance, t, y, delta_ref)
    ref = build_oracle(instance, t, y, ref_slave)

    rows = []
    for delta in deltas:
        slave = solve_slave(instance, t, y, delta)
        ev = build_oracle(instance, t, y, slave)

        diff = [a - b for a, b in zip(slave.x.parts, ref_slave.x.parts)]
        delta_m = slave.hess.norm(diff)

        value_gap = ref.d_value - ev.d_value
        lower = omega(delta_m / (1.0 + delta_m))
        upper = omega_star(delta_m / (1.0 - delta_m)) if delta_m < 0.5 else float("inf")
        bracket_ok = (value_gap >= lower - slack) and (value_gap <= upper + slack)

        pencil = scipy.linalg.eigh(ref.hess, ev.hess, eigvals_only=True)
        lo_bound = (1.0 - delta_m) ** 2
        hi_bound = (1.0 - delta_m) ** -2
        sandwich_ok = (pencil.min() >= lo_bound - slack) and (
            pencil.max() <= hi_bound + slack
        )

        gerr = ev.hess_dual_norm(ev.grad - ref.grad)
        grad_ok = gerr <= delta_m + slack

        rows.append(
            OracleErrorRow(
                delta_requested=float(delta),
                delta_measured=float(delta_m),
                value_gap=float(value_gap),
                value_lower=float(lower),
                value_upper=float(upper),
                value_bracket_ok=bool(bracket_ok),
                pencil_min=float(pencil.min()),
                pencil_max=float(pencil.max()),
                sandwich_ok=bool(sandwich_ok),
                grad_error=float(gerr),
                grad_bound_ok=bool(grad_ok),
            )
        )
    return OracleErrorReport(t=t, rows=rows)
