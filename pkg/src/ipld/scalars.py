"""Closed-form scalar functions and parameter rules used by the solver loops.

Everything here is a pure double-precision function: the auxiliary convex
functions ``omega``/``omega_star``, the penalty-scaling coefficient, the
path-following contraction factor and its companion constant, damped step
sizes, iteration-count bounds, and conversion rules between
generalized-self-concordance descriptors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "omega",
    "omega_star",
    "mt_coeff",
    "sigma_rule",
    "c_nu",
    "phase1_stepsize",
    "kmax_bound",
    "jmax_bound",
    "GscParams",
    "gsc_convert",
    "lemma4_region_check",
]


def omega(tau):
    """omega(tau) = tau - ln(1 + tau), defined for tau >= 0.

    Accepts scalars or arrays; strictly convex and nonnegative.
    """
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0):
        raise ValueError("omega requires tau >= 0")
    out = tau - np.log1p(tau)
    return float(out) if out.ndim == 0 else out


def omega_star(tau):
    """omega_star(tau) = -tau - ln(1 - tau), defined for tau in [0, 1)."""
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0) or np.any(tau >= 1):
        raise ValueError("omega_star requires tau in [0, 1)")
    out = -tau - np.log1p(-tau)
    return float(out) if out.ndim == 0 else out


def mt_coeff(t: float) -> float:
    """Scaling coefficient of the penalized slave objective for t in (0, 1].

    Returns 1/t, the factor that renders the smoothed objective standard
    self-concordant on this parameter range.
    """
    if not 0.0 < t <= 1.0:
        raise ValueError(f"t must lie in (0, 1], got {t}")
    return 1.0 / t


def sigma_rule(beta: float, nu_f: float) -> float:
    """Contraction factor for the penalty parameter update t+ = sigma * t.

    sigma = 1 - 0.29*beta / (0.3*beta + sqrt(nu_f)), which lies in (0, 1)
    for beta in (0, 0.1] and nu_f > 0.
    """
    if not 0.0 < beta <= 0.1:
        raise ValueError(f"beta must lie in (0, 0.1], got {beta}")
    if nu_f <= 0.0:
        raise ValueError(f"nu_f must be positive, got {nu_f}")
    return 1.0 - 0.29 * beta / (0.3 * beta + math.sqrt(nu_f))


def c_nu(sigma: float, delta: float, nu_f: float) -> float:
    """c_nu(sigma) = delta/sigma + ((1 - sigma)/sigma) * sqrt(nu_f).

    Decreasing in sigma on (0, 1]. With delta = beta/100 and sigma from
    :func:`sigma_rule` this evaluates to 0.3*beta.
    """
    if not 0.0 < sigma <= 1.0:
        raise ValueError(f"sigma must lie in (0, 1], got {sigma}")
    if delta < 0.0:
        raise ValueError(f"delta must be nonnegative, got {delta}")
    return delta / sigma + ((1.0 - sigma) / sigma) * math.sqrt(nu_f)


def phase1_stepsize(lam_hat: float, eps: float = 0.0, delta: float = 0.0) -> float:
    """Damped step size for the initialization loop.

    alpha = (lam_hat - eps - delta) * (1 - delta)^2
            / ((1 + (1 - delta) * (lam_hat - eps - delta)) * lam_hat)

    Requires lam_hat > eps + delta; with eps = delta = 0 this reduces to the
    classical damped Newton step 1/(1 + lam_hat).
    """
    if eps < 0.0 or delta < 0.0:
        raise ValueError("eps and delta must be nonnegative")
    if lam_hat <= eps + delta:
        raise ValueError(
            f"step size undefined: lam_hat={lam_hat} <= eps + delta={eps + delta}"
        )
    gap = lam_hat - eps - delta
    return gap * (1.0 - delta) ** 2 / ((1.0 + (1.0 - delta) * gap) * lam_hat)


def kmax_bound(t0: float, eps_hat: float, sigma: float) -> int:
    """Iteration bound floor(ln(t0/eps_hat) / (-ln sigma)) for the main loop."""
    if not 0.0 < eps_hat <= t0 <= 1.0:
        raise ValueError(f"need 0 < eps_hat <= t0 <= 1, got t0={t0}, eps_hat={eps_hat}")
    if not 0.0 < sigma < 1.0:
        raise ValueError(f"sigma must lie in (0, 1), got {sigma}")
    if eps_hat == t0:
        return 0
    return int(math.floor(math.log(t0 / eps_hat) / (-math.log(sigma))))


def jmax_bound(gap: float, beta: float) -> int:
    """Iteration bound for the initialization loop given an objective gap.

    floor(gap / omega(0.97*beta*(1 - 0.01*beta))) + 1.
    """
    if gap < 0.0:
        raise ValueError(f"gap must be nonnegative, got {gap}")
    if not 0.0 < beta <= 0.1:
        raise ValueError(f"beta must lie in (0, 0.1], got {beta}")
    step = omega(0.97 * beta * (1.0 - 1e-2 * beta))
    return int(math.floor(gap / step)) + 1


@dataclass(frozen=True)
class GscParams:
    """Generalized self-concordance descriptor (M, theta).

    theta = 3 with M = 2 is the standard self-concordant case. ``mu`` is an
    optional strong-convexity modulus, required by conversion rules that
    trade strong convexity for a smaller theta.
    """

    M: float
    theta: float
    mu: float | None = None

    def __post_init__(self):
        if self.M < 0.0:
            raise ValueError(f"M must be nonnegative, got {self.M}")
        if not 0.0 < self.theta < 6.0:
            raise ValueError(f"theta must lie in (0, 6), got {self.theta}")
        if self.mu is not None and self.mu <= 0.0:
            raise ValueError(f"mu must be positive when given, got {self.mu}")

    @property
    def is_standard(self) -> bool:
        return self.theta == 3.0 and self.M == 2.0


_GSC_RULES = ("strongly_convex", "conjugate", "sum_with_sc")


def gsc_convert(params: GscParams, rule: str, other: GscParams | None = None) -> GscParams:
    """Convert a generalized self-concordance descriptor under one rule.

    Rules:
      * ``strongly_convex``: theta in (0, 3] with modulus mu yields a plain
        self-concordant descriptor with M_hat = mu^((theta-3)/2) * M.
      * ``conjugate``: theta in [3, 6) maps to the Legendre conjugate's
        descriptor (M, 6 - theta).
      * ``sum_with_sc``: the sum of ``params`` (theta in (0, 3], with mu when
        theta < 3) and a self-concordant partner ``other`` (default the
        standard descriptor) carries M = max(other.M, M_hat).

    theta = 3 is a fixed point of every rule.
    """
    if rule not in _GSC_RULES:
        raise ValueError(f"unknown rule {rule!r}; expected one of {_GSC_RULES}")

    if rule == "conjugate":
        if not 3.0 <= params.theta < 6.0:
            raise ValueError(f"conjugate rule needs theta in [3, 6), got {params.theta}")
        return GscParams(params.M, 6.0 - params.theta)

    # Both remaining rules reduce theta in (0, 3] to the theta = 3 case.
    if not 0.0 < params.theta <= 3.0:
        raise ValueError(f"rule {rule!r} needs theta in (0, 3], got {params.theta}")
    if params.theta == 3.0:
        m_hat = params.M
    else:
        if params.mu is None:
            raise ValueError(f"rule {rule!r} with theta < 3 requires a modulus mu")
        m_hat = params.mu ** ((params.theta - 3.0) / 2.0) * params.M

    if rule == "strongly_convex":
        return GscParams(m_hat, 3.0)

    partner = other if other is not None else GscParams(2.0, 3.0)
    if partner.theta != 3.0:
        raise ValueError("sum_with_sc partner must be self-concordant (theta = 3)")
    return GscParams(max(partner.M, m_hat), 3.0)


def lemma4_region_check(a: float, b: float, step: float = 0.005, extent: float = 5.0) -> bool:
    """Grid-verify the containment of the coupled quadratic-inequality region.

    The region N(a, b) = {(u, v) >= 0 : u^2/(1+u) <= a*u + b*v and
    v^2/(1+v) <= a*v + b*u} is claimed to lie inside the square
    [0, (a+b)/(1-a-b)]^2 whenever a + b < 1. Enumerates every grid point of
    [0, extent]^2 with the given step and returns True iff no member of
    N(a, b) escapes the square.
    """
    if not (0.0 < a < 1.0 and 0.0 < b < 1.0 and a + b < 1.0):
        raise ValueError(f"need a, b in (0, 1) with a + b < 1, got a={a}, b={b}")
    grid = np.arange(0.0, extent + step / 2.0, step)
    u = grid[:, None]
    v = grid[None, :]
    in_region = (u * u / (1.0 + u) <= a * u + b * v) & (
        v * v / (1.0 + v) <= a * v + b * u
    )
    bound = (a + b) / (1.0 - a - b) + 1e-12
    outside = (u > bound) | (v > bound)
    return not bool(np.any(in_region & outside))
