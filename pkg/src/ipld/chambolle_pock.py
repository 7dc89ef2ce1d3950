"""First-order primal-dual baseline for cross-validating solutions.

The classic two-step-size primal-dual iteration on min_u G(u) + F(K u):

    y+ = prox_{sigma F*}(y + sigma K ubar)
    u+ = prox_{tau G}(u - tau K^T y+)
    ubar+ = 2 u+ - u              (over-relaxation parameter 1)

with sigma = 0.99 / (tau ||K||^2). For the rate-allocation model the
auxiliary variables z_i = d_i^T x_i + mu_i decouple the log utilities from
the coupling map, so every prox is closed form.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .applications import NumData
from .model import ProblemInstance

__all__ = ["CpProblem", "CpResult", "cp_solve", "build_cp_num", "operator_norm_estimate"]


def operator_norm_estimate(apply_k, apply_kt, dim: int, tol: float = 1e-8, max_iter: int = 500) -> float:
    """Power iteration on K^T K run to relative stagnation, inflated by 1.01."""
    v = np.ones(dim) / np.sqrt(dim)
    prev = 0.0
    for _ in range(max_iter):
        w = apply_kt(apply_k(v))
        nrm = float(np.linalg.norm(w))
        if nrm == 0.0:
            return 0.0
        v = w / nrm
        est = np.sqrt(nrm)
        if abs(est - prev) <= tol * max(est, 1.0):
            break
        prev = est
    return 1.01 * est


@dataclass
class CpProblem:
    """Composite splitting min_u G(u) + F(K u) with proximable G and F*."""

    dim_primal: int
    dim_dual: int
    apply_k: callable
    apply_kt: callable
    prox_g: callable  # (u, tau) -> argmin G + 1/(2 tau) ||.-u||^2
    prox_fstar: callable  # (y, sigma)
    norm_k: float
    primal_value: callable = None
    dual_value: callable = None
    feasibility: callable = None
    meta: dict = field(default_factory=dict)


@dataclass
class CpResult:
    u: np.ndarray
    y: np.ndarray
    iters: int
    converged: bool
    tau: float
    sigma: float
    history: list
    gap_flagged: bool = False

    @property
    def primal(self) -> float:
        return self.history[-1][1] if self.history else float("nan")

    @property
    def feas(self) -> float:
        return self.history[-1][2] if self.history else float("nan")

    @property
    def rel_gap(self) -> float:
        return self.history[-1][3] if self.history else float("nan")


def cp_solve(
    prob: CpProblem,
    tau: float = 1e-6,
    max_iter: int = 20000,
    tol_feas: float = 1e-7,
    tol_gap: float = 1e-7,
    u0: np.ndarray | None = None,
    check_every: int = 10,
) -> CpResult:
    """Run the primal-dual iteration until feasibility and relative gap meet
    their tolerances or the iteration cap is reached (flagged, not raised).

    When the problem supplies no dual value, iterate-difference stagnation
    substitutes for the gap criterion and the result is flagged.
    """
    if tau <= 0.0:
        raise ValueError(f"tau must be positive, got {tau}")
    nk2 = prob.norm_k**2
    sigma = 0.99 / (tau * nk2) if nk2 > 0.0 else 1.0

    u = np.zeros(prob.dim_primal) if u0 is None else np.array(u0, dtype=float)
    u = prob.prox_g(u, tau)  # start inside dom G
    ubar = u.copy()
    y = np.zeros(prob.dim_dual)

    gap_flagged = prob.dual_value is None or prob.primal_value is None
    history = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        y = prob.prox_fstar(y + sigma * prob.apply_k(ubar), sigma)
        u_new = prob.prox_g(u - tau * prob.apply_kt(y), tau)
        ubar = 2.0 * u_new - u
        step = float(np.linalg.norm(u_new - u))
        u = u_new

        if it % check_every == 0 or it == max_iter:
            feas = prob.feasibility(u) if prob.feasibility is not None else 0.0
            pv = prob.primal_value(u) if prob.primal_value is not None else float("nan")
            if gap_flagged:
                gap = step / (tau * (1.0 + abs(pv)))
            else:
                dv = prob.dual_value(y)
                gap = abs(pv - dv) / (1.0 + abs(pv))
            history.append((it, pv, feas, gap))
            if feas <= tol_feas and gap <= tol_gap:
                converged = True
                break
    return CpResult(
        u=u, y=y, iters=it, converged=converged, tau=tau, sigma=sigma,
        history=history, gap_flagged=gap_flagged,
    )


# ---------------------------------------------------------------------------
# rate-allocation splitting


def build_cp_num(instance: ProblemInstance) -> CpProblem:
    """Reformulate a built NUM instance for the primal-dual baseline.

    Variables are u = (x, z) with z_i = d_i^T x_i + mu_i. G collects the
    box-constrained quadratic tracking terms in x and -sum ln z; F is the
    indicator of {(w1, w2): w1 in [L, U], w2 = -mu} acting on
    K(x, z) = (A x, D x - z).
    """
    meta = instance.meta
    if meta.get("model") != "num":
        raise ValueError("build_cp_num needs an instance built by build_num_instance")
    data: NumData = meta["data"]
    lower, upper = meta["lower"], meta["upper"]
    node_order = meta["node_order"]

    # dense couplings in the instance's flat variable order
    n = instance.n
    p = instance.p
    a_mat = np.zeros((n, p))
    d_mat = np.zeros((len(node_order), p))
    rho = data.rho
    cap = data.rate_cap
    r_flat = np.zeros(p)
    mu_vec = np.zeros(len(node_order))
    ofs = 0
    for g in instance.groups:
        for b in range(g.count):
            cols = slice(ofs, ofs + g.dim)
            a_mat[:, cols] = g.coupling[b]
            ofs += g.dim
    blk = 0
    ofs = 0
    for g in instance.groups:
        sm = g.smooth
        for b in range(g.count):
            cols = slice(ofs, ofs + g.dim)
            d_mat[blk, cols] = sm.d[b]
            r_flat[cols] = sm.r[b]
            mu_vec[blk] = sm.mu[b]
            ofs += g.dim
            blk += 1
    N = blk

    def apply_k(u):
        x, z = u[:p], u[p:]
        return np.concatenate([a_mat @ x, d_mat @ x - z])

    def apply_kt(w):
        w1, w2 = w[:n], w[n:]
        return np.concatenate([a_mat.T @ w1 + d_mat.T @ w2, -w2])

    norm_k = operator_norm_estimate(apply_k, apply_kt, p + N)

    def prox_g(u, tau):
        x, z = u[:p], u[p:]
        if rho > 0.0:
            x = np.clip((x + tau * rho * r_flat) / (1.0 + tau * rho), 0.0, cap)
        else:
            x = np.clip(x, 0.0, cap)
        z = 0.5 * (z + np.sqrt(z * z + 4.0 * tau))
        return np.concatenate([x, z])

    def prox_fstar(y, sigma):
        y1, y2 = y[:n], y[n:]
        y1 = y1 - sigma * np.clip(y1 / sigma, lower, upper)
        y2 = y2 + sigma * mu_vec
        return np.concatenate([y1, y2])

    def primal_value(u):
        x, z = u[:p], u[p:]
        return float(-np.log(z).sum() + 0.5 * rho * ((x - r_flat) ** 2).sum())

    def dual_value(y):
        # -F*(y) - G*(-K^T y), every conjugate in closed form
        y1, y2 = y[:n], y[n:]
        fstar = float(np.where(y1 >= 0.0, upper * y1, lower * y1).sum() - mu_vec @ y2)
        w = -apply_kt(y)
        wx, wz = w[:p], w[p:]
        if np.any(wz >= 0.0):
            return -np.inf
        gstar_z = float(np.sum(-1.0 - np.log(-wz)))
        if rho > 0.0:
            xs = np.clip(r_flat + wx / rho, 0.0, cap)
            gstar_x = float(wx @ xs - 0.5 * rho * ((xs - r_flat) ** 2).sum())
        else:
            gstar_x = float(np.maximum(wx, 0.0).sum() * cap)
        return -fstar - gstar_x - gstar_z

    def feasibility(u):
        x, z = u[:p], u[p:]
        w = a_mat @ x
        v = max(
            float(np.maximum(lower - w, 0.0).max(initial=0.0)),
            float(np.maximum(w - upper, 0.0).max(initial=0.0)),
            float(np.abs(d_mat @ x + mu_vec - z).max(initial=0.0)),
            float(np.maximum(-x, 0.0).max(initial=0.0)),
            float(np.maximum(x - cap, 0.0).max(initial=0.0)),
        )
        return v

    def model_objective(u):
        """Source-model objective at the x part (eliminating z)."""
        x = u[:p]
        return float(-np.log(d_mat @ x + mu_vec).sum()
                     + 0.5 * rho * ((x - r_flat) ** 2).sum())

    return CpProblem(
        dim_primal=p + N,
        dim_dual=n + N,
        apply_k=apply_k,
        apply_kt=apply_kt,
        prox_g=prox_g,
        prox_fstar=prox_fstar,
        norm_k=norm_k,
        primal_value=primal_value,
        dual_value=dual_value,
        feasibility=feasibility,
        meta={"p": p, "N": N, "n": n, "model_objective": model_objective},
    )
