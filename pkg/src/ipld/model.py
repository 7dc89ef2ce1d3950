"""Separable problem data, the penalized slave objective, and local norms.

A :class:`ProblemInstance` is a list of block groups (smooth term + barrier
+ coupling columns, vectorized per group), a composite term on the coupling
image, and bookkeeping. The penalized slave objective at parameter
t in (0, 1] is

    psi_t(x; y) = (1/t) * (g(x) - y^T A x) + f(x),

whose Hessian (1/t) * g'' + f'' is block diagonal, positive definite on the
interior, and independent of y. Local norms on the primal space are taken in
that metric.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .blocks import BarrierFamily, SmoothFamily
from .composites import CompositeTerm
from .scalars import mt_coeff

__all__ = [
    "BlockGroup",
    "PrimalPoint",
    "PsiHessian",
    "PsiEval",
    "ProblemInstance",
    "evaluate_psi",
    "primal_local_norm",
    "primal_dual_norm",
    "validate_instance",
    "ValidationReport",
    "PositiveDefinitenessError",
]


class PositiveDefinitenessError(RuntimeError):
    """A block Hessian factorization failed; the metric lost definiteness."""


class BlockGroup:
    """A stack of B same-shaped blocks: smooth family, barrier, coupling."""

    def __init__(self, smooth: SmoothFamily, barrier: BarrierFamily, coupling):
        coupling = np.asarray(coupling, dtype=float)
        if coupling.ndim != 3:
            raise ValueError("coupling must have shape (blocks, n, dim)")
        if smooth.count != barrier.count or smooth.dim != barrier.dim:
            raise ValueError("smooth and barrier families disagree on shape")
        if coupling.shape[0] != smooth.count or coupling.shape[2] != smooth.dim:
            raise ValueError(
                f"coupling shape {coupling.shape} inconsistent with "
                f"{smooth.count} blocks of dimension {smooth.dim}"
            )
        self.smooth = smooth
        self.barrier = barrier
        self.coupling = coupling
        # (n, B*q) layout of the coupling stack; one BLAS call per product
        self.coupling_flat = np.ascontiguousarray(
            coupling.transpose(1, 0, 2).reshape(coupling.shape[1], -1)
        )
        # (B, q, n) layout, the right-hand side of the blockwise solves
        self.coupling_t = np.ascontiguousarray(coupling.transpose(0, 2, 1))

    @property
    def count(self) -> int:
        return self.smooth.count

    @property
    def dim(self) -> int:
        return self.smooth.dim

    @property
    def n(self) -> int:
        return self.coupling.shape[1]


@dataclass(frozen=True)
class PrimalPoint:
    """Block-partitioned primal point: one (B, q) stack per group.

    The interiority flag is computed by the owning instance at construction;
    parts are treated as immutable.
    """

    parts: tuple
    interior: bool

    def flatten(self) -> np.ndarray:
        return np.concatenate([p.reshape(-1) for p in self.parts])

    def copy_parts(self) -> list:
        return [p.copy() for p in self.parts]


class PsiHessian:
    """Block-diagonal psi Hessian: per-group (B, q, q) stacks.

    Provides the primal local norm, its dual, and linear solves. A Cholesky
    pass over every block certifies positive definiteness once per object.
    """

    def __init__(self, parts: Sequence[np.ndarray]):
        self.parts = [np.asarray(p, dtype=float) for p in parts]
        self._checked = False

    def _check(self):
        if self._checked:
            return
        try:
            for p in self.parts:
                np.linalg.cholesky(p)
        except np.linalg.LinAlgError as exc:
            raise PositiveDefinitenessError(
                "block Hessian is not positive definite"
            ) from exc
        self._checked = True

    def matvec(self, u_parts) -> list:
        return [
            np.matmul(H, u[..., None])[..., 0] for H, u in zip(self.parts, u_parts)
        ]

    def solve(self, v_parts) -> list:
        self._check()
        return [
            np.linalg.solve(H, v[..., None])[..., 0]
            for H, v in zip(self.parts, v_parts)
        ]

    def norm(self, u_parts) -> float:
        """Primal local norm (u^T H u)^(1/2) on the product space."""
        total = 0.0
        for Hu, u in zip(self.matvec(u_parts), u_parts):
            total += float((u * Hu).sum())
        return float(np.sqrt(max(total, 0.0)))

    def dual_norm(self, v_parts) -> float:
        """Dual local norm (v^T H^{-1} v)^(1/2) on the product space."""
        total = 0.0
        for sol, v in zip(self.solve(v_parts), v_parts):
            total += float((v * sol).sum())
        return float(np.sqrt(max(total, 0.0)))

    def to_dense(self) -> np.ndarray:
        import scipy.linalg

        mats = [H[b] for H in self.parts for b in range(H.shape[0])]
        return scipy.linalg.block_diag(*mats)


class PsiEval(NamedTuple):
    value: float
    grad: list
    hess: PsiHessian


class ProblemInstance:
    """Separable composite problem: min g(x) + phi(Ax) over x in K.

    ``groups`` carry the separable smooth blocks g_i, the barriers of their
    sets K_i, and the coupling columns A_i stacked per group. Immutable after
    assembly; all evaluations are pure, so instances may be shared freely.
    """

    def __init__(self, groups: Sequence[BlockGroup], composite: CompositeTerm, meta=None):
        groups = list(groups)
        if not groups:
            raise ValueError("instance needs at least one block group")
        n = groups[0].n
        for g in groups:
            if g.n != n:
                raise ValueError("all coupling stacks must share the row count n")
        if composite.n != n:
            raise ValueError(
                f"composite dimension {composite.n} != coupling rows {n}"
            )
        self.groups = tuple(groups)
        self.composite = composite
        self.n = n
        self.meta = dict(meta) if meta else {}

    # -- shape bookkeeping -------------------------------------------------
    @property
    def num_blocks(self) -> int:
        return sum(g.count for g in self.groups)

    @property
    def p(self) -> int:
        return sum(g.count * g.dim for g in self.groups)

    @property
    def nu_total(self) -> float:
        return float(sum(g.barrier.nu_block * g.count for g in self.groups))

    def block_dims(self) -> list:
        return [g.dim for g in self.groups for _ in range(g.count)]

    def split(self, x_flat: np.ndarray) -> list:
        """Partition a flat length-p vector into per-group (B, q) stacks."""
        parts, ofs = [], 0
        for g in self.groups:
            size = g.count * g.dim
            parts.append(np.asarray(x_flat[ofs : ofs + size], dtype=float).reshape(g.count, g.dim))
            ofs += size
        if ofs != len(x_flat):
            raise ValueError(f"flat vector has length {len(x_flat)}, expected {ofs}")
        return parts

    # -- points ------------------------------------------------------------
    def membership(self, parts) -> list:
        return [
            g.barrier.in_domain(X) & g.smooth.in_domain(X)
            for g, X in zip(self.groups, parts)
        ]

    def is_interior(self, parts) -> bool:
        return all(bool(np.all(m)) for m in self.membership(parts))

    def point(self, parts) -> PrimalPoint:
        parts = tuple(np.array(p, dtype=float) for p in parts)
        return PrimalPoint(parts, self.is_interior(parts))

    def midpoint(self) -> PrimalPoint:
        return self.point([g.barrier.midpoint() for g in self.groups])

    # -- plain evaluations ---------------------------------------------------
    def smooth_value(self, parts) -> float:
        return float(sum(g.smooth.value(X).sum() for g, X in zip(self.groups, parts)))

    def barrier_value(self, parts) -> float:
        return float(sum(g.barrier.value(X).sum() for g, X in zip(self.groups, parts)))

    def apply_A(self, parts) -> np.ndarray:
        out = np.zeros(self.n)
        for g, X in zip(self.groups, parts):
            out += g.coupling_flat @ X.reshape(-1)
        return out

    def apply_At(self, y: np.ndarray) -> list:
        return [
            (y @ g.coupling_flat).reshape(g.count, g.dim) for g in self.groups
        ]

    def feasibility_violation(self, parts) -> float:
        """Max constraint violation: coupling window plus block sets."""
        v = self.composite.constraint_violation(self.apply_A(parts))
        for g, X in zip(self.groups, parts):
            v = max(v, float(g.barrier.violation(X).max(initial=0.0)))
        return v

    # -- penalized slave objective ------------------------------------------
    def psi(self, t: float, parts, y: np.ndarray, *, need_value=True) -> PsiEval:
        """Value, gradient stacks, and Hessian of psi_t(.; y) at x."""
        inv_t = mt_coeff(t)
        for g, X, ok in zip(self.groups, parts, self.membership(parts)):
            if not np.all(ok):
                bad = int(np.argmin(ok))
                raise ValueError(
                    f"point leaves the domain of a block (group dim {g.dim}, block {bad})"
                )
        aty = self.apply_At(y)
        grads, hesss = [], []
        value = 0.0
        for g, X, w in zip(self.groups, parts, aty):
            grads.append(inv_t * (g.smooth.grad(X) - w) + g.barrier.grad(X))
            hesss.append(inv_t * g.smooth.hess(X) + g.barrier.hess(X))
            if need_value:
                value += float(g.smooth.value(X).sum() - (w * X).sum())
        if need_value:
            value = inv_t * value + self.barrier_value(parts)
        return PsiEval(float(value), grads, PsiHessian(hesss))


def evaluate_psi(instance: ProblemInstance, t: float, x: PrimalPoint, y: np.ndarray):
    """Evaluate the penalized slave objective at an interior point.

    Returns ``(value, grad_parts, hess)`` with the gradient as per-group
    (B, q) stacks and the Hessian as a :class:`PsiHessian`.
    """
    ev = instance.psi(t, x.parts if isinstance(x, PrimalPoint) else x, np.asarray(y, dtype=float))
    return ev.value, ev.grad, ev.hess


def _as_parts(instance, u):
    if isinstance(u, PrimalPoint):
        return list(u.parts)
    if isinstance(u, np.ndarray) and u.ndim == 1:
        return instance.split(u) if hasattr(instance, "split") else [u]
    return list(u)


def primal_local_norm(hess: PsiHessian, u, instance: ProblemInstance | None = None) -> float:
    """(u^T H u)^(1/2) in the psi metric; u may be flat if instance is given."""
    if isinstance(u, np.ndarray) and u.ndim == 1:
        if instance is None:
            raise ValueError("flat vectors need the owning instance to split")
        u = instance.split(u)
    return hess.norm(_as_parts(instance, u))


def primal_dual_norm(hess: PsiHessian, v, instance: ProblemInstance | None = None) -> float:
    """(v^T H^{-1} v)^(1/2) in the psi metric; factorization failure raises."""
    if isinstance(v, np.ndarray) and v.ndim == 1:
        if instance is None:
            raise ValueError("flat vectors need the owning instance to split")
        v = instance.split(v)
    return hess.dual_norm(_as_parts(instance, v))


# ---------------------------------------------------------------------------
# instance validation


@dataclass
class CheckRow:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class ValidationReport:
    rows: list = field(default_factory=list)

    def add(self, name, passed, detail=""):
        self.rows.append(CheckRow(name, bool(passed), str(detail)))

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def __str__(self):
        lines = [
            f"[{'ok' if r.passed else 'FAIL'}] {r.name}" + (f": {r.detail}" if r.detail else "")
            for r in self.rows
        ]
        return "\n".join(lines)


def _fd_gradient(fun, x, h):
    g = np.zeros_like(x)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        g[j] = (fun(x + e) - fun(x - e)) / (2.0 * h)
    return g


def validate_instance(instance: ProblemInstance, seed: int = 0, rank_limit: int = 500) -> ValidationReport:
    """Run the numeric sanity suite on an instance; report-only.

    Checks: coupling full row rank (up to ``rank_limit`` rows), block/coupling
    dimension consistency, finite-difference agreement of smooth and barrier
    gradients, barrier blow-up toward the boundary, the barrier decrement
    bound, smooth-Hessian positive semidefiniteness, and proximal/projection
    consistency of the composite.
    """
    rng = np.random.default_rng(seed)
    report = ValidationReport()

    # rank of A A^T
    if instance.n <= rank_limit:
        aat = np.zeros((instance.n, instance.n))
        for g in instance.groups:
            aat += np.einsum("bnq,bmq->nm", g.coupling, g.coupling)
        eigs = np.linalg.eigvalsh(aat)
        tol = 1e-10 * max(abs(eigs[0]), abs(eigs[-1]))
        report.add(
            "coupling_full_row_rank",
            eigs[0] > tol,
            f"min eig {eigs[0]:.3e}, threshold {tol:.3e}",
        )
    else:
        report.add("coupling_full_row_rank", True, "skipped (n > rank_limit)")

    report.add(
        "block_dimensions_consistent",
        all(
            g.coupling.shape == (g.count, instance.n, g.dim)
            and g.smooth.count == g.barrier.count == g.count
            for g in instance.groups
        ),
    )

    mid = instance.midpoint()
    report.add("midpoint_interior", mid.interior)

    # finite-difference gradients at jittered interior points
    grad_ok, barrier_grad_ok, hess_ok, decr_ok = True, True, True, True
    worst_fd = 0.0
    for g, X0 in zip(instance.groups, mid.parts):
        jitter = 0.05 * (rng.random(X0.shape) - 0.5)
        X = X0 * (1.0 + jitter) + 0.01 * jitter
        inside = g.barrier.in_domain(X) & g.smooth.in_domain(X)
        X = np.where(inside[:, None], X, X0)
        take = min(3, g.count)
        for b in rng.choice(g.count, size=take, replace=False):
            x = X[b]
            h = 1e-6 * (1.0 + np.abs(x).max())
            gs = g.smooth.grad(x[None])[0]
            fd = _fd_gradient(lambda z: float(g.smooth.value(z[None])[0]), x.copy(), h)
            scale = max(1.0, float(np.abs(gs).max()))
            err = float(np.abs(gs - fd).max()) / scale
            worst_fd = max(worst_fd, err)
            grad_ok &= err <= 1e-5
            gb = g.barrier.grad(x[None])[0]
            fdb = _fd_gradient(lambda z: float(g.barrier.value(z[None])[0]), x.copy(), h)
            barrier_grad_ok &= float(np.abs(gb - fdb).max()) / max(1.0, float(np.abs(gb).max())) <= 1e-5
            Hs = g.smooth.hess(x[None])[0]
            hess_ok &= float(np.abs(Hs - Hs.T).max()) <= 1e-10 * max(1.0, float(np.abs(Hs).max()))
            hess_ok &= float(np.linalg.eigvalsh(0.5 * (Hs + Hs.T))[0]) >= -1e-10 * max(
                1.0, float(np.abs(Hs).max())
            )
            # barrier decrement bound: ||f'(x)||_*^2 <= nu at interior points
            Hb = g.barrier.hess(x[None])[0]
            lam2 = float(gb @ np.linalg.solve(Hb, gb))
            decr_ok &= lam2 <= g.barrier.nu_block + 1e-9
    report.add("smooth_gradient_fd", grad_ok, f"worst rel err {worst_fd:.2e}")
    report.add("barrier_gradient_fd", barrier_grad_ok)
    report.add("smooth_hessian_psd", hess_ok)
    report.add("barrier_decrement_bound", decr_ok)

    # barrier blow-up along 1-D rays toward the boundary
    blowup_ok = True
    for g, X0 in zip(instance.groups, mid.parts):
        b = int(rng.integers(g.count))
        j = int(rng.integers(g.dim))
        x = X0[b].copy()
        direction = np.zeros_like(x)
        direction[j] = 1.0
        # bisect to the boundary along +e_j
        step_hi = 1.0
        while g.barrier.in_domain((x + step_hi * direction)[None])[0]:
            step_hi *= 2.0
            if step_hi > 1e12:
                break
        else:
            f_start = float(g.barrier.value(x[None])[0])
            lo, hi = 0.0, step_hi
            for _ in range(80):
                midp = 0.5 * (lo + hi)
                if g.barrier.in_domain((x + midp * direction)[None])[0]:
                    lo = midp
                else:
                    hi = midp
            probe = x + lo * (1.0 - 1e-10) * direction
            f_end = float(g.barrier.value(probe[None])[0])
            blowup_ok &= f_end > f_start + 10.0
    report.add("barrier_boundary_blowup", blowup_ok)

    # membership rejects boundary points
    edge = mid.copy_parts()
    g0 = instance.groups[0]
    if isinstance(getattr(g0.barrier, "lower", None), np.ndarray):
        edge[0][0, 0] = g0.barrier.lower[0, 0]
        report.add("membership_rejects_boundary", not instance.is_interior(edge))

    # composite prox is consistent with projecting onto the underlying set
    comp = instance.composite
    try:
        proj = comp.project(rng.standard_normal(instance.n))
    except NotImplementedError:
        proj = None
    if proj is not None:
        ok = True
        for _ in range(5):
            w = rng.standard_normal(instance.n)
            s = float(10.0 ** rng.uniform(-2, 2))
            ok &= float(np.abs(comp.prox(w, s) - (w + s * comp.project(-w / s))).max()) <= 1e-10
        report.add("composite_prox_projection_consistency", ok)

    return report
