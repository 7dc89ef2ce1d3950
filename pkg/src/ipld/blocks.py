"""Vectorized oracle families for the separable blocks.

A family bundles B blocks of a common dimension q and evaluates value,
gradient, and Hessian on (B, q) stacks in one shot, so the per-block Python
overhead is paid once per family instead of once per block. Heterogeneous
problems use one family per distinct block shape.
"""

from __future__ import annotations

import math

import numpy as np

from .scalars import GscParams

__all__ = [
    "SmoothFamily",
    "QuadraticFamily",
    "CallbackBlock",
    "BarrierFamily",
    "BoxBarrierFamily",
    "HalfIntervalBarrierFamily",
]


def _as_stack(arr, count, dim):
    out = np.broadcast_to(np.asarray(arr, dtype=float), (count, dim)).copy()
    return out


class SmoothFamily:
    """B smooth convex blocks of dimension q evaluated on (B, q) stacks."""

    def __init__(self, count: int, dim: int, sc_params: GscParams | None = None):
        self.count = int(count)
        self.dim = int(dim)
        self.sc_params = sc_params if sc_params is not None else GscParams(2.0, 3.0)

    def value(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def grad(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def hess(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def in_domain(self, X: np.ndarray) -> np.ndarray:
        return np.ones(X.shape[0], dtype=bool)


class QuadraticFamily(SmoothFamily):
    """Blocks 0.5 * (x - center)^T W (x - center) with shared or per-block W."""

    def __init__(self, weight, center, count: int | None = None):
        center = np.atleast_2d(np.asarray(center, dtype=float))
        count = center.shape[0] if count is None else count
        dim = center.shape[1]
        super().__init__(count, dim, GscParams(0.0, 3.0))
        weight = np.asarray(weight, dtype=float)
        if weight.ndim == 2:
            weight = np.broadcast_to(weight, (count, dim, dim))
        self.weight = np.array(weight, dtype=float)
        self.center = _as_stack(center, count, dim)

    def value(self, X):
        d = X - self.center
        wd = np.matmul(self.weight, d[..., None])[..., 0]
        return 0.5 * (d * wd).sum(axis=1)

    def grad(self, X):
        return np.matmul(self.weight, (X - self.center)[..., None])[..., 0]

    def hess(self, X):
        return np.broadcast_to(self.weight, (X.shape[0], self.dim, self.dim)).copy()


class CallbackBlock(SmoothFamily):
    """Single block wrapping plain per-point Python oracles.

    ``f``, ``g``, ``h`` act on a 1-D point of length ``dim``; ``domain`` is an
    optional membership predicate. Useful for tests and one-off blocks.
    """

    def __init__(self, dim, f, g, h, domain=None, sc_params=None):
        super().__init__(1, dim, sc_params)
        self._f, self._g, self._h = f, g, h
        self._domain = domain

    def value(self, X):
        return np.array([float(self._f(x)) for x in X])

    def grad(self, X):
        return np.stack([np.asarray(self._g(x), dtype=float) for x in X])

    def hess(self, X):
        return np.stack([np.asarray(self._h(x), dtype=float) for x in X])

    def in_domain(self, X):
        if self._domain is None:
            return np.ones(X.shape[0], dtype=bool)
        return np.array([bool(self._domain(x)) for x in X])


class BarrierFamily:
    """B barrier blocks of dimension q for the sets K_i, on (B, q) stacks."""

    def __init__(self, count: int, dim: int, nu_block: float):
        self.count = int(count)
        self.dim = int(dim)
        #: barrier parameter of each block's barrier
        self.nu_block = float(nu_block)

    @property
    def rho(self) -> float:
        """nu + 2*sqrt(nu); radius bound around the analytic center (unused
        by the algorithm, kept as metadata)."""
        return self.nu_block + 2.0 * math.sqrt(self.nu_block)

    def value(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def grad(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def hess(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def in_domain(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def midpoint(self) -> np.ndarray:
        """A strictly interior (B, q) stack, used as the cold-start point."""
        raise NotImplementedError

    def violation(self, X: np.ndarray) -> np.ndarray:
        """Per-block max-norm distance of X from K (0 inside)."""
        raise NotImplementedError

    def _diag_hess(self, d):
        out = np.zeros((d.shape[0], self.dim, self.dim))
        idx = np.arange(self.dim)
        out[:, idx, idx] = d
        return out


class BoxBarrierFamily(BarrierFamily):
    """-sum ln(x - l) - sum ln(u - x) on the boxes [l, u]; nu = 2 per coord."""

    def __init__(self, lower, upper, count: int, dim: int):
        super().__init__(count, dim, 2.0 * dim)
        self.lower = _as_stack(lower, count, dim)
        self.upper = _as_stack(upper, count, dim)
        if np.any(self.lower >= self.upper):
            raise ValueError("box barrier needs lower < upper")

    def value(self, X):
        return -(np.log(X - self.lower).sum(axis=1) + np.log(self.upper - X).sum(axis=1))

    def grad(self, X):
        return -1.0 / (X - self.lower) + 1.0 / (self.upper - X)

    def hess(self, X):
        d = 1.0 / (X - self.lower) ** 2 + 1.0 / (self.upper - X) ** 2
        return self._diag_hess(d)

    def in_domain(self, X):
        return np.all((X > self.lower) & (X < self.upper), axis=1)

    def midpoint(self):
        return 0.5 * (self.lower + self.upper)

    def violation(self, X):
        v = np.maximum(self.lower - X, X - self.upper)
        return np.maximum(v, 0.0).max(axis=1)


class HalfIntervalBarrierFamily(BarrierFamily):
    """Single-sided log barrier, -ln(x - l) or -ln(u - x); nu = 1 per coord."""

    def __init__(self, bound, count: int, dim: int, side: str = "lower"):
        if side not in ("lower", "upper"):
            raise ValueError(f"side must be 'lower' or 'upper', got {side!r}")
        super().__init__(count, dim, float(dim))
        self.side = side
        self.bound = _as_stack(bound, count, dim)

    def _slack(self, X):
        return X - self.bound if self.side == "lower" else self.bound - X

    def value(self, X):
        return -np.log(self._slack(X)).sum(axis=1)

    def grad(self, X):
        s = 1.0 / self._slack(X)
        return -s if self.side == "lower" else s

    def hess(self, X):
        return self._diag_hess(1.0 / self._slack(X) ** 2)

    def in_domain(self, X):
        return np.all(self._slack(X) > 0.0, axis=1)

    def midpoint(self):
        off = 1.0 if self.side == "lower" else -1.0
        return self.bound + off

    def violation(self, X):
        return np.maximum(-self._slack(X), 0.0).max(axis=1)
