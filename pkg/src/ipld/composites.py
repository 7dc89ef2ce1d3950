"""Composite-term machinery for the coupling constraint.

The dual problem carries the term hbar(y) = phi*(-y), the Fenchel conjugate
of the primal composite phi evaluated at -y. Every composite shipped here is
the indicator of a closed convex set C, so hbar is the support function of
-C. Its Euclidean proximal map has the closed form

    prox_{s*hbar}(w) = w + s * proj_C(-w / s),

which is the only hook the master-problem solver needs besides values.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "CompositeTerm",
    "BoxWindowComposite",
    "UpperBoundComposite",
    "PointComposite",
    "ZeroComposite",
]

_DOMAIN_TOL = 1e-12


class CompositeTerm:
    """Conjugate-side interface of the primal composite term phi."""

    #: discriminator the master step uses to pick closed-form branches
    kind: str = "generic"

    def __init__(self, n: int):
        self.n = int(n)

    def conj_value(self, y: np.ndarray) -> float:
        """hbar(y) = phi*(-y); may be +inf outside the conjugate domain."""
        raise NotImplementedError

    def prox(self, w: np.ndarray, s: float) -> np.ndarray:
        """Euclidean proximal map of s * hbar at w."""
        raise NotImplementedError

    def project(self, w: np.ndarray) -> np.ndarray:
        """Projection onto the underlying set C of phi = indicator(C)."""
        raise NotImplementedError

    def constraint_violation(self, w: np.ndarray) -> float:
        """Max-norm distance of w from C; zero iff the coupling is feasible."""
        return float(np.max(np.abs(w - self.project(w)), initial=0.0))


class BoxWindowComposite(CompositeTerm):
    """phi = indicator of the window [lower, upper] (componentwise)."""

    kind = "box"

    def __init__(self, lower, upper):
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        upper = np.atleast_1d(np.asarray(upper, dtype=float))
        if lower.shape != upper.shape or np.any(lower > upper):
            raise ValueError("box window needs lower <= upper of equal shape")
        super().__init__(lower.size)
        self.lower = lower
        self.upper = upper

    def conj_value(self, y):
        y = np.asarray(y, dtype=float)
        # sup_{L<=u<=U} (-y)^T u, picked componentwise by the sign of y
        return float(np.sum(np.where(y >= 0.0, -self.lower * y, -self.upper * y)))

    def prox(self, w, s):
        return w + s * np.minimum(np.maximum(-w / s, self.lower), self.upper)

    def project(self, w):
        return np.minimum(np.maximum(w, self.lower), self.upper)


class UpperBoundComposite(CompositeTerm):
    """phi = indicator of {w : w <= b} (componentwise upper bound)."""

    kind = "upper"

    def __init__(self, bound):
        bound = np.atleast_1d(np.asarray(bound, dtype=float))
        super().__init__(bound.size)
        self.bound = bound

    def conj_value(self, y):
        y = np.asarray(y, dtype=float)
        if np.any(y > _DOMAIN_TOL):
            return float("inf")
        return float(-self.bound @ y)

    def prox(self, w, s):
        return np.minimum(w + s * self.bound, 0.0)

    def project(self, w):
        return np.minimum(w, self.bound)


class PointComposite(CompositeTerm):
    """phi = indicator of the single point {b}; the conjugate side is linear."""

    kind = "point"

    def __init__(self, target):
        target = np.atleast_1d(np.asarray(target, dtype=float))
        super().__init__(target.size)
        self.target = target

    def conj_value(self, y):
        return float(-self.target @ np.asarray(y, dtype=float))

    def prox(self, w, s):
        return w + s * self.target

    def project(self, w):
        return np.broadcast_to(self.target, np.shape(w)).copy()


class ZeroComposite(CompositeTerm):
    """hbar identically zero; degenerate case used by tests only."""

    kind = "zero"

    def conj_value(self, y):
        return 0.0

    def prox(self, w, s):
        return np.asarray(w, dtype=float).copy()

    def project(self, w):
        return np.asarray(w, dtype=float).copy()

    def constraint_violation(self, w):
        return 0.0
