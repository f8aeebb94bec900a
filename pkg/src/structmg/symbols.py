"""Generating functions as even cosine polynomials.

A level operator in any of the supported algebras is defined by a generating
function f(t) = c_0 + sum_{j>=1} 2 c_j cos(j t), stored as the coefficient
list (c_0, ..., c_k).  Two-dimensional symbols are separable: either a sum
f1(t1) + f2(t2) (differential operators) or a product f1(t1) * f2(t2)
(projectors).
"""
from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

__all__ = [
    "CosinePoly",
    "Symbol",
    "laplacian_poly",
    "projector_poly",
    "laplacian_symbol",
    "projector_symbol",
]

_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def _golden_max(f, a, b, tol=1e-12):
    """Golden-section search for the maximum of f on [a, b]."""
    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    f1, f2 = f(x1), f(x2)
    while b - a > tol:
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + _GOLDEN * (b - a)
            f2 = f(x2)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - _GOLDEN * (b - a)
            f1 = f(x1)
    return max(f1, f2)


@dataclass(frozen=True)
class CosinePoly:
    """Even trigonometric polynomial c_0 + sum_j 2 c_j cos(j t)."""

    coeffs: tuple

    def __init__(self, coeffs):
        coeffs = tuple(float(c) for c in coeffs)
        if len(coeffs) == 0:
            raise ValueError("coefficient list must be nonempty")
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        v = np.full_like(t, self.coeffs[0], dtype=float)
        for j in range(1, len(self.coeffs)):
            v = v + 2.0 * self.coeffs[j] * np.cos(j * t)
        return v[()] if v.ndim == 0 else v

    def __mul__(self, other: "CosinePoly") -> "CosinePoly":
        # convolve in the two-sided Fourier basis, then fold back
        a = np.zeros(2 * self.degree + 1)
        b = np.zeros(2 * other.degree + 1)
        a[self.degree] = self.coeffs[0]
        b[other.degree] = other.coeffs[0]
        for j in range(1, self.degree + 1):
            a[self.degree + j] = a[self.degree - j] = self.coeffs[j]
        for j in range(1, other.degree + 1):
            b[other.degree + j] = b[other.degree - j] = other.coeffs[j]
        full = np.convolve(a, b)
        mid = self.degree + other.degree
        return CosinePoly(full[mid:])

    def extrema(self, tol=1e-12):
        """(min, max) over [0, pi] by dense sampling plus golden refinement."""
        t = np.linspace(0.0, np.pi, 2049)
        v = self(t)
        out = []
        for sign in (1.0, -1.0):
            i = int(np.argmax(sign * v))
            a = t[max(i - 1, 0)]
            b = t[min(i + 1, len(t) - 1)]
            best = _golden_max(lambda x: sign * self(x), a, b, tol=tol)
            out.append(sign * max(best, sign * v[i]))
        return out[1], out[0]

    def sup_norm(self) -> float:
        lo, hi = self.extrema()
        return max(abs(lo), abs(hi))


def laplacian_poly(q: int) -> CosinePoly:
    """(2 - 2 cos t)^q, coefficients (-1)^j C(2q, q-j)."""
    if q < 1:
        raise ValueError("order q must be >= 1")
    return CosinePoly([(-1) ** j * comb(2 * q, q - j) for j in range(q + 1)])


def projector_poly(w: int) -> CosinePoly:
    """(2 + 2 cos t)^w, coefficients C(2w, w-j)."""
    if w < 1:
        raise ValueError("projector exponent w must be >= 1")
    return CosinePoly([comb(2 * w, w - j) for j in range(w + 1)])


@dataclass(frozen=True)
class Symbol:
    """Separable d-variate symbol: sum or product of per-axis cosine polynomials."""

    dimension: int
    mode: str  # 'sum' | 'product'
    factors: tuple

    def __init__(self, dimension, mode, factors):
        factors = tuple(factors)
        if dimension not in (1, 2):
            raise ValueError("dimension must be 1 or 2")
        if mode not in ("sum", "product"):
            raise ValueError("mode must be 'sum' or 'product'")
        if len(factors) != dimension:
            raise ValueError("need one factor per dimension")
        object.__setattr__(self, "dimension", dimension)
        object.__setattr__(self, "mode", mode)
        object.__setattr__(self, "factors", factors)

    def __call__(self, *t):
        if len(t) == 1 and self.dimension == 2:
            t = tuple(t[0])
        if len(t) != self.dimension:
            raise ValueError("wrong number of coordinates")
        vals = [f(np.asarray(ti, dtype=float)) for f, ti in zip(self.factors, t)]
        if self.mode == "sum":
            return sum(vals)
        out = vals[0]
        for v in vals[1:]:
            out = out * v
        return out

    def sup_norm(self) -> float:
        """Sup of |f| over [0, pi]^d, exact for separable symbols."""
        ext = [f.extrema() for f in self.factors]
        if self.mode == "sum":
            lo = sum(e[0] for e in ext)
            hi = sum(e[1] for e in ext)
        else:
            cands = [a * b for a in ext[0] for b in ext[1]] if self.dimension == 2 else list(ext[0])
            lo, hi = min(cands), max(cands)
        return max(abs(lo), abs(hi))

    def coeff_array(self) -> np.ndarray:
        """Cosine coefficients c[j] (1D) or c[j, k] (2D) of the full symbol.

        Convention: f = sum_{j,k} c[j,k] e_j(t1) e_k(t2) with e_0 = 1 and
        e_j = 2 cos(j t) for j >= 1.
        """
        if self.dimension == 1:
            return np.asarray(self.factors[0].coeffs, dtype=float)
        a = np.asarray(self.factors[0].coeffs, dtype=float)
        b = np.asarray(self.factors[1].coeffs, dtype=float)
        if self.mode == "product":
            return np.outer(a, b)
        c = np.zeros((len(a), len(b)))
        c[:, 0] += a
        c[0, :] += b
        return c


def laplacian_symbol(d: int, q: int) -> Symbol:
    """Symbol of the 2q-order constant-coefficient operator, sum over axes."""
    if d not in (1, 2):
        raise ValueError("dimension must be 1 or 2")
    if q not in (1, 2, 3):
        raise ValueError("order q must be in {1, 2, 3}")
    return Symbol(d, "sum", tuple(laplacian_poly(q) for _ in range(d)))


def projector_symbol(d: int, w: int) -> Symbol:
    """Prolongation symbol, product over axes of (2 + 2 cos t)^w."""
    if d not in (1, 2):
        raise ValueError("dimension must be 1 or 2")
    if w < 1:
        raise ValueError("projector exponent w must be >= 1")
    return Symbol(d, "product", tuple(projector_poly(w) for _ in range(d)))
