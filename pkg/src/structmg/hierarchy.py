"""Level hierarchy: cutting operators, prolongations, Galerkin coarsening.

The coarse operator is always the exact sparse triple product p^T B p.  Its
structured/banded split is recovered afterwards: the translation-invariant
stencil is read off an interior row of the coarsened structured part, the
matching algebra matrix is rebuilt from it, and whatever the algebra boundary
closure does not reproduce is absorbed into the banded correction.  The sum
of the two parts therefore equals the triple product entrywise.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .operators import (
    DENSE_CAP,
    Algebra,
    GridShape,
    LevelOperator,
    SizeCapError,
    _assemble_banded,
    assemble_structured,
)
from .solvers import SmootherConfig, level_smoother_params
from .symbols import Symbol

__all__ = [
    "CuttingError",
    "NotPositiveDefiniteError",
    "Prolongation",
    "HierarchyLevel",
    "LevelHierarchy",
    "build_prolongation",
    "check_order_relation",
    "cutting_matrix",
    "default_coarsest_cap",
    "galerkin_coarsen",
    "build_hierarchy",
]


class CuttingError(ValueError):
    """Grid size incompatible with the algebra's coarsening parity rule."""


class NotPositiveDefiniteError(ValueError):
    """A matrix required to be positive definite is not."""


def cutting_matrix(alg: Algebra, n0: int):
    """Sparse selection operator T (n0 x n1) and the coarse size n1."""
    try:
        alg.check_axis(n0)
    except ValueError as e:
        raise CuttingError(str(e)) from None
    n1 = alg.coarse_axis(n0)
    if n1 < 1:
        raise CuttingError(f"axis size {n0} cannot be coarsened")
    if alg is Algebra.TAU:
        rows = 2 * np.arange(1, n1 + 1) - 1  # picks indices 2j (1-based)
        cols = np.arange(n1)
        data = np.ones(n1)
    elif alg is Algebra.CIRCULANT:
        rows = 2 * np.arange(n1)  # picks indices 2j-1 (1-based)
        cols = np.arange(n1)
        data = np.ones(n1)
    else:  # DCT-III picks the pair {2j-1, 2j}
        rows = np.empty(2 * n1, dtype=int)
        rows[0::2] = 2 * np.arange(n1)
        rows[1::2] = 2 * np.arange(n1) + 1
        cols = np.repeat(np.arange(n1), 2)
        data = np.ones(2 * n1)
    T = sp.csr_matrix((data, (rows, cols)), shape=(n0, n1))
    return T, n1


@dataclass
class Prolongation:
    """Full-rank sparse map from the coarse grid into the fine grid."""

    matrix: sp.csr_matrix
    algebra: Algebra
    fine_shape: GridShape
    coarse_shape: GridShape

    @property
    def T(self) -> sp.csr_matrix:
        return self.matrix.T.tocsr()

    def restrict(self, r: np.ndarray) -> np.ndarray:
        return self.matrix.T @ r

    def prolong(self, y: np.ndarray) -> np.ndarray:
        return self.matrix @ y


def build_prolongation(alg: Algebra, fine_shape: GridShape, psym: Symbol) -> Prolongation:
    """p = scale * P T per axis, tensor product across axes.

    P is the algebra matrix of the projector symbol; the tau variant carries
    the 1/sqrt(2) normalization that keeps its Galerkin second-difference
    stencil fixed across levels.
    """
    if psym.dimension != fine_shape.d:
        raise ValueError("projector symbol dimension mismatch")
    scale = 1.0 / np.sqrt(2.0) if alg is Algebra.TAU else 1.0
    axes = []
    coarse_ns = []
    for n, poly in zip(fine_shape.ns, psym.factors):
        T, n1 = cutting_matrix(alg, n)
        P = _assemble_banded(alg, GridShape((n,)), np.asarray(poly.coeffs))
        axes.append((scale * (P @ T)).tocsr())
        coarse_ns.append(n1)
    mat = axes[0] if fine_shape.d == 1 else sp.kron(axes[0], axes[1], format="csr")
    return Prolongation(mat, alg, fine_shape, GridShape(tuple(coarse_ns)))


def _read_interior_stencil(S: sp.csr_matrix, shape: GridShape) -> np.ndarray:
    """Translation-invariant stencil from the middle row, symmetrized per axis."""
    S = S.tocsr()
    if shape.d == 1:
        (n,) = shape.ns
        mid = n // 2
        row = S.getrow(mid)
        width = 0
        for c in row.indices:
            width = max(width, abs(int(c) - mid))
        width = min(width, mid)
        out = np.zeros(width + 1)
        for k in range(width + 1):
            lo = S[mid, mid - k] if mid - k >= 0 else 0.0
            hi = S[mid, mid + k] if mid + k < n else 0.0
            out[k] = 0.5 * (lo + hi) if k else S[mid, mid]
        return _trim(out)
    n1, n2 = shape.ns
    m1, m2 = n1 // 2, n2 // 2
    mid = m1 * n2 + m2
    row = S.getrow(mid)
    w1 = w2 = 0
    for c in row.indices:
        k1, k2 = divmod(int(c), n2)
        w1 = max(w1, abs(k1 - m1))
        w2 = max(w2, abs(k2 - m2))
    w1, w2 = min(w1, m1), min(w2, m2)
    out = np.zeros((w1 + 1, w2 + 1))
    for k1 in range(w1 + 1):
        for k2 in range(w2 + 1):
            vals = []
            for s1 in ((1,) if k1 == 0 else (1, -1)):
                for s2 in ((1,) if k2 == 0 else (1, -1)):
                    i1, i2 = m1 + s1 * k1, m2 + s2 * k2
                    if 0 <= i1 < n1 and 0 <= i2 < n2:
                        vals.append(S[mid, i1 * n2 + i2])
            out[k1, k2] = float(np.mean(vals)) if vals else 0.0
    return _trim2(out)


def _trim(c: np.ndarray) -> np.ndarray:
    tol = 1e-14 * max(np.abs(c).max(), 1.0)
    k = len(c)
    while k > 1 and abs(c[k - 1]) <= tol:
        k -= 1
    return c[:k].copy()


def _trim2(c: np.ndarray) -> np.ndarray:
    tol = 1e-14 * max(np.abs(c).max(), 1.0)
    r = c.shape[0]
    while r > 1 and np.abs(c[r - 1, :]).max() <= tol:
        r -= 1
    s = c.shape[1]
    while s > 1 and np.abs(c[:r, s - 1]).max() <= tol:
        s -= 1
    return c[:r, :s].copy()


def _prune(M: sp.csr_matrix) -> sp.csr_matrix:
    M = M.tocsr()
    M.eliminate_zeros()
    if M.nnz:
        tol = 1e-15 * max(np.abs(M.data).max(), 1.0)
        M.data[np.abs(M.data) <= tol] = 0.0
        M.eliminate_zeros()
    return M


def galerkin_coarsen(op: LevelOperator, p: Prolongation) -> LevelOperator:
    """Exact coarse operator p^T B p, re-split into structured + correction."""
    if p.fine_shape.ns != op.shape.ns:
        raise ValueError("prolongation does not match the operator's grid")
    pm = p.matrix
    Sc = (pm.T @ op.structured @ pm).tocsr()
    stencil = _read_interior_stencil(Sc, p.coarse_shape)
    structured = _assemble_banded(op.algebra, p.coarse_shape, stencil)
    deviation = _prune(Sc - structured)
    corr = _prune((pm.T @ op.correction @ pm).tocsr() + deviation)
    v = pm.T @ op.strang if op.strang is not None else None
    return LevelOperator(op.algebra, p.coarse_shape, stencil, structured, corr, v)


@dataclass
class HierarchyLevel:
    op: LevelOperator
    prolongation: Prolongation | None
    smoother: SmootherConfig
    gs_lower: sp.csr_matrix | None = None


class LevelHierarchy:
    """Precomputed chain of operators, prolongations and smoother settings."""

    def __init__(self, levels, mode: str, dense_cap: int = DENSE_CAP):
        if mode not in ("tgm", "mgm"):
            raise ValueError("mode must be 'tgm' or 'mgm'")
        self.levels = levels
        self.mode = mode
        self._factorize_coarsest(dense_cap)

    @property
    def finest(self) -> LevelOperator:
        return self.levels[0].op

    @property
    def nlevels(self) -> int:
        return len(self.levels)

    def _factorize_coarsest(self, dense_cap: int) -> None:
        op = self.levels[-1].op
        self._cho = self._lu = None
        if op.N <= dense_cap:
            try:
                self._cho = sla.cho_factor(op.to_dense(cap=dense_cap))
            except sla.LinAlgError as e:
                raise NotPositiveDefiniteError(
                    f"coarsest operator (N={op.N}) is not positive definite"
                ) from e
        else:
            A = op.assembled().tocsc()
            if op.strang is None:
                self._lu = spla.splu(A)
            else:
                # bordered system [[A, v], [v^T, -1]] solves (A + v v^T) x = b
                v = sp.csc_matrix(op.strang[:, None])
                B = sp.bmat([[A, v], [v.T, sp.csc_matrix([[-1.0]])]], format="csc")
                self._lu = spla.splu(B)
                self._bordered = True

    def coarse_solve(self, b: np.ndarray) -> np.ndarray:
        if self._cho is not None:
            return sla.cho_solve(self._cho, b)
        if getattr(self, "_bordered", False):
            rhs = np.concatenate([b, [0.0]])
            return self._lu.solve(rhs)[:-1]
        return self._lu.solve(b)


def default_coarsest_cap(d: int) -> int:
    return 16 ** d


def build_hierarchy(
    fine_op: LevelOperator,
    psym: Symbol,
    coarsest_cap: int | None = None,
    mode: str = "mgm",
    *,
    rho: int = 0,
    rho_post_only: bool = False,
    nu_pre: int = 1,
    nu_post: int = 1,
    smoother_kind: str = "richardson",
    omega_variant: str = "benchmark",
    omega_strategy: str = "level",
    fine_symbol: Symbol | None = None,
    dense_cap: int = DENSE_CAP,
) -> LevelHierarchy:
    """Coarsen down to the cap, computing smoother parameters per level.

    ``omega_variant`` selects the damping pair: 'benchmark' uses
    (1/M, 2/M) for (pre, post), 'theory' the conservative (1/(2M), 1/M).
    ``omega_strategy`` 'level' recomputes the spectral bound M on every level;
    'finest' reuses the finest-level value throughout.
    """
    if mode not in ("tgm", "mgm"):
        raise ValueError("mode must be 'tgm' or 'mgm'")
    cap = default_coarsest_cap(fine_op.shape.d) if coarsest_cap is None else coarsest_cap
    levels = []
    op = fine_op
    s = 0
    M0 = None
    while True:
        if s == 0 or omega_strategy == "finest":
            if M0 is None:
                M0 = level_smoother_params(
                    op, sym=fine_symbol, variant=omega_variant, kind=smoother_kind
                ).bound
            bound = M0
        else:
            bound = op.spectral_bound(sharp=True)
        k_pre = nu_pre if (rho_post_only or nu_pre == 0) else nu_pre + s * rho
        k_post = nu_post + s * rho
        cfg = level_smoother_params(
            op, bound=bound, variant=omega_variant, kind=smoother_kind,
            nu_pre=k_pre, nu_post=k_post,
        )
        done = (mode == "tgm" and s == 1) or (mode == "mgm" and op.N <= cap)
        if done:
            levels.append(HierarchyLevel(op, None, cfg))
            break
        if not all(fine_op.algebra.can_coarsen(n) for n in op.shape.ns):
            raise CuttingError(
                f"size ladder breaks the parity rule at level {s} (shape {op.shape.ns}) "
                f"before reaching the coarsest cap {cap}"
            )
        p = build_prolongation(op.algebra, op.shape, psym)
        lvl = HierarchyLevel(op, p, cfg)
        if smoother_kind == "gs-post":
            if op.strang is not None:
                raise ValueError("Gauss-Seidel smoothing not supported with a rank-one term")
            lvl.gs_lower = sp.tril(op.assembled(), format="csr")
        levels.append(lvl)
        op = galerkin_coarsen(op, p)
        s += 1
    return LevelHierarchy(levels, mode, dense_cap=dense_cap)


def check_order_relation(a_op: LevelOperator, b_op: LevelOperator, cap: int = DENSE_CAP) -> float:
    """Smallest theta with A <= theta * B, as the top generalized eigenvalue."""
    if a_op.shape.ns != b_op.shape.ns:
        raise ValueError("operators live on different grids")
    A = a_op.to_dense(cap=cap)
    B = b_op.to_dense(cap=cap)
    try:
        w = sla.eigh(A, B, eigvals_only=True)
    except sla.LinAlgError as e:
        raise NotPositiveDefiniteError("order relation needs positive definite B") from e
    return float(w[-1])
