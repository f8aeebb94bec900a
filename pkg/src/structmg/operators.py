"""Level operators for the tau, circulant and DCT-III matrix algebras.

Each algebra matrix is assembled directly from the cosine coefficients of its
generating function.  With 1-based indices r, s and coefficients c_m (c_m = 0
beyond the degree), the entries of the basis matrix for e_j = 2 cos(j t) are

    tau:       [K_j]_{rs} = [|r-s| = j] - [r+s = j] - [r+s = 2(n+1)-j]
    circulant: [K_j]_{rs} = [r-s = j mod n] + [r-s = -j mod n]
    DCT-III:   [K_j]_{rs} = [|r-s| = j] + [r+s-1 = j] + [r+s-1 = 2n-j]

so that K_j = Q diag(e_j(grid)) Q^T with the algebra's orthogonal (unitary)
transform Q and its eigenvalue grid.  Two-level matrices are Kronecker sums of
the per-axis basis matrices.  The banded form is what the solver uses; the
transform form is kept as a dense oracle for tests and small experiments.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .symbols import Symbol

__all__ = [
    "Algebra",
    "GridShape",
    "LevelOperator",
    "SizeCapError",
    "assemble_structured",
    "basis_matrix",
    "dense_from_transform",
    "eigen_grid",
    "make_operator",
    "min_eig_formula_tau_1d",
    "stencil_sup_norm",
    "strang_vector",
    "transform_matrix",
]

DENSE_CAP = 4096


class SizeCapError(ValueError):
    """Operation requested on a problem too large for its dense code path."""


class Algebra(enum.Enum):
    TAU = "tau"
    CIRCULANT = "circ"
    DCT3 = "dct3"

    def check_axis(self, n: int) -> None:
        if self is Algebra.TAU:
            if n < 3 or n % 2 == 0:
                raise ValueError(f"tau algebra needs odd axis size >= 3, got {n}")
        else:
            if n < 2 or n % 2 == 1:
                raise ValueError(f"{self.value} algebra needs even axis size >= 2, got {n}")

    def coarse_axis(self, n: int) -> int:
        self.check_axis(n)
        return (n - 1) // 2 if self is Algebra.TAU else n // 2

    def can_coarsen(self, n: int) -> bool:
        try:
            self.check_axis(n)
        except ValueError:
            return False
        return self.coarse_axis(n) >= 1


@dataclass(frozen=True)
class GridShape:
    """Per-axis sizes of a 1D or 2D grid."""

    ns: tuple

    def __init__(self, ns):
        ns = tuple(int(n) for n in (ns if np.iterable(ns) else (ns,)))
        if len(ns) not in (1, 2) or any(n < 1 for n in ns):
            raise ValueError(f"invalid grid shape {ns}")
        object.__setattr__(self, "ns", ns)

    @property
    def d(self) -> int:
        return len(self.ns)

    @property
    def N(self) -> int:
        return int(np.prod(self.ns))


def basis_matrix(alg: Algebra, n: int, j: int) -> sp.csr_matrix:
    """Algebra matrix of e_j (identity for j = 0) at size n."""
    if j == 0:
        return sp.identity(n, format="csr")
    if j >= n:
        raise ValueError(f"basis frequency {j} too large for size {n}")
    rows, cols, vals = [], [], []

    def add(r, s, v):  # 1-based
        if 1 <= r <= n and 1 <= s <= n:
            rows.append(r - 1)
            cols.append(s - 1)
            vals.append(v)

    if alg is Algebra.CIRCULANT:
        for r in range(1, n + 1):
            for off in {j % n, (-j) % n}:
                add(r, (r - 1 - off) % n + 1, 1.0)
    else:
        for r in range(1, n + 1):
            add(r, r - j, 1.0)
            add(r, r + j, 1.0)
        if alg is Algebra.TAU:
            for r in range(1, j):
                add(r, j - r, -1.0)
            for r in range(n - j + 1, n + 1):
                add(r, 2 * (n + 1) - j - r, -1.0)
        else:  # DCT-III
            for r in range(1, j + 1):
                add(r, j + 1 - r, 1.0)
            for r in range(n - j + 1, n + 1):
                add(r, 2 * n + 1 - j - r, 1.0)
    M = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    M.sum_duplicates()
    return M


def _assemble_banded(alg: Algebra, shape: GridShape, coeffs: np.ndarray) -> sp.csr_matrix:
    coeffs = np.atleast_1d(np.asarray(coeffs, dtype=float))
    if shape.d == 1:
        (n,) = shape.ns
        if coeffs.ndim != 1:
            raise ValueError("1D shape needs a 1D coefficient array")
        if len(coeffs) - 1 >= n:
            raise ValueError(f"stencil halfwidth {len(coeffs)-1} >= axis size {n}")
        A = sp.csr_matrix((n, n))
        for j, c in enumerate(coeffs):
            if c != 0.0:
                A = A + c * basis_matrix(alg, n, j)
        return A.tocsr()
    n1, n2 = shape.ns
    coeffs = np.atleast_2d(coeffs)
    if coeffs.shape[0] - 1 >= n1 or coeffs.shape[1] - 1 >= n2:
        raise ValueError("stencil halfwidth exceeds an axis size")
    A = sp.csr_matrix((shape.N, shape.N))
    for j in range(coeffs.shape[0]):
        Kj = None
        for k in range(coeffs.shape[1]):
            c = coeffs[j, k]
            if c == 0.0:
                continue
            if Kj is None:
                Kj = basis_matrix(alg, n1, j)
            A = A + c * sp.kron(Kj, basis_matrix(alg, n2, k), format="csr")
    return A.tocsr()


def eigen_grid(alg: Algebra, n: int) -> np.ndarray:
    """Sampling points whose f-values are the algebra matrix eigenvalues."""
    if alg is Algebra.TAU:
        return np.arange(1, n + 1) * np.pi / (n + 1)
    if alg is Algebra.CIRCULANT:
        return 2.0 * np.pi * np.arange(n) / n
    return np.arange(n) * np.pi / n


def transform_matrix(alg: Algebra, n: int) -> np.ndarray:
    """Dense diagonalizing transform (orthogonal; unitary for circulant)."""
    i = np.arange(1, n + 1)
    if alg is Algebra.TAU:
        return np.sqrt(2.0 / (n + 1)) * np.sin(np.outer(i, i) * np.pi / (n + 1))
    if alg is Algebra.CIRCULANT:
        k = np.arange(n)
        return np.exp(2j * np.pi * np.outer(k, k) / n) / np.sqrt(n)
    eta = np.ones(n)
    eta[0] = 1.0 / np.sqrt(2.0)
    return np.sqrt(2.0 / n) * eta[None, :] * np.cos(
        np.outer(2 * i - 1, np.arange(n)) * np.pi / (2 * n)
    )


def dense_from_transform(alg: Algebra, shape: GridShape, sym, cap: int = DENSE_CAP) -> np.ndarray:
    """Dense algebra matrix built from the diagonalizing transform (test oracle)."""
    if shape.N > cap:
        raise SizeCapError(f"transform oracle capped at {cap}, got N={shape.N}")

    def one_axis(n, poly):
        Q = transform_matrix(alg, n)
        lam = poly(eigen_grid(alg, n))
        M = (Q * lam[None, :]) @ Q.conj().T
        return M.real

    if isinstance(sym, Symbol):
        axes = [one_axis(n, f) for n, f in zip(shape.ns, sym.factors)]
        if shape.d == 1:
            return axes[0]
        I1 = np.eye(shape.ns[0])
        I2 = np.eye(shape.ns[1])
        if sym.mode == "sum":
            return np.kron(axes[0], I2) + np.kron(I1, axes[1])
        return np.kron(axes[0], axes[1])
    # raw coefficient array: evaluate on the tensor eigenvalue grid
    coeffs = np.asarray(sym, dtype=float)
    if shape.d == 1:
        (n,) = shape.ns
        Q = transform_matrix(alg, n)
        t = eigen_grid(alg, n)
        lam = _eval_coeff_array(coeffs, t)
        return ((Q * lam[None, :]) @ Q.conj().T).real
    n1, n2 = shape.ns
    Q1, Q2 = transform_matrix(alg, n1), transform_matrix(alg, n2)
    t1, t2 = np.meshgrid(eigen_grid(alg, n1), eigen_grid(alg, n2), indexing="ij")
    lam = _eval_coeff_array(np.atleast_2d(coeffs), (t1, t2)).ravel()
    Q = np.kron(Q1, Q2)
    return ((Q * lam[None, :]) @ Q.conj().T).real


def _eval_coeff_array(coeffs, t):
    """Evaluate a cosine coefficient array (1D or 2D convention of Symbol)."""
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.ndim == 1:
        t = np.asarray(t, dtype=float)
        v = np.full_like(t, coeffs[0], dtype=float)
        for j in range(1, len(coeffs)):
            v = v + 2.0 * coeffs[j] * np.cos(j * t)
        return v
    t1, t2 = t
    v = np.zeros_like(np.asarray(t1, dtype=float))
    for j in range(coeffs.shape[0]):
        ej = np.ones_like(v) if j == 0 else 2.0 * np.cos(j * np.asarray(t1))
        for k in range(coeffs.shape[1]):
            c = coeffs[j, k]
            if c == 0.0:
                continue
            ek = 1.0 if k == 0 else 2.0 * np.cos(k * np.asarray(t2))
            v = v + c * ej * ek
    return v


def stencil_sup_norm(coeffs: np.ndarray) -> float:
    """Sup of |f| over [0, pi]^d for a coefficient array (dense grid scan)."""
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.ndim == 1:
        from .symbols import CosinePoly

        return CosinePoly(coeffs).sup_norm()
    t = np.linspace(0.0, np.pi, 513)
    t1, t2 = np.meshgrid(t, t, indexing="ij")
    v = _eval_coeff_array(coeffs, (t1, t2))
    return float(np.abs(v).max())


@dataclass
class LevelOperator:
    """Symmetric operator: structured banded part + banded correction (+ rank one).

    The structured part is the algebra matrix of ``stencil``; ``correction``
    is any symmetric banded perturbation; ``strang`` holds a vector v whose
    rank-one contribution v (v^T x) completes the matrix-vector product.
    """

    algebra: Algebra
    shape: GridShape
    stencil: np.ndarray
    structured: sp.csr_matrix
    correction: sp.csr_matrix
    strang: np.ndarray | None = None
    _assembled: sp.csr_matrix | None = field(default=None, repr=False)

    @property
    def N(self) -> int:
        return self.shape.N

    def matvec(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.N:
            raise ValueError(f"vector length {x.shape[-1]} != operator size {self.N}")
        y = self.structured @ x + self.correction @ x
        if self.strang is not None:
            y = y + self.strang * (self.strang @ x)
        return y

    __matmul__ = matvec

    def assembled(self) -> sp.csr_matrix:
        """Banded part (structured + correction), excluding the rank-one term."""
        if self._assembled is None:
            self._assembled = (self.structured + self.correction).tocsr()
        return self._assembled

    def to_dense(self, cap: int = DENSE_CAP) -> np.ndarray:
        if self.N > cap:
            raise SizeCapError(f"dense materialization capped at {cap}, got N={self.N}")
        M = self.assembled().toarray()
        if self.strang is not None:
            M = M + np.outer(self.strang, self.strang)
        return M

    def correction_inf_norm(self) -> float:
        if self.correction.nnz == 0:
            return 0.0
        return float(np.abs(self.correction).sum(axis=1).max())

    def gershgorin_bound(self) -> float:
        M = float(np.abs(self.assembled()).sum(axis=1).max())
        if self.strang is not None:
            M += float(np.abs(self.strang).max() * np.abs(self.strang).sum())
        return M

    def spectral_bound(self, sharp: bool = True) -> float:
        """Upper bound on the largest eigenvalue (Lanczos estimate or Gershgorin)."""
        gersh = self.gershgorin_bound()
        if not sharp or self.N <= 2:
            return gersh
        op = spla.LinearOperator((self.N, self.N), matvec=self.matvec, dtype=float)
        try:
            lam = spla.eigsh(op, k=1, which="LA", tol=1e-9,
                             return_eigenvectors=False, maxiter=10000)[0]
        except (spla.ArpackNoConvergence, spla.ArpackError):
            return gersh
        return min(float(lam) * (1.0 + 1e-8), gersh)


def assemble_structured(alg: Algebra, shape: GridShape, sym: Symbol | np.ndarray) -> LevelOperator:
    """Banded algebra operator of a symbol, with empty correction."""
    coeffs = sym.coeff_array() if isinstance(sym, Symbol) else np.asarray(sym, dtype=float)
    S = _assemble_banded(alg, shape, coeffs)
    Z = sp.csr_matrix((shape.N, shape.N))
    return LevelOperator(alg, shape, coeffs, S, Z)


def strang_vector(alg: Algebra, shape: GridShape, sym: Symbol) -> np.ndarray:
    """Rank-one regularization vector: v v^T = f(t*) e e^T / N.

    t* is the first nonzero eigenvalue grid point of the algebra, so that the
    corrected matrix stays within the span of the uncorrected spectrum.
    """
    if alg is Algebra.TAU:
        raise ValueError("rank-one correction is specific to circulant/DCT-III")
    N = shape.N
    t0 = 2.0 * np.pi / N if alg is Algebra.CIRCULANT else np.pi / N
    fval = float(sym(*([t0] * shape.d)))
    if fval <= 0.0:
        raise ValueError("symbol must be positive at the correction point")
    return np.sqrt(fval / N) * np.ones(N)


def make_operator(
    alg: Algebra,
    shape: GridShape,
    sym: Symbol,
    correction=None,
    strang: bool = False,
) -> LevelOperator:
    """Assemble structured part + optional correction + optional rank-one term.

    ``correction`` may be a diagonal (1D array of length N) or any symmetric
    sparse matrix.
    """
    op = assemble_structured(alg, shape, sym)
    if correction is not None:
        if sp.issparse(correction):
            C = correction.tocsr()
        else:
            correction = np.asarray(correction, dtype=float)
            C = sp.diags([correction], [0], shape=(shape.N, shape.N), format="csr")
        if C.shape != (shape.N, shape.N):
            raise ValueError("correction shape mismatch")
        op.correction = C
        op._assembled = None
    if strang:
        op.strang = strang_vector(alg, shape, sym)
    return op


def min_eig_formula_tau_1d(n: int) -> float:
    """Smallest eigenvalue of the second-difference tau matrix of size n."""
    if n < 1:
        raise ValueError("size must be >= 1")
    return 4.0 * np.sin(np.pi / (2.0 * (n + 1))) ** 2
