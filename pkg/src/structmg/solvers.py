"""Smoothers, two-grid and V-cycle iterations, conjugate gradients."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

__all__ = [
    "CycleConfig",
    "SmootherConfig",
    "SolveReport",
    "cg_solve",
    "level_smoother_params",
    "mgm_vcycle",
    "smooth",
    "solve",
    "spectral_upper_bound",
    "tgm_iterate",
]


@dataclass(frozen=True)
class SmootherConfig:
    """Damped Richardson (or Gauss-Seidel post) sweep counts and weights."""

    kind: str = "richardson"  # 'richardson' | 'gs-post'
    omega_pre: float = 0.0
    omega_post: float = 0.0
    nu_pre: int = 1
    nu_post: int = 1
    bound: float = 0.0  # spectral upper bound M the weights were derived from

    def __post_init__(self):
        if self.kind not in ("richardson", "gs-post"):
            raise ValueError(f"unknown smoother kind {self.kind!r}")
        if self.nu_pre < 0 or self.nu_post < 0:
            raise ValueError("sweep counts must be nonnegative")
        if self.bound > 0:
            for name, om in (("omega_pre", self.omega_pre), ("omega_post", self.omega_post)):
                if om < 0 or om > 2.0 / self.bound * (1 + 1e-12):
                    raise ValueError(f"{name}={om} outside (0, 2/M] for M={self.bound}")


@dataclass(frozen=True)
class CycleConfig:
    mode: str = "mgm"  # 'tgm' | 'vcycle'
    rho: int = 0
    tol: float = 1e-7
    max_iter: int = 200
    rho_post_only: bool = False
    zero_initial_guess: bool = True

    def __post_init__(self):
        if self.mode not in ("tgm", "vcycle", "mgm"):
            raise ValueError(f"unknown cycle mode {self.mode!r}")
        if self.rho < 0:
            raise ValueError("rho must be nonnegative")


@dataclass
class SolveReport:
    iterations: int
    residual_history: list = field(default_factory=list)
    converged: bool = False
    wall_time: float = 0.0
    config: dict = field(default_factory=dict)
    flag: str = ""


def spectral_upper_bound(op, sym=None, fine_correction_norm=None, sharp=True) -> float:
    """Upper bound M on the spectrum of a level operator.

    With a symbol given (finest level), M = sup|f| + ||D||_inf, the bound the
    damping formulas are stated with.  Otherwise a per-level bound is taken
    from the assembled matrix (Lanczos estimate, Gershgorin fallback).
    """
    if sym is not None:
        from .operators import stencil_sup_norm

        supf = sym.sup_norm() if hasattr(sym, "sup_norm") else stencil_sup_norm(sym)
        normD = op.correction_inf_norm() if fine_correction_norm is None else fine_correction_norm
        return float(supf + normD)
    return op.spectral_bound(sharp=sharp)


def level_smoother_params(
    op,
    sym=None,
    fine_correction_norm=None,
    *,
    bound=None,
    variant="theory",
    kind="richardson",
    nu_pre=1,
    nu_post=1,
) -> SmootherConfig:
    """Damping weights from a spectral upper bound M.

    variant 'theory' returns (omega_pre, omega_post) = (1/(2M), 1/M), which
    keeps both weights strictly inside (0, 2/M).  variant 'benchmark' returns
    (1/M, 2/M): the post-weight sits at the stability boundary and the pair
    annihilates the top half of the spectrum, which is what reproduces the
    reference iteration counts.
    """
    if bound is None:
        bound = spectral_upper_bound(op, sym=sym, fine_correction_norm=fine_correction_norm)
    if bound <= 0:
        raise ValueError("spectral bound must be positive")
    if variant == "theory":
        om_pre, om_post = 1.0 / (2.0 * bound), 1.0 / bound
    elif variant == "benchmark":
        om_pre, om_post = 1.0 / bound, 2.0 / bound
    else:
        raise ValueError(f"unknown omega variant {variant!r}")
    return SmootherConfig(kind, om_pre, om_post, nu_pre, nu_post, bound)


def _richardson(op, x, b, omega, steps):
    for _ in range(steps):
        x = x + omega * (b - op.matvec(x))
    return x


def _gs_forward(lower, op, x, b, steps):
    for _ in range(steps):
        r = b - op.matvec(x)
        x = x + spla.spsolve_triangular(lower, r, lower=True)
    return x


def smooth(op, x, b, cfg: SmootherConfig, phase: str, gs_lower=None):
    """Apply the configured pre- or post-smoother."""
    if phase not in ("pre", "post"):
        raise ValueError("phase must be 'pre' or 'post'")
    steps = cfg.nu_pre if phase == "pre" else cfg.nu_post
    if steps == 0:
        return x
    if cfg.kind == "gs-post" and phase == "post":
        if gs_lower is None:
            import scipy.sparse as sp

            if op.strang is not None:
                raise ValueError("Gauss-Seidel smoothing not supported with a rank-one term")
            gs_lower = sp.tril(op.assembled(), format="csr")
        return _gs_forward(gs_lower, op, x, b, steps)
    omega = cfg.omega_pre if phase == "pre" else cfg.omega_post
    return _richardson(op, x, b, omega, steps)


def _cycle(h, s: int, x: np.ndarray, b: np.ndarray) -> np.ndarray:
    lvl = h.levels[s]
    if lvl.prolongation is None:
        return h.coarse_solve(b)
    op = lvl.op
    x = smooth(op, x, b, lvl.smoother, "pre", gs_lower=lvl.gs_lower)
    r = b - op.matvec(x)
    rc = lvl.prolongation.restrict(r)
    yc = _cycle(h, s + 1, np.zeros_like(rc), rc)
    x = x + lvl.prolongation.prolong(yc)
    return smooth(op, x, b, lvl.smoother, "post", gs_lower=lvl.gs_lower)


def tgm_iterate(h, x: np.ndarray, b: np.ndarray) -> np.ndarray:
    """One two-grid sweep: smooth, restrict, exact coarse solve, correct, smooth."""
    if h.mode != "tgm":
        raise ValueError("hierarchy was not built in two-grid mode")
    return _cycle(h, 0, x, b)


def mgm_vcycle(h, level: int, x: np.ndarray, b: np.ndarray) -> np.ndarray:
    """One V-cycle from the given level down to the direct coarsest solve."""
    return _cycle(h, level, x, b)


def solve(h, b: np.ndarray, cfg: CycleConfig | None = None):
    """Iterate cycles from x = 0 until the relative residual drops below tol."""
    cfg = cfg or CycleConfig(mode=h.mode)
    b = np.asarray(b, dtype=float)
    op = h.finest
    x = np.zeros_like(b)
    nb = float(np.linalg.norm(b))
    history = [nb]
    t0 = time.perf_counter()
    converged = nb == 0.0
    it = 0
    while not converged and it < cfg.max_iter:
        x = _cycle(h, 0, x, b)
        it += 1
        res = float(np.linalg.norm(b - op.matvec(x)))
        history.append(res)
        converged = res / nb < cfg.tol
    report = SolveReport(
        iterations=it,
        residual_history=history,
        converged=converged,
        wall_time=time.perf_counter() - t0,
        config={"mode": h.mode, "tol": cfg.tol, "max_iter": cfg.max_iter},
    )
    return x, report


def cg_solve(op, b: np.ndarray, tol: float = 1e-7, max_iter: int | None = None):
    """Plain conjugate gradients with the same relative-residual stopping rule."""
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    max_iter = 10 * n if max_iter is None else max_iter
    x = np.zeros_like(b)
    r = b.copy()
    p = r.copy()
    nb = float(np.linalg.norm(b))
    rr = float(r @ r)
    history = [nb]
    t0 = time.perf_counter()
    flag = ""
    converged = nb == 0.0
    it = 0
    while not converged and it < max_iter:
        Ap = op.matvec(p)
        pAp = float(p @ Ap)
        if pAp <= 0.0:
            flag = "breakdown: operator not positive definite along search direction"
            break
        alpha = rr / pAp
        x = x + alpha * p
        r = r - alpha * Ap
        it += 1
        rr_new = float(r @ r)
        history.append(np.sqrt(rr_new))
        if np.sqrt(rr_new) / nb < tol:
            converged = True
            break
        p = r + (rr_new / rr) * p
        rr = rr_new
    report = SolveReport(
        iterations=it,
        residual_history=history,
        converged=converged,
        wall_time=time.perf_counter() - t0,
        config={"mode": "cg", "tol": tol, "max_iter": max_iter},
        flag=flag,
    )
    return x, report
