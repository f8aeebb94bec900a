"""Numerical certification of the two-grid convergence constants.

Everything here runs at dense-friendly sizes: the constants being certified
are size-independent, so small-grid verification plus large-grid iteration
counts is the operative evidence.  The weighting matrix in the smoothing and
approximation inequalities is the identity throughout.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from .operators import DENSE_CAP, LevelOperator, SizeCapError, assemble_structured
from .solvers import CycleConfig, SmootherConfig, level_smoother_params, solve, _cycle

__all__ = [
    "SmoothingCheck",
    "TheoryCertificate",
    "alpha_formulas",
    "certify_operator",
    "condition_number",
    "estimate_beta",
    "measure_contraction",
    "verify_beta_transfer",
    "verify_smoothing_property",
]


def alpha_formulas(omega_pre: float, omega_post: float, M: float):
    """Smoothing constants of damped Richardson with spectrum in (0, M].

    alpha_post = w(2 - wM); alpha_pre = 2w for w <= 3/(2M), else
    w(2 - wM)/(1 - wM)^2.  Both omegas must lie strictly inside (0, 2/M).
    """
    if M <= 0:
        raise ValueError("spectral bound must be positive")
    for name, w in (("omega_pre", omega_pre), ("omega_post", omega_post)):
        if not (0.0 < w < 2.0 / M):
            raise ValueError(f"{name}={w} outside (0, 2/M) for M={M}")
    alpha_post = omega_post * (2.0 - omega_post * M)
    if omega_pre <= 1.5 / M:
        alpha_pre = 2.0 * omega_pre
    else:
        alpha_pre = omega_pre * (2.0 - omega_pre * M) / (1.0 - omega_pre * M) ** 2
    return alpha_pre, alpha_post


@dataclass
class SmoothingCheck:
    passed: bool
    worst_slack_pre: float
    worst_slack_post: float


def verify_smoothing_property(
    op: LevelOperator, cfg: SmootherConfig, samples: int = 100, seed: int = 0,
    cap: int = DENSE_CAP,
) -> SmoothingCheck:
    """Sample the pre/post smoothing inequalities; the worst slack is reported.

    Post:  ||V x||_B^2 <= ||x||_B^2 - a_post ||x||_{B^2}^2
    Pre:   ||V x||_B^2 <= ||x||_B^2 - a_pre ||V x||_{B^2}^2
    """
    B = op.to_dense(cap=cap)
    M = cfg.bound if cfg.bound > 0 else op.spectral_bound()
    try:
        a_pre, a_post = alpha_formulas(cfg.omega_pre, cfg.omega_post, M)
    except ValueError:
        return SmoothingCheck(False, -np.inf, -np.inf)
    I = np.eye(op.N)
    Vpre = I - cfg.omega_pre * B
    Vpost = I - cfg.omega_post * B
    B2 = B @ B
    rng = np.random.default_rng(seed)
    worst_pre = worst_post = np.inf
    for _ in range(samples):
        x = rng.standard_normal(op.N)
        xB = x @ B @ x
        y = Vpost @ x
        worst_post = min(worst_post, xB - a_post * (x @ B2 @ x) - y @ B @ y)
        z = Vpre @ x
        worst_pre = min(worst_pre, xB - a_pre * (z @ B2 @ z) - z @ B @ z)
    tol = 1e-10 * np.linalg.norm(B, 2)
    return SmoothingCheck(worst_pre >= -tol and worst_post >= -tol, worst_pre, worst_post)


def _cgc_matrix(B: np.ndarray, P: np.ndarray) -> np.ndarray:
    A1 = P.T @ B @ P
    return np.eye(B.shape[0]) - P @ np.linalg.solve(A1, P.T @ B)


def estimate_beta(op: LevelOperator, p, mode: str = "range_cgc", cap: int = DENSE_CAP) -> float:
    """Approximation constant via a dense generalized eigenproblem.

    'range_cgc': smallest beta with min_y ||x - p y||^2 <= beta ||x||_B^2,
    computed as the top eigenvalue of (I - p p^+) against B.
    'unconditional': smallest beta with ||C x||_B^2 <= beta ||x||_{B^2}^2
    for the coarse-grid correction projector C.
    """
    if op.N > cap:
        raise SizeCapError(f"beta estimation capped at {cap}, got N={op.N}")
    B = op.to_dense(cap=cap)
    P = p.matrix.toarray() if hasattr(p, "matrix") else np.asarray(p)
    if mode == "range_cgc":
        Q = np.eye(op.N) - P @ np.linalg.solve(P.T @ P, P.T)
        w = sla.eigh(Q, B, eigvals_only=True)
        return max(float(w[-1]), 0.0)
    if mode == "unconditional":
        C = _cgc_matrix(B, P)
        w = sla.eigh(C.T @ B @ C, B @ B, eigvals_only=True)
        return max(float(w[-1]), 0.0)
    raise ValueError(f"unknown mode {mode!r}")


def measure_contraction(h, cap: int = DENSE_CAP) -> float:
    """Energy norm of the one-cycle error propagator, built column by column."""
    op = h.finest
    if op.N > cap:
        raise SizeCapError(f"contraction measurement capped at {cap}, got N={op.N}")
    N = op.N
    E = np.empty((N, N))
    zero = np.zeros(N)
    for i in range(N):
        e = np.zeros(N)
        e[i] = 1.0
        E[:, i] = _cycle(h, 0, e, zero)
    B = op.to_dense(cap=cap)
    lam, U = np.linalg.eigh(B)
    if lam[0] <= 0:
        raise ValueError("operator is not positive definite")
    Bh = (U * np.sqrt(lam)) @ U.T
    Bmh = (U / np.sqrt(lam)) @ U.T
    return float(np.linalg.norm(Bh @ E @ Bmh, 2))


@dataclass
class BetaTransferCheck:
    passed: bool
    theta: float
    beta_a: float
    beta_b: float


def verify_beta_transfer(a_op: LevelOperator, b_op: LevelOperator, p,
                         rtol: float = 1e-8) -> BetaTransferCheck:
    """beta_B <= theta * beta_A for A <= theta B and a shared prolongation."""
    from .hierarchy import check_order_relation

    theta = check_order_relation(a_op, b_op)
    beta_a = estimate_beta(a_op, p, "range_cgc")
    beta_b = estimate_beta(b_op, p, "range_cgc")
    ok = beta_b <= theta * beta_a * (1.0 + rtol) + 1e-12
    return BetaTransferCheck(ok, theta, beta_a, beta_b)


def condition_number(
    op: LevelOperator,
    method: str = "dense",
    psym=None,
    tol: float = 1e-3,
    cap: int = DENSE_CAP,
) -> float:
    """Euclidean condition number; dense eigensolve or matrix-free extremes.

    The iterative path estimates the top of the spectrum with Lanczos and the
    bottom with shift-invert Lanczos whose inner solver is the V-cycle itself.
    """
    if method == "dense":
        w = sla.eigvalsh(op.to_dense(cap=cap))
        if w[0] <= 0:
            raise ValueError("operator is not positive definite")
        return float(w[-1] / w[0])
    if method != "iterative":
        raise ValueError(f"unknown method {method!r}")
    if psym is None:
        raise ValueError("iterative condition number needs the projector symbol")
    from .hierarchy import build_hierarchy

    h = build_hierarchy(op, psym, mode="mgm")
    inner = CycleConfig(mode="mgm", tol=1e-12, max_iter=400)

    def inv(x):
        y, rep = solve(h, np.asarray(x, dtype=float), inner)
        if not rep.converged:
            raise RuntimeError("inner V-cycle solve did not converge")
        return y

    lin = spla.LinearOperator((op.N, op.N), matvec=op.matvec, dtype=float)
    lam_max = spla.eigsh(lin, k=1, which="LA", tol=tol * 1e-3,
                         return_eigenvectors=False, maxiter=20000)[0]
    opinv = spla.LinearOperator((op.N, op.N), matvec=inv, dtype=float)
    lam_min = spla.eigsh(lin, k=1, sigma=0.0, which="LM", OPinv=opinv,
                         tol=tol * 1e-3, return_eigenvectors=False, maxiter=20000)[0]
    if lam_min <= 0:
        raise ValueError("operator is not positive definite")
    return float(lam_max / lam_min)


@dataclass
class TheoryCertificate:
    """Outcome of one certification run (post-only two-grid, identity weighting)."""

    n: tuple
    alpha_pre: float
    alpha_post: float
    beta: float
    beta_unconditional: float
    theta: float
    bound: float
    measured_contraction: float
    beta_dominates_alpha: bool
    contraction_within_bound: bool
    post_chain_ok: bool
    pre_chain_ok: bool
    smoothing_ok: bool
    beta_transfer_ok: bool
    config: dict

    @property
    def passed(self) -> bool:
        return (
            self.beta_dominates_alpha
            and self.contraction_within_bound
            and self.post_chain_ok
            and self.pre_chain_ok
            and self.smoothing_ok
            and self.beta_transfer_ok
        )


def certify_operator(
    op: LevelOperator,
    psym,
    sym=None,
    samples: int = 100,
    seed: int = 0,
    contraction_tol: float = 1e-6,
    config: dict | None = None,
) -> TheoryCertificate:
    """Run the full certificate on one operator.

    Checks, all with conservative damping (omega_post = 1/M, omega_pre =
    1/(2M)): beta >= alpha_post; the measured post-only two-grid contraction
    against sqrt(1 - alpha_post/beta); the post- and pre-smoothing inequality
    chains on random vectors; and the transfer of beta from the structured
    part to the corrected operator.
    """
    from .hierarchy import build_hierarchy, build_prolongation

    cfg = level_smoother_params(op, sym=sym, variant="theory")
    M = cfg.bound
    a_pre, a_post = alpha_formulas(cfg.omega_pre, cfg.omega_post, M)

    h = build_hierarchy(op, psym, mode="tgm", omega_variant="theory",
                        nu_pre=0, nu_post=1, fine_symbol=sym)
    p = h.levels[0].prolongation
    beta = estimate_beta(op, p, "range_cgc")
    beta_unc = estimate_beta(op, p, "unconditional")
    measured = measure_contraction(h)
    bound = float(np.sqrt(max(1.0 - a_post / beta, 0.0)))

    B = op.to_dense()
    P = p.matrix.toarray()
    C = _cgc_matrix(B, P)
    I = np.eye(op.N)
    Vpost = I - cfg.omega_post * B
    Vpre = I - cfg.omega_pre * B
    rng = np.random.default_rng(seed)
    post_ok = pre_ok = True
    post_fac = 1.0 - a_post / beta
    pre_fac = 1.0 / (1.0 + a_pre / beta_unc)
    scale = 1e-10 * np.linalg.norm(B, 2)
    for _ in range(samples):
        x = rng.standard_normal(op.N)
        xB = x @ B @ x
        y = Vpost @ (C @ x)
        post_ok &= y @ B @ y <= post_fac * xB + scale
        z = C @ (Vpre @ x)
        pre_ok &= z @ B @ z <= pre_fac * xB + scale
    sm = verify_smoothing_property(op, cfg, samples=samples, seed=seed + 1)

    a_struct = assemble_structured(op.algebra, op.shape, op.stencil)
    transfer = verify_beta_transfer(a_struct, op, p)

    return TheoryCertificate(
        n=op.shape.ns,
        alpha_pre=a_pre,
        alpha_post=a_post,
        beta=beta,
        beta_unconditional=beta_unc,
        theta=transfer.theta,
        bound=bound,
        measured_contraction=measured,
        beta_dominates_alpha=beta >= a_post - 1e-12,
        contraction_within_bound=measured <= bound + contraction_tol,
        post_chain_ok=bool(post_ok),
        pre_chain_ok=bool(pre_ok),
        smoothing_ok=sm.passed,
        beta_transfer_ok=transfer.passed,
        config=dict(config or {}),
    )
