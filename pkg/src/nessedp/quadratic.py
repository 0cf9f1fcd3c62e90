"""Closed-form quadratic slow-fast reference: block energies, Schur-reduced
mobility, analytic steady states, explicit reduced excess, and a matrix
exponential flow oracle.

Slow state U and fast state w carry energies
E(U) = (1/2)<A_s U, U> - <mu_s, U> and e(w) = (1/2)<A_f w, w> - <mu_f, w>,
coupled through a block mobility K = [[K_ss, K_sf], [K_fs, K_ff]]. Every
derived quantity here is linear algebra, which makes this module the oracle
fixture for the generic solvers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy.linalg import cho_factor, cho_solve, expm

from .errors import DomainError, SingularBlock
from .gradsys import EnergyFunctional, GradientSystem
from .spaces import Space


def _as_sym(M, name: str) -> np.ndarray:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[0] != M.shape[1] or not np.allclose(M, M.T, atol=1e-12):
        raise DomainError(f"{name} must be square symmetric")
    return M


def _chol_or_raise(M, name: str):
    try:
        return cho_factor(M)
    except np.linalg.LinAlgError as exc:
        raise SingularBlock(f"{name} is not positive definite") from exc


@dataclass
class QuadSlowFast:
    """Configuration of the quadratic slow-fast family."""

    A_s: np.ndarray
    A_f: np.ndarray
    K_ss: np.ndarray
    K_sf: np.ndarray
    K_fs: np.ndarray
    K_ff: np.ndarray
    mu_s: Optional[np.ndarray] = None
    mu_f: Optional[np.ndarray] = None
    onsager: bool = True

    def __post_init__(self):
        self.A_s = _as_sym(self.A_s, "A_s")
        self.A_f = _as_sym(self.A_f, "A_f")
        self.K_ss = _as_sym(self.K_ss, "K_ss")
        self.K_ff = _as_sym(self.K_ff, "K_ff")
        self.K_sf = np.atleast_2d(np.asarray(self.K_sf, dtype=float))
        self.K_fs = np.atleast_2d(np.asarray(self.K_fs, dtype=float))
        ns, nf = self.dim_slow, self.dim_fast
        if self.K_sf.shape != (ns, nf) or self.K_fs.shape != (nf, ns):
            raise DomainError("off-diagonal mobility blocks have wrong shape")
        if self.onsager and not np.allclose(self.K_fs, self.K_sf.T, atol=1e-12):
            raise DomainError("onsager flag requires K_fs = K_sf^T")
        self.mu_s = (np.zeros(ns) if self.mu_s is None
                     else np.asarray(self.mu_s, dtype=float))
        self.mu_f = (np.zeros(nf) if self.mu_f is None
                     else np.asarray(self.mu_f, dtype=float))

    @property
    def dim_slow(self) -> int:
        return self.A_s.shape[0]

    @property
    def dim_fast(self) -> int:
        return self.A_f.shape[0]

    @property
    def K(self) -> np.ndarray:
        return np.block([[self.K_ss, self.K_sf], [self.K_fs, self.K_ff]])

    @property
    def A(self) -> np.ndarray:
        ns, nf = self.dim_slow, self.dim_fast
        A = np.zeros((ns + nf, ns + nf))
        A[:ns, :ns] = self.A_s
        A[ns:, ns:] = self.A_f
        return A

    @property
    def mu(self) -> np.ndarray:
        return np.concatenate([self.mu_s, self.mu_f])

    def slow_force(self, U) -> np.ndarray:
        """-DE(U) = mu_s - A_s U."""
        return self.mu_s - self.A_s @ np.asarray(U, dtype=float)


def schur_mobility(cfg: QuadSlowFast) -> np.ndarray:
    """Effective slow mobility K_ss - K_sf K_ff^{-1} K_fs (Schur complement).

    Positive semidefinite whenever the full block mobility is; the fast
    block must be positive definite."""
    cf = _chol_or_raise(cfg.K_ff, "K_ff")
    return cfg.K_ss - cfg.K_sf @ cho_solve(cf, cfg.K_fs)


def analytic_ness(cfg: QuadSlowFast, Xi) -> Tuple[np.ndarray, np.ndarray]:
    """Fast steady state and port flux at slow driving force Xi:
    w solves A_f w - mu_f = K_ff^{-1} K_fs Xi, and y = K_eff Xi."""
    Xi = np.asarray(Xi, dtype=float)
    cf = _chol_or_raise(cfg.K_ff, "K_ff")
    ca = _chol_or_raise(cfg.A_f, "A_f")
    w = cho_solve(ca, cfg.mu_f + cho_solve(cf, cfg.K_fs @ Xi))
    y = schur_mobility(cfg) @ Xi
    return w, y


def excess_quadratic(cfg: QuadSlowFast, U, Xi) -> float:
    """Reduced excess in closed form:
    (1/2)<Xi, K_eff Xi> - (1/2)<mu_s - A_s U, K_eff (mu_s - A_s U)>."""
    Xi = np.asarray(Xi, dtype=float)
    g = cfg.slow_force(U)
    Keff = schur_mobility(cfg)
    return 0.5 * float(Xi @ Keff @ Xi) - 0.5 * float(g @ Keff @ g)


def effective_dual_quadratic(cfg: QuadSlowFast, Xi) -> float:
    """Effective dual potential (1/2)<Xi, K_eff Xi>: the reduced excess
    re-anchored at Xi = 0, independent of the slow state."""
    Xi = np.asarray(Xi, dtype=float)
    return 0.5 * float(Xi @ schur_mobility(cfg) @ Xi)


def full_system(cfg: QuadSlowFast, eps: float = 1.0) -> GradientSystem:
    """The coupled system at a fixed eps as a plain gradient system on the
    product space (states stacked as (U, w))."""
    from .gradsys import quadratic_system

    if eps <= 0:
        raise DomainError("eps must be positive")
    ns, nf = cfg.dim_slow, cfg.dim_fast
    S = np.eye(ns + nf)
    S[ns:, ns:] /= eps    # force rescaling: dual force slot of w carries eps
    K_eps = S @ cfg.K @ S
    A_eps = cfg.A
    A_eps[ns:, ns:] *= eps
    mu_eps = np.concatenate([cfg.mu_s, eps * cfg.mu_f])
    return quadratic_system(A_eps, mu_eps, K_eps,
                            space=Space(dim=ns + nf, name="slow-fast"),
                            name=f"quadratic-eps-{eps:g}")


def exact_flow(cfg: QuadSlowFast, eps: float, U0, w0, times) -> np.ndarray:
    """Matrix-exponential solution of the coupled linear flow

        dU/dt = K_ss(mu_s - A_s U) + K_sf(mu_f - A_f w)
        dw/dt = [K_fs(mu_s - A_s U) + K_ff(mu_f - A_f w)] / eps

    evaluated at the given times; rows are stacked states (U, w)."""
    ns, nf = cfg.dim_slow, cfg.dim_fast
    z0 = np.concatenate([np.asarray(U0, dtype=float),
                         np.asarray(w0, dtype=float)])
    M = -np.block([[cfg.K_ss @ cfg.A_s, cfg.K_sf @ cfg.A_f],
                   [cfg.K_fs @ cfg.A_s / eps, cfg.K_ff @ cfg.A_f / eps]])
    b = np.concatenate([cfg.K_ss @ cfg.mu_s + cfg.K_sf @ cfg.mu_f,
                        (cfg.K_fs @ cfg.mu_s + cfg.K_ff @ cfg.mu_f) / eps])
    try:
        z_p = np.linalg.solve(M, -b)
    except np.linalg.LinAlgError as exc:
        raise SingularBlock("flow generator is singular; no affine "
                            "particular solution") from exc
    times = np.atleast_1d(np.asarray(times, dtype=float))
    out = np.empty((times.size, ns + nf))
    for i, t in enumerate(times):
        out[i] = z_p + expm(M * t) @ (z0 - z_p)
    return out


def exact_reduced_flow(cfg: QuadSlowFast, U0, times) -> np.ndarray:
    """Matrix-exponential solution of dU/dt = K_eff(mu_s - A_s U)."""
    Keff = schur_mobility(cfg)
    M = -Keff @ cfg.A_s
    b = Keff @ cfg.mu_s
    U0 = np.asarray(U0, dtype=float)
    times = np.atleast_1d(np.asarray(times, dtype=float))
    out = np.empty((times.size, cfg.dim_slow))
    if np.linalg.matrix_rank(M) < M.shape[0]:
        raise SingularBlock("reduced generator is singular")
    U_p = np.linalg.solve(M, -b)
    for i, t in enumerate(times):
        out[i] = U_p + expm(M * t) @ (U0 - U_p)
    return out


def slow_energy(cfg: QuadSlowFast) -> EnergyFunctional:
    space = Space(dim=cfg.dim_slow, name="slow")
    return EnergyFunctional(
        value=lambda U: 0.5 * float(U @ cfg.A_s @ U) - float(cfg.mu_s @ U),
        gradient=lambda U: cfg.A_s @ U - cfg.mu_s,
        hessian=lambda U: cfg.A_s.copy(),
        space=space, name="slow-quadratic-energy")


def fast_energy(cfg: QuadSlowFast) -> EnergyFunctional:
    space = Space(dim=cfg.dim_fast, name="fast")
    return EnergyFunctional(
        value=lambda w: 0.5 * float(w @ cfg.A_f @ w) - float(cfg.mu_f @ w),
        gradient=lambda w: cfg.A_f @ w - cfg.mu_f,
        hessian=lambda w: cfg.A_f.copy(),
        space=space, name="fast-quadratic-energy")


def as_slow_fast(cfg: QuadSlowFast):
    """Wrap the configuration as a product-type slow-fast system."""
    from .slowfast import SlowFastSystem

    K = cfg.K
    ns = cfg.dim_slow

    def rbar_dual(U, w, Xi, zeta):
        xi = np.concatenate([np.asarray(Xi, float), np.asarray(zeta, float)])
        return 0.5 * float(xi @ K @ xi)

    def slow_velocity(U, w, Xi, zeta):
        return cfg.K_ss @ Xi + cfg.K_sf @ zeta

    def fast_velocity(U, w, Xi, zeta):
        return cfg.K_fs @ Xi + cfg.K_ff @ zeta

    return SlowFastSystem(
        case="product",
        slow_energy=slow_energy(cfg),
        fast_energy=fast_energy(cfg),
        rbar_dual=rbar_dual,
        slow_velocity=slow_velocity,
        fast_velocity=fast_velocity,
        name="quadratic-slow-fast")


def random_config(dim_slow: int = 2, dim_fast: int = 2, seed: int = 0,
                  with_tilts: bool = True) -> QuadSlowFast:
    """Reproducible random instance with positive-definite blocks and a
    positive-semidefinite full mobility."""
    rng = np.random.default_rng(seed)
    n = dim_slow + dim_fast
    M = rng.standard_normal((n, n))
    K = M @ M.T + 0.5 * n * np.eye(n)
    Ms = rng.standard_normal((dim_slow, dim_slow))
    Mf = rng.standard_normal((dim_fast, dim_fast))
    return QuadSlowFast(
        A_s=Ms @ Ms.T + dim_slow * np.eye(dim_slow),
        A_f=Mf @ Mf.T + dim_fast * np.eye(dim_fast),
        K_ss=K[:dim_slow, :dim_slow], K_sf=K[:dim_slow, dim_slow:],
        K_fs=K[dim_slow:, :dim_slow], K_ff=K[dim_slow:, dim_slow:],
        mu_s=rng.standard_normal(dim_slow) if with_tilts else None,
        mu_f=rng.standard_normal(dim_fast) if with_tilts else None)
