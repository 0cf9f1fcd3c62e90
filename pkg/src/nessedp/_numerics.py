"""Shared numerical helpers: finite differences, damped Newton, line searches."""

from __future__ import annotations

import numpy as np

from .errors import NewtonDivergence

FD_STEP = 1e-5


def fd_gradient(f, x, h0: float = FD_STEP) -> np.ndarray:
    """Central-difference gradient with per-coordinate step h0*(1+|x_i|)."""
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        h = h0 * (1.0 + abs(x[i]))
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (f(xp) - f(xm)) / (2.0 * h)
    return g


def fd_jacobian(F, x, h0: float = FD_STEP) -> np.ndarray:
    """Central-difference Jacobian of a vector map."""
    x = np.asarray(x, dtype=float)
    f0 = np.asarray(F(x), dtype=float)
    J = np.empty((f0.size, x.size))
    for i in range(x.size):
        h = h0 * (1.0 + abs(x[i]))
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        J[:, i] = (np.asarray(F(xp)) - np.asarray(F(xm))) / (2.0 * h)
    return J


def fd_hessian(f, x, h0: float = 1e-4) -> np.ndarray:
    """Symmetric finite-difference Hessian (gradient differencing)."""
    H = fd_jacobian(lambda y: fd_gradient(f, y, h0=h0), x, h0=h0)
    return 0.5 * (H + H.T)


def newton_solve(F, x0, jac=None, tol: float = 1e-12, max_iter: int = 60,
                 scale: float = 1.0):
    """Damped Newton for F(x) = 0 with backtracking on |F|.

    Parameters
    ----------
    F : callable
        Residual map R^n -> R^n.
    x0 : array
        Starting point.
    jac : callable, optional
        Jacobian of F; finite differences when omitted.
    tol : float
        Convergence threshold on the residual norm, relative to ``scale``.
    scale : float
        Natural size of the residual, used to make ``tol`` relative.

    Returns
    -------
    x : array
        The root.
    info : dict
        iterations, residual norm.

    Raises
    ------
    NewtonDivergence
        When damping cannot reduce the residual any further. The exception
        carries the best iterate seen.
    """
    x = np.asarray(x0, dtype=float).copy()
    r = np.asarray(F(x), dtype=float)
    rnorm = float(np.linalg.norm(r))
    best_x, best_r = x.copy(), rnorm
    threshold = tol * max(scale, 1e-300)
    for it in range(max_iter):
        if rnorm <= threshold:
            return x, {"iterations": it, "residual": rnorm}
        J = jac(x) if jac is not None else fd_jacobian(F, x)
        try:
            step = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError:
            step, *_ = np.linalg.lstsq(J, -r, rcond=None)
        lam = 1.0
        improved = False
        for _ in range(40):
            x_try = x + lam * step
            r_try = np.asarray(F(x_try), dtype=float)
            r_try_norm = float(np.linalg.norm(r_try))
            if np.isfinite(r_try_norm) and r_try_norm < rnorm * (1.0 - 1e-4 * lam):
                x, r, rnorm = x_try, r_try, r_try_norm
                improved = True
                break
            lam *= 0.5
        if not improved:
            if rnorm <= 10.0 * threshold:
                # stagnated within a digit of the target; close enough
                return x, {"iterations": it + 1, "residual": rnorm}
            raise NewtonDivergence(
                f"newton stalled at |F| = {rnorm:.3e}", best=best_x, residual=rnorm)
        if rnorm < best_r:
            best_x, best_r = x.copy(), rnorm
    if rnorm <= 10.0 * threshold:
        return x, {"iterations": max_iter, "residual": rnorm}
    raise NewtonDivergence(
        f"newton: no convergence in {max_iter} iterations, |F| = {rnorm:.3e}",
        best=best_x, residual=rnorm)


def golden_section_min(f, lo: float, hi: float, tol: float = 1e-11,
                       max_iter: int = 300) -> tuple[float, float]:
    """Golden-section minimization of a unimodal scalar function on [lo, hi].

    Robust to kinks (no derivatives used). Returns (argmin, min value).
    """
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = float(lo), float(hi)
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if abs(b - a) <= tol * (1.0 + abs(a) + abs(b)):
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    xm = 0.5 * (a + b)
    return xm, f(xm)


def halton_points(n: int, dim: int) -> np.ndarray:
    """Deterministic low-discrepancy points in [0, 1]^dim (Halton sequence)."""
    from scipy.stats import qmc

    sampler = qmc.Halton(d=dim, scramble=False)
    sampler.fast_forward(1)  # skip the all-zero point
    return sampler.random(n)
