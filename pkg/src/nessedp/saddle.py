"""Concave-convex saddle problems, duality-gap diagnostics, and the
constrained-conjugate identity.

Orientation convention used throughout: the first slot is the max-variable,
the second the min-variable. The two one-sided values

    si = sup_x inf_y L(x, y)   <=   inf_y sup_x L(x, y) = is

always satisfy weak duality; their difference is the duality gap, zero
exactly when a saddle point exists. Estimates computed here anchor the
inner optimizations at a candidate point, which preserves si <= is.

Affine constraints are eliminated through an orthonormal null-space basis,
so feasibility of iterates is exact to rounding. Standard dot pairings are
assumed; callers with weighted pairings absorb the weights beforehand.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import minimize as _scipy_minimize

from ._numerics import fd_gradient, fd_hessian, halton_points, newton_solve
from .errors import (ConstraintInfeasible, DomainError, DualityMismatch,
                     NewtonDivergence, NoConvergence, Unbounded)


@dataclass
class AffineConstraint:
    """The affine set {x : B x = z} for a wide matrix B."""

    operator: np.ndarray
    target: np.ndarray

    def __post_init__(self):
        self.operator = np.atleast_2d(np.asarray(self.operator, dtype=float))
        self.target = np.atleast_1d(np.asarray(self.target, dtype=float))
        m, n = self.operator.shape
        if m > n:
            raise DomainError(
                f"affine constraint must be underdetermined, got shape {m}x{n}")
        if self.target.shape != (m,):
            raise DomainError("constraint target length does not match rows")

    @property
    def dim(self) -> int:
        return self.operator.shape[1]

    def particular(self) -> np.ndarray:
        """A feasible point, or ConstraintInfeasible when the set is empty."""
        x, *_ = np.linalg.lstsq(self.operator, self.target, rcond=None)
        if np.linalg.norm(self.operator @ x - self.target) > 1e-10 * (
                1.0 + np.linalg.norm(self.target)):
            raise ConstraintInfeasible(
                "affine constraint B x = z has no solution")
        return x

    def basis(self) -> np.ndarray:
        """Orthonormal basis of ker B, shape (n, n - rank)."""
        return null_space(self.operator)

    def project(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        xp = self.particular()
        N = self.basis()
        return xp + N @ (N.T @ (x - xp))

    def residual(self, x) -> float:
        return float(np.linalg.norm(self.operator @ np.asarray(x) - self.target))


class _Chart:
    """Coordinates on an affine feasible set: x = origin + basis @ a."""

    def __init__(self, dim: int, constraint: Optional[AffineConstraint],
                 box: Optional[float]):
        if constraint is not None:
            if box is not None:
                raise DomainError(
                    "box bounds together with an affine constraint on the "
                    "same variable are not supported")
            if constraint.dim != dim:
                raise DomainError("constraint width does not match variable")
            self.origin = constraint.particular()
            self.basis = constraint.basis()
        else:
            self.origin = np.zeros(dim)
            self.basis = np.eye(dim)
        self.box = box
        self.dim = self.basis.shape[1]

    def embed(self, a) -> np.ndarray:
        return self.origin + self.basis @ np.asarray(a, dtype=float)

    def pull(self, x) -> np.ndarray:
        return self.basis.T @ (np.asarray(x, dtype=float) - self.origin)

    def clip(self, a) -> np.ndarray:
        if self.box is None:
            return np.asarray(a, dtype=float)
        return np.clip(a, -self.box, self.box)

    def reduce_grad(self, g) -> np.ndarray:
        return self.basis.T @ np.asarray(g, dtype=float)


@dataclass
class SaddleProblem:
    """L(x, y) to be maximized over x and minimized over y.

    ``grad_x`` / ``grad_y`` are partial gradients; central differences fill
    in for missing ones. Boxes are scalar halfwidths applied componentwise
    and cannot be combined with a constraint on the same slot.
    """

    objective: Callable[[np.ndarray, np.ndarray], float]
    dim_x: int
    dim_y: int
    grad_x: Optional[Callable] = None
    grad_y: Optional[Callable] = None
    constraint_x: Optional[AffineConstraint] = None
    constraint_y: Optional[AffineConstraint] = None
    box_x: Optional[float] = None
    box_y: Optional[float] = None
    name: str = "saddle"

    def value(self, x, y) -> float:
        return float(self.objective(np.asarray(x, float), np.asarray(y, float)))

    def gx(self, x, y) -> np.ndarray:
        if self.grad_x is not None:
            return np.asarray(self.grad_x(x, y), dtype=float)
        return fd_gradient(lambda z: self.objective(z, y), x)

    def gy(self, x, y) -> np.ndarray:
        if self.grad_y is not None:
            return np.asarray(self.grad_y(x, y), dtype=float)
        return fd_gradient(lambda z: self.objective(x, z), y)


@dataclass
class SaddleResult:
    x_star: np.ndarray
    y_star: np.ndarray
    value: float
    si_estimate: float
    is_estimate: float
    gap: float
    grad_residual: float
    iterations: int
    converged: bool
    message: str = ""


@dataclass
class SaddleOpts:
    tol: float = 1e-10
    max_extragrad: int = 800
    max_newton: int = 60
    switch_tol: float = 1e-3
    step0: float = 0.2
    n_starts: int = 8
    start_radius: Optional[float] = None
    value_tie: float = 1e-9
    inner_box_scale: float = 50.0
    escape_radius: float = 1e3
    gap_tol: float = 1e-6
    raise_on_fail: bool = False


def midpoint_convexity_probe(p: SaddleProblem, n: int = 100, seed: int = 0,
                             radius: float = 1.0) -> float:
    """Largest violation of midpoint convexity in the min-variable over
    random feasible pairs; <= 0 (up to roundoff) for convex problems."""
    rng = np.random.default_rng(seed)
    cx = _Chart(p.dim_x, p.constraint_x, p.box_x)
    cy = _Chart(p.dim_y, p.constraint_y, p.box_y)
    worst = -np.inf
    for _ in range(n):
        x = cx.embed(cx.clip(radius * rng.standard_normal(cx.dim)))
        ya = cy.embed(cy.clip(radius * rng.standard_normal(cy.dim)))
        yb = cy.embed(cy.clip(radius * rng.standard_normal(cy.dim)))
        mid = p.value(x, 0.5 * (ya + yb))
        avg = 0.5 * (p.value(x, ya) + p.value(x, yb))
        worst = max(worst, mid - avg)
    return worst


def _joint_residual(p, cx, cy, a, b):
    x, y = cx.embed(a), cy.embed(b)
    ga = cx.reduce_grad(p.gx(x, y))
    gb = cy.reduce_grad(p.gy(x, y))
    return ga, gb, float(np.sqrt(ga @ ga + gb @ gb))


def _extragradient(p, cx, cy, a, b, opts):
    """Projected extragradient phase: ascent in a, descent in b, with the
    step size backtracked whenever the joint residual grows."""
    tau = opts.step0
    ga, gb, res = _joint_residual(p, cx, cy, a, b)
    it = 0
    for it in range(1, opts.max_extragrad + 1):
        if res <= opts.switch_tol:
            break
        accepted = False
        for _ in range(25):
            ah = cx.clip(a + tau * ga)
            bh = cy.clip(b - tau * gb)
            gah, gbh, _ = _joint_residual(p, cx, cy, ah, bh)
            a2 = cx.clip(a + tau * gah)
            b2 = cy.clip(b - tau * gbh)
            ga2, gb2, res2 = _joint_residual(p, cx, cy, a2, b2)
            if res2 <= res * (1.0 + 1e-12) or tau < 1e-12:
                a, b, ga, gb, res = a2, b2, ga2, gb2, res2
                tau = min(tau * 1.25, 10.0 * opts.step0)
                accepted = True
                break
            tau *= 0.5
        if not accepted:
            break
    return a, b, res, it


def _newton_polish(p, cx, cy, a, b, opts):
    """Newton on the joint stationarity system. A polish that travels far
    from its start has diverged into flat territory (saturating objectives
    shrink their own gradients there), so it is reverted rather than
    trusted."""
    na = cx.dim

    def F(z):
        ga, gb, _ = _joint_residual(p, cx, cy, z[:na], z[na:])
        return np.concatenate([ga, gb])

    z0 = np.concatenate([a, b])
    try:
        z, info = newton_solve(F, z0, tol=opts.tol, max_iter=opts.max_newton)
    except NewtonDivergence as exc:
        z = exc.best if exc.best is not None else z0
        info = {"iterations": opts.max_newton}
    if np.linalg.norm(z - z0) > opts.escape_radius * (1.0 + np.linalg.norm(z0)):
        z = z0
    a, b = cx.clip(z[:na]), cy.clip(z[na:])
    _, _, res = _joint_residual(p, cx, cy, a, b)
    return a, b, res, info["iterations"]


def _inner_value(p, cx, cy, a_fixed, b0, opts, which: str) -> float:
    """One-sided inner optimum anchored at the other slot's point.

    which="min": inf over y of L(x*, .); which="max": sup over x of L(., y*).
    Runs bounded L-BFGS-B in reduced coordinates; the synthetic box only
    matters for objectives whose inner optimum sits at infinity and is wide
    enough that saturating objectives reach their limit values.
    """
    if which == "min":
        chart = cy
        fun = lambda b: p.value(cx.embed(a_fixed), chart.embed(b))
        jac = lambda b: chart.reduce_grad(
            p.gy(cx.embed(a_fixed), chart.embed(b)))
        sign = 1.0
        z0 = np.asarray(b0, dtype=float)
    else:
        chart = cx
        fun = lambda a: p.value(chart.embed(a), cy.embed(b0))
        jac = lambda a: chart.reduce_grad(
            p.gx(chart.embed(a), cy.embed(b0)))
        sign = -1.0
        z0 = np.asarray(a_fixed, dtype=float)
    if chart.dim == 0:
        return fun(np.zeros(0))
    halfwidth = chart.box if chart.box is not None else \
        opts.inner_box_scale * (1.0 + float(np.max(np.abs(z0), initial=0.0)))
    bounds = [(-halfwidth, halfwidth)] * chart.dim

    # A coarse low-discrepancy scan seeds a second start so that anchors
    # sitting in a flat region of a saturating objective do not stall the
    # line search at its first iterate.
    starts = [z0]
    scan = (2.0 * halton_points(32, chart.dim) - 1.0) * halfwidth
    scan_best = min(scan, key=lambda s: sign * fun(s))
    starts.append(np.asarray(scan_best, dtype=float))

    best = np.inf
    for s in starts:
        res = _scipy_minimize(lambda z: sign * fun(z), s, method="L-BFGS-B",
                              jac=lambda z: sign * jac(z), bounds=bounds,
                              options={"ftol": 1e-16, "gtol": 1e-12,
                                       "maxiter": 2000})
        best = min(best, float(res.fun))
    return sign * best


def _anchored_estimates(p, cx, cy, a, b, opts):
    si = _inner_value(p, cx, cy, a, b, opts, which="min")
    is_ = _inner_value(p, cx, cy, a, b, opts, which="max")
    return si, is_


def solve_saddle(p: SaddleProblem, x0, y0,
                 opts: SaddleOpts | None = None) -> SaddleResult:
    """Extragradient-then-Newton saddle solve with low-discrepancy restarts.

    Starting points are projected onto the constraints. Among converged
    critical points the largest value wins (the first slot is maximized);
    values within ``value_tie`` are tied and the smallest-norm point is
    returned. Without convergence the best iterate comes back flagged, or
    NoConvergence is raised when ``raise_on_fail`` is set.
    """
    opts = opts or SaddleOpts()
    cx = _Chart(p.dim_x, p.constraint_x, p.box_x)
    cy = _Chart(p.dim_y, p.constraint_y, p.box_y)
    a0 = cx.clip(cx.pull(np.asarray(x0, dtype=float)))
    b0 = cy.clip(cy.pull(np.asarray(y0, dtype=float)))

    dim = cx.dim + cy.dim
    starts = [(a0, b0)]
    if opts.n_starts > 1 and dim > 0:
        pts = halton_points(opts.n_starts - 1, dim)  # in [0,1]^dim
        rad_x = cx.box if cx.box is not None else (
            opts.start_radius or 2.0 * (1.0 + float(np.linalg.norm(a0))))
        rad_y = cy.box if cy.box is not None else (
            opts.start_radius or 2.0 * (1.0 + float(np.linalg.norm(b0))))
        for q in pts:
            da = (2.0 * q[:cx.dim] - 1.0) * rad_x
            db = (2.0 * q[cx.dim:] - 1.0) * rad_y
            starts.append((cx.clip(a0 + da), cy.clip(b0 + db)))

    converged, fallback = [], []
    for a_s, b_s in starts:
        a, b, res, it1 = _extragradient(p, cx, cy, a_s, b_s, opts)
        a, b, res, it2 = _newton_polish(p, cx, cy, a, b, opts)
        val = p.value(cx.embed(a), cy.embed(b))
        rec = (a, b, val, res, it1 + it2)
        (converged if res <= opts.tol else fallback).append(rec)

    if converged:
        best_val = max(r[2] for r in converged)
        tied = [r for r in converged if abs(r[2] - best_val) <= opts.value_tie]
        a, b, val, res, iters = min(
            tied, key=lambda r: float(np.linalg.norm(np.concatenate([r[0], r[1]]))))
        ok = True
        msg = ""
    else:
        a, b, val, res, iters = min(fallback, key=lambda r: r[3])
        ok = False
        msg = f"first-order residual {res:.3e} above tol {opts.tol:g}"

    si, is_ = _anchored_estimates(p, cx, cy, a, b, opts)
    # A stationary point is only accepted as a saddle when the one-sided
    # certificate closes: objectives that merely saturate along a direction
    # (vanishing gradient at infinity) fail it with an order-one gap.
    if ok and is_ - si > opts.gap_tol * (1.0 + abs(val)):
        ok = False
        msg = (f"stationary point failed the saddle certificate "
               f"(gap {is_ - si:.3e})")
    result = SaddleResult(
        x_star=cx.embed(a), y_star=cy.embed(b), value=val,
        si_estimate=si, is_estimate=is_, gap=is_ - si,
        grad_residual=res, iterations=iters, converged=ok, message=msg)
    if not ok and opts.raise_on_fail:
        raise NoConvergence(msg, best=result, residual=res)
    return result


def duality_gap(p: SaddleProblem, candidate: Tuple[np.ndarray, np.ndarray],
                opts: SaddleOpts | None = None) -> float:
    """inf-sup minus sup-inf estimated by one-sided solves anchored at the
    candidate; nonnegative up to inner-solver tolerance, zero at saddles."""
    opts = opts or SaddleOpts()
    cx = _Chart(p.dim_x, p.constraint_x, p.box_x)
    cy = _Chart(p.dim_y, p.constraint_y, p.box_y)
    x, y = candidate
    a = cx.clip(cx.pull(np.asarray(x, dtype=float)))
    b = cy.clip(cy.pull(np.asarray(y, dtype=float)))
    si, is_ = _anchored_estimates(p, cx, cy, a, b, opts)
    return float(is_ - si)


@dataclass
class MinimizeOpts:
    tol: float = 1e-10
    max_iter: int = 200
    damping0: float = 0.0


def minimize_convex(f: Callable[[np.ndarray], float],
                    x0,
                    constraint: Optional[AffineConstraint] = None,
                    grad: Optional[Callable] = None,
                    opts: MinimizeOpts | None = None):
    """Damped-Newton minimizer on an affine feasible set.

    Newton steps use a finite-difference Hessian with Levenberg damping and
    an Armijo backtracking line search; a projected-gradient step is the
    fallback when the damped system is still not a descent direction.
    Returns (x, value). Raises NoConvergence when the reduced gradient
    cannot be brought below tolerance.
    """
    opts = opts or MinimizeOpts()
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    chart = _Chart(x0.size, constraint, None)
    a = chart.pull(x0)
    if chart.dim == 0:
        x = chart.embed(a)
        return x, float(f(x))

    g_full = grad if grad is not None else (lambda x: fd_gradient(f, x))
    fun = lambda a: float(f(chart.embed(a)))
    gfun = lambda a: chart.reduce_grad(g_full(chart.embed(a)))

    val = fun(a)
    lam = opts.damping0
    for it in range(opts.max_iter):
        g = gfun(a)
        gn = float(np.linalg.norm(g))
        if gn <= opts.tol:
            return chart.embed(a), val
        H = fd_hessian(fun, a)
        step = None
        lam_try = lam
        for _ in range(12):
            try:
                cand = np.linalg.solve(H + lam_try * np.eye(chart.dim), -g)
            except np.linalg.LinAlgError:
                cand = None
            if cand is not None and cand @ g < 0:
                step = cand
                break
            lam_try = max(10.0 * lam_try, 1e-8 * (1.0 + abs(val)))
        if step is None:
            step = -g
        t = 1.0
        improved = False
        for _ in range(40):
            a_new = a + t * step
            v_new = fun(a_new)
            if v_new <= val + 1e-4 * t * (g @ step):
                a, val = a_new, v_new
                improved = True
                break
            t *= 0.5
        if not improved:
            step = -g
            t = 1.0
            for _ in range(40):
                a_new = a + t * step
                v_new = fun(a_new)
                if v_new < val:
                    a, val = a_new, v_new
                    improved = True
                    break
                t *= 0.5
        if not improved:
            break
    g = gfun(a)
    if float(np.linalg.norm(g)) <= opts.tol:
        return chart.embed(a), val
    raise NoConvergence(
        f"minimize_convex: reduced gradient {np.linalg.norm(g):.3e} above "
        f"tol {opts.tol:g}", best=chart.embed(a),
        residual=float(np.linalg.norm(g)))


def constrained_conjugate(psi: Callable[[np.ndarray], float],
                          B, z, tol: float = 1e-7,
                          box: float = 40.0) -> float:
    """Value of inf over {xi : B xi = z} of the conjugate psi*, computed two
    independent ways and cross-checked.

    Route one maximizes <lam, z> - psi(B^T lam) over multipliers. Route two
    evaluates psi* numerically (a box-searched Legendre transform) and
    minimizes it over the affine set directly. Agreement within ``tol``
    (relative) is enforced; disagreement raises DualityMismatch.
    """
    B = np.atleast_2d(np.asarray(B, dtype=float))
    z = np.atleast_1d(np.asarray(z, dtype=float))
    m, n = B.shape

    # Route one: multiplier maximization of a concave function.
    neg = lambda lam: -(float(lam @ z) - float(psi(B.T @ lam)))
    lam0 = np.zeros(m)
    cur_box = box
    val_one = None
    for _ in range(4):
        res = _scipy_minimize(neg, lam0, method="L-BFGS-B",
                              bounds=[(-cur_box, cur_box)] * m,
                              options={"ftol": 1e-16, "gtol": 1e-13,
                                       "maxiter": 3000})
        lam0 = res.x
        at_edge = np.any(np.abs(np.abs(res.x) - cur_box) <= 1e-6 * cur_box)
        if not at_edge:
            val_one = -float(res.fun)
            break
        prev = -float(res.fun)
        cur_box *= 4.0
        res2 = _scipy_minimize(neg, res.x, method="L-BFGS-B",
                               bounds=[(-cur_box, cur_box)] * m,
                               options={"ftol": 1e-16, "gtol": 1e-13,
                                        "maxiter": 3000})
        if -float(res2.fun) > prev + 1e-6 * (1.0 + abs(prev)):
            lam0 = res2.x
            continue
        val_one = -float(res2.fun)
        break
    if val_one is None:
        raise Unbounded("constrained_conjugate: multiplier ascent unbounded")

    # Route two: direct minimization of the numeric conjugate on {B xi = z}.
    def psi_star(xi):
        r = _scipy_minimize(lambda w: psi(w) - float(xi @ w),
                            np.zeros(n), method="L-BFGS-B",
                            bounds=[(-10.0 * box, 10.0 * box)] * n,
                            options={"ftol": 1e-16, "gtol": 1e-13,
                                     "maxiter": 3000})
        return -float(r.fun)

    con = AffineConstraint(B, z)
    xi0 = con.particular()
    N = con.basis()
    if N.shape[1] == 0:
        val_two = psi_star(xi0)
    else:
        r = _scipy_minimize(lambda c: psi_star(xi0 + N @ c),
                            np.zeros(N.shape[1]), method="Nelder-Mead",
                            options={"xatol": 1e-10, "fatol": 1e-12,
                                     "maxiter": 20000, "maxfev": 20000})
        val_two = float(r.fun)

    if abs(val_one - val_two) > tol * (1.0 + abs(val_one)):
        raise DualityMismatch(
            f"constrained conjugate routes disagree: {val_one:.10g} vs "
            f"{val_two:.10g}")
    return val_one
