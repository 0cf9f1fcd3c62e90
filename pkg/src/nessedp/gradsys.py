"""Gradient systems: energies, dissipation potentials, flows and their audits.

A gradient system couples an energy functional E on a state space with a
state-dependent dissipation potential given through its convex dual R*. The
induced evolution is

    du/dt = (d/dxi) R*(u, -DE(u)),

and solutions are exactly the curves that saturate the energy-dissipation
inequality: E(u(T)) + integral of [R(u, du/dt) + R*(u, -DE(u))] <= E(u(0)).
This module provides the building blocks, a numeric Legendre transform, an
energy-monotone implicit Euler integrator, and the inequality residual used
to audit trajectories.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from ._numerics import fd_gradient, golden_section_min, newton_solve
from .errors import (DomainError, MissingPrimal, StepUnderflow, Unbounded,
                     NewtonDivergence)
from .spaces import POSITIVITY_FLOOR, Space, coords


@dataclass
class EnergyFunctional:
    """An energy E on a state space.

    ``gradient`` must return the variational derivative with respect to the
    space's weighted pairing (so that directional derivatives are
    d/ds E(u + s*du) = <DE(u), du>). A central-difference fallback is used
    when it is omitted.
    """

    value: Callable[[np.ndarray], float]
    space: Space
    gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None
    hessian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    convex: bool = True
    name: str = "energy"

    def __call__(self, u) -> float:
        return float(self.value(coords(u)))

    def grad(self, u) -> np.ndarray:
        u = coords(u)
        if self.gradient is not None:
            return np.asarray(self.gradient(u), dtype=float)
        return fd_gradient(self.value, u) / self.space.weights


@dataclass
class DissipationPotential:
    """A dissipation potential specified through its dual R*(u, xi).

    ``dual_value(u, xi)`` is required; it must be convex in xi with value 0
    and minimum at xi = 0. ``velocity_map(u, xi)`` returns the pairing
    gradient of R* in its force slot (the kinetic relation); finite
    differences are used when it is omitted. ``primal_value(u, v)`` is
    optional; the numeric Legendre transform can stand in for it.
    """

    dual_value: Callable[[np.ndarray, np.ndarray], float]
    space: Space
    velocity_map: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    primal_value: Optional[Callable[[np.ndarray, np.ndarray], float]] = None
    state_independent: bool = False
    strictly_convex_dual: bool = True
    name: str = "dissipation"

    def dual(self, u, xi) -> float:
        return float(self.dual_value(coords(u), coords(xi)))

    def velocity(self, u, xi) -> np.ndarray:
        u, xi = coords(u), coords(xi)
        if self.velocity_map is not None:
            return np.asarray(self.velocity_map(u, xi), dtype=float)
        return fd_gradient(lambda z: self.dual_value(u, z), xi) / self.space.weights

    def primal(self, u, v) -> float:
        if self.primal_value is None:
            raise MissingPrimal(
                f"{self.name}: no primal form available; pass one explicitly "
                "or use legendre_conjugate on the dual")
        return float(self.primal_value(coords(u), coords(v)))

    @property
    def has_primal(self) -> bool:
        return self.primal_value is not None


@dataclass
class GradientSystem:
    energy: EnergyFunctional
    dissipation: DissipationPotential
    space: Space
    name: str = "gradient-system"


@dataclass
class Trajectory:
    """Output of the implicit Euler integrator.

    ``velocities[k]`` is the difference-quotient velocity of the step from
    ``times[k]`` to ``times[k+1]``; energies are recorded at the nodes.
    """

    times: np.ndarray
    states: np.ndarray
    velocities: np.ndarray
    energies: np.ndarray
    newton_iters: list = field(default_factory=list)
    rejected_steps: int = 0
    name: str = ""

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def interpolate(self, t: float) -> np.ndarray:
        """Piecewise-linear interpolant at time t (clamped to the span)."""
        t = float(np.clip(t, self.times[0], self.times[-1]))
        k = int(np.searchsorted(self.times, t, side="right") - 1)
        k = min(max(k, 0), len(self.times) - 2)
        t0, t1 = self.times[k], self.times[k + 1]
        w = 0.0 if t1 == t0 else (t - t0) / (t1 - t0)
        return (1.0 - w) * self.states[k] + w * self.states[k + 1]


@dataclass
class LegendreOpts:
    """Search-box options for the numeric Legendre transform."""

    box: Optional[float] = None      # halfwidth; auto-scaled when None
    tol: float = 1e-11
    max_enlarge: int = 4
    n_starts: int = 3
    growth_tol: float = 1e-8


def _maximize_concave(obj, dim: int, box: float, tol: float, n_starts: int):
    """Maximize a concave-ish objective on [-box, box]^dim; returns (x, value)."""
    if dim == 1:
        x, neg = golden_section_min(lambda z: -obj(np.array([z])), -box, box,
                                    tol=tol)
        return np.array([x]), -neg
    from scipy.optimize import minimize

    best_x, best_v = None, -np.inf
    starts = [np.zeros(dim)]
    if n_starts > 1:
        from ._numerics import halton_points

        starts += list((2.0 * halton_points(n_starts - 1, dim) - 1.0) * 0.5 * box)
    for x0 in starts:
        res = minimize(lambda z: -obj(z), x0, method="L-BFGS-B",
                       bounds=[(-box, box)] * dim,
                       options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": 500})
        if -res.fun > best_v:
            best_x, best_v = res.x, -res.fun
    return best_x, best_v


def legendre_conjugate(spec: DissipationPotential, u, arg, side: str = "dual",
                       opts: LegendreOpts | None = None) -> float:
    """Numerically evaluate a Legendre transform of the dissipation potential.

    side="primal": conjugate of the primal R(u, .) at the force ``arg``,
    i.e. sup_v <arg, v> - R(u, v). Requires a primal form.

    side="dual": conjugate of the dual R*(u, .) at the velocity ``arg``,
    i.e. sup_xi <xi, arg> - R*(u, xi), recovering the primal at ``arg``.

    The supremum is searched on a box that is enlarged a few times if the
    maximizer sticks to its boundary; if the value keeps growing there the
    transform is declared Unbounded.
    """
    opts = opts or LegendreOpts()
    u = coords(u)
    arg = coords(arg)
    space = spec.space
    if side == "primal":
        if spec.primal_value is None:
            raise MissingPrimal(f"{spec.name}: primal side requested but absent")
        f = lambda x: spec.primal_value(u, x)
    elif side == "dual":
        f = lambda x: spec.dual_value(u, x)
    else:
        raise ValueError(f"side must be 'primal' or 'dual', got {side!r}")

    obj = lambda x: space.pair(arg, x) - f(x)
    box = opts.box if opts.box is not None else 10.0 * (1.0 + float(np.max(np.abs(arg))))
    prev_val = None
    for _ in range(opts.max_enlarge + 1):
        x, val = _maximize_concave(obj, space.dim, box, opts.tol, opts.n_starts)
        at_edge = np.any(np.abs(np.abs(x) - box) <= 1e-6 * box)
        if not at_edge:
            return float(val)
        if prev_val is not None and val - prev_val <= opts.growth_tol * (1.0 + abs(val)):
            return float(val)
        prev_val = val
        box *= 4.0
    raise Unbounded(
        f"legendre_conjugate: maximizer pinned to the search box (|x| ~ {box / 4:.3g}) "
        f"with value still growing; last value {prev_val:.6g}")


@dataclass
class FenchelReport:
    """Residuals of the three equivalent statements of a conjugate pair."""

    young_residual: float                 # R + R* - <xi, v>  (>= 0 in theory)
    dual_grad_residual: Optional[float]   # |v - velocity(u, xi)|
    primal_grad_residual: Optional[float]  # |xi - d/dv R(u, v)|
    consistent: bool


def check_fenchel_triple(spec: DissipationPotential, u, v, xi,
                         tol: float = 1e-8) -> FenchelReport:
    """Check whether (v, xi) is a conjugate pair of R(u, .) at the state u.

    Three equivalent statements are probed: the Young equality
    R + R* = <xi, v>, the dual gradient route v = velocity(u, xi), and the
    primal gradient route xi = d/dv R(u, v). The primal route is skipped
    (reported None) at points where one-sided differences disagree, i.e.
    where the primal is not differentiable and only a subdifferential
    statement holds.
    """
    u, v, xi = coords(u), coords(v), coords(xi)
    space = spec.space
    young = None
    if spec.has_primal:
        young = spec.primal(u, v) + spec.dual(u, xi) - space.pair(xi, v)
    vel = spec.velocity(u, xi)
    dual_res = space.norm(v - vel)
    primal_res = None
    if spec.has_primal:
        dR = _one_sided_gradient(lambda z: spec.primal_value(u, z), v)
        if dR is not None:
            primal_res = space.norm(xi - dR / space.weights)
    residuals = [r for r in (young, dual_res, primal_res) if r is not None]
    consistent = all(abs(r) <= tol for r in residuals)
    return FenchelReport(
        young_residual=young if young is not None else np.nan,
        dual_grad_residual=dual_res,
        primal_grad_residual=primal_res,
        consistent=consistent)


def _one_sided_gradient(f, x, h0: float = 1e-6, kink_tol: float = 1e-3):
    """Central-difference gradient, or None when forward and backward slopes
    disagree enough to flag a kink."""
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    f0 = f(x)
    scale = 1.0 + abs(f0)
    for i in range(x.size):
        h = h0 * (1.0 + abs(x[i]))
        e = np.zeros_like(x)
        e[i] = h
        fwd = (f(x + e) - f0) / h
        bwd = (f0 - f(x - e)) / h
        if abs(fwd - bwd) > kink_tol * (1.0 + abs(fwd) + abs(bwd)) * scale:
            return None
        g[i] = 0.5 * (fwd + bwd)
    return g


def gradient_flow_rhs(gs: GradientSystem, u) -> np.ndarray:
    """Velocity of the flow at state u: the kinetic map at force -DE(u)."""
    u = coords(u)
    return gs.dissipation.velocity(u, -gs.energy.grad(u))


def dissipated_power(spec, u, xi) -> float:
    """Instantaneous dissipation <xi, velocity(u, xi)>; nonnegative for
    convex duals minimized at zero force. Accepts a GradientSystem or a
    bare DissipationPotential."""
    if isinstance(spec, GradientSystem):
        spec = spec.dissipation
    u, xi = coords(u), coords(xi)
    return spec.space.pair(xi, spec.velocity(u, xi))


@dataclass
class IntegratorOpts:
    dt_init: float = 1e-2
    dt_min: float = 1e-14
    dt_max: float = np.inf
    newton_tol: float = 1e-12
    max_steps: int = 200_000
    energy_tol: float = 1e-12
    grow_after: int = 2      # consecutive accepts before the step grows
    grow_factor: float = 1.5
    rhs: Optional[Callable[[np.ndarray], np.ndarray]] = None
    jac: Optional[Callable[[np.ndarray, float], np.ndarray]] = None


def integrate_gradient_flow(gs: GradientSystem, u0, t_final: float,
                            opts: IntegratorOpts | None = None) -> Trajectory:
    """Implicit Euler with damped Newton and energy-monotone step acceptance.

    Each step solves u_new = u_old + dt * rhs(u_new). A step is rejected and
    halved when Newton fails, when the energy increases beyond a roundoff
    allowance, or when a positivity-constrained state leaves its domain.
    After a run of accepted steps the step size grows back geometrically.

    Raises StepUnderflow when halving reaches ``dt_min``.
    """
    opts = opts or IntegratorOpts()
    space = gs.space
    u = space.check_state(coords(u0))
    rhs = opts.rhs if opts.rhs is not None else (lambda x: gradient_flow_rhs(gs, x))

    times = [0.0]
    states = [u.copy()]
    velocities = []
    energies = [float(gs.energy.value(u))]
    newton_iters = []
    rejected = 0

    dt = min(opts.dt_init, opts.dt_max, t_final)
    t = 0.0
    accepts_in_row = 0
    rhs_scale = max(1.0, float(np.linalg.norm(u)))

    for _ in range(opts.max_steps):
        if t >= t_final - 1e-14 * t_final:
            break
        dt = min(dt, t_final - t)
        u_prev = u

        def G(x):
            return x - u_prev - dt * np.asarray(rhs(x))

        jac = None
        if opts.jac is not None:
            jac = lambda x: opts.jac(x, dt)
        try:
            u_new, info = newton_solve(G, u_prev, jac=jac, tol=opts.newton_tol,
                                       scale=rhs_scale)
            ok = True
        except NewtonDivergence:
            ok = False
        if ok and space.positive and np.any(u_new < POSITIVITY_FLOOR):
            ok = False
        if ok:
            e_prev = energies[-1]
            e_new = float(gs.energy.value(u_new))
            if e_new > e_prev + opts.energy_tol * (1.0 + abs(e_prev)):
                ok = False
        if not ok:
            rejected += 1
            accepts_in_row = 0
            dt *= 0.5
            if dt < opts.dt_min:
                raise StepUnderflow(
                    f"step fell below {opts.dt_min:g} at t = {t:.6g}")
            continue

        velocities.append((u_new - u_prev) / dt)
        t += dt
        u = u_new
        times.append(t)
        states.append(u.copy())
        energies.append(e_new)
        newton_iters.append(info["iterations"])
        accepts_in_row += 1
        if accepts_in_row >= opts.grow_after:
            dt = min(dt * opts.grow_factor, opts.dt_max)
            accepts_in_row = 0

    if t < t_final * (1.0 - 1e-12) and t_final > 0:
        raise StepUnderflow(f"max_steps = {opts.max_steps} exhausted at t = {t:.6g}")

    return Trajectory(times=np.array(times), states=np.array(states),
                      velocities=np.array(velocities), energies=np.array(energies),
                      newton_iters=newton_iters, rejected_steps=rejected,
                      name=gs.name)


def edi_residual(gs: GradientSystem, traj: Trajectory,
                 primal: Optional[Callable[[np.ndarray, np.ndarray], float]] = None
                 ) -> float:
    """Energy-dissipation inequality residual of a discrete trajectory.

    Computes E(u(T)) - E(u(0)) + trapezoidal quadrature of
    R(u, du/dt) + R*(u, -DE(u)) along the trajectory. For exact solutions
    with exact quadrature this is zero; discrete implicit Euler output tends
    to it from below as steps refine, while perturbed curves give strictly
    positive values (Fenchel-Young gap).
    """
    spec = gs.dissipation
    if primal is None:
        if not spec.has_primal:
            raise MissingPrimal(
                "edi_residual needs a primal dissipation form; none on the "
                "potential and none passed in")
        primal = spec.primal_value

    total = 0.0
    for k in range(len(traj.velocities)):
        dt = traj.times[k + 1] - traj.times[k]
        v = traj.velocities[k]
        f0 = _edi_integrand(gs, primal, traj.states[k], v)
        f1 = _edi_integrand(gs, primal, traj.states[k + 1], v)
        total += 0.5 * dt * (f0 + f1)
    return float(traj.energies[-1] - traj.energies[0] + total)


def _edi_integrand(gs, primal, u, v):
    xi = -gs.energy.grad(u)
    return float(primal(u, v)) + gs.dissipation.dual(u, xi)


# ---------------------------------------------------------------------------
# Stock systems used across modules and tests


def quadratic_system(A, ell=None, K=None, space: Space | None = None,
                     name: str = "quadratic") -> GradientSystem:
    """E(u) = (1/2)<u, A u> - <ell, u> with R*(xi) = (1/2)<xi, K xi>.

    A must be symmetric; K symmetric positive semidefinite. The primal form
    is attached when K is invertible.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[0]
    if A.shape != (n, n) or not np.allclose(A, A.T, atol=1e-12):
        raise DomainError("quadratic_system: A must be square symmetric")
    ell = np.zeros(n) if ell is None else np.asarray(ell, dtype=float)
    K = np.eye(n) if K is None else np.atleast_2d(np.asarray(K, dtype=float))
    space = space or Space(dim=n, name=name)
    W = np.diag(space.weights)

    energy = EnergyFunctional(
        value=lambda u: 0.5 * float(u @ W @ (A @ u)) - float(ell @ W @ u),
        gradient=lambda u: A @ u - ell,
        hessian=lambda u: A.copy(),
        space=space, name=f"{name}-energy")

    primal = None
    try:
        K_inv = np.linalg.inv(K)
        primal = lambda u, v: 0.5 * float(v @ W @ (K_inv @ v))
    except np.linalg.LinAlgError:
        pass

    spec = DissipationPotential(
        dual_value=lambda u, xi: 0.5 * float(xi @ W @ (K @ xi)),
        velocity_map=lambda u, xi: K @ xi,
        primal_value=primal,
        state_independent=True,
        space=space, name=f"{name}-dissipation")
    return GradientSystem(energy=energy, dissipation=spec, space=space, name=name)


def l1_tikhonov_dissipation(sigma: float, nu: float, space: Space
                            ) -> DissipationPotential:
    """R(v) = sigma*|v|_1 + (nu/2)*|v|_2^2 and its smooth shrinkage dual
    R*(xi) = sum (1/(2 nu)) max(|xi_i| - sigma, 0)^2. Unit weights assumed."""
    if sigma < 0 or nu <= 0:
        raise DomainError("l1_tikhonov_dissipation needs sigma >= 0, nu > 0")
    if not np.allclose(space.weights, 1.0):
        raise DomainError("l1_tikhonov_dissipation assumes unit weights")

    def dual(u, xi):
        s = np.maximum(np.abs(xi) - sigma, 0.0)
        return float(np.sum(s * s) / (2.0 * nu))

    def vel(u, xi):
        return np.sign(xi) * np.maximum(np.abs(xi) - sigma, 0.0) / nu

    def primal(u, v):
        return float(sigma * np.sum(np.abs(v)) + 0.5 * nu * np.sum(v * v))

    return DissipationPotential(
        dual_value=dual, velocity_map=vel, primal_value=primal,
        state_independent=True, strictly_convex_dual=False,
        space=space, name="l1-tikhonov")
