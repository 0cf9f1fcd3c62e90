"""Port-driven gradient systems: steady states, excess dual potentials, and
the structure extraction that turns a reduced excess into an effective
dissipation potential.

A port system drives a gradient system through a linear map P from a port
space Y into the state space X. A non-equilibrium steady state (NESS) at
port force eta is a pair (u, y) with

    0 = velocity(u, -DE(u)) - P y      (stationarity with through-flux)
    P* DE(u) = -eta                    (the port sees the prescribed force)

and the dissipated power <eta, y> then equals the dissipation function
Phi_*(u, -DE(u)) = <-DE(u), velocity(u, -DE(u))>.

The excess dual potential

    excess(gs, u, xi) = R*(u, xi) - R*(u, -DE(u))

vanishes along xi = -DE(u) by construction; its constrained sup-inf over
{P u = y} x {P* xi = eta} (``port_excess``) is the object whose eta-slices,
re-anchored at eta = 0, define an effective dual dissipation potential.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Tuple

import numpy as np
from scipy.optimize import minimize as _scipy_minimize

from ._numerics import fd_gradient, halton_points, newton_solve
from .errors import (ConstraintInfeasible, DomainError, ExcessFormViolation,
                     Infeasible, NewtonDivergence, NoConvergence,
                     NotNullMinimizer)
from .gradsys import DissipationPotential, EnergyFunctional, GradientSystem
from .saddle import (AffineConstraint, MinimizeOpts, SaddleOpts, SaddleProblem,
                     SaddleResult, minimize_convex, solve_saddle)
from .spaces import Space, coords


def excess(gs: GradientSystem, u, xi) -> float:
    """Excess of the dual potential over its value on the driving force:
    R*(u, xi) - R*(u, -DE(u)). Zero at xi = -DE(u) by construction."""
    u, xi = coords(u), coords(xi)
    spec = gs.dissipation
    return spec.dual(u, xi) - spec.dual(u, -gs.energy.grad(u))


def excess_tilted(gs: GradientSystem, drift: Callable[[np.ndarray], np.ndarray],
                  u, xi) -> float:
    """Excess for a gradient flow perturbed by a non-variational drift V:
    the dual potential is tilted to R*(u, .) - <., V(u)> before taking the
    excess. Reduces to ``excess`` for V = 0, and any steady state of the
    perturbed flow is a critical point with value zero."""
    u, xi = coords(u), coords(xi)
    spec = gs.dissipation
    V = np.asarray(drift(u), dtype=float)
    de = gs.energy.grad(u)
    pair = gs.space.pair
    tilted = lambda z: spec.dual(u, z) - pair(z, V)
    return tilted(xi) - tilted(-de)


@dataclass
class PortSystem:
    """A gradient system with a linear port P: Y -> X and its adjoint
    P*: X* -> Y*. When both spaces carry weights, port_out must satisfy
    <P* xi, y>_Y = <xi, P y>_X; ``check_adjoint`` probes this."""

    gs: GradientSystem
    port_in: np.ndarray
    port_out: np.ndarray
    y_space: Space
    adjoint_ports: bool = True
    name: str = "port-system"

    def __post_init__(self):
        self.port_in = np.atleast_2d(np.asarray(self.port_in, dtype=float))
        self.port_out = np.atleast_2d(np.asarray(self.port_out, dtype=float))
        nx, ny = self.port_in.shape
        if nx != self.gs.space.dim or ny != self.y_space.dim:
            raise DomainError("port_in shape does not match the two spaces")
        if self.port_out.shape != (ny, nx):
            raise DomainError("port_out shape does not match the two spaces")

    def check_adjoint(self, n: int = 20, seed: int = 0, tol: float = 1e-12) -> float:
        """Worst mismatch of <P* xi, y>_Y - <xi, P y>_X over random pairs."""
        rng = np.random.default_rng(seed)
        worst = 0.0
        for _ in range(n):
            xi = rng.standard_normal(self.gs.space.dim)
            y = rng.standard_normal(self.y_space.dim)
            lhs = self.y_space.pair(self.port_out @ xi, y)
            rhs = self.gs.space.pair(xi, self.port_in @ y)
            worst = max(worst, abs(lhs - rhs))
        if self.adjoint_ports and worst > tol:
            raise DomainError(
                f"declared adjoint ports mismatch by {worst:.3e}")
        return worst


@dataclass
class NessResult:
    state: np.ndarray
    port_flux: np.ndarray
    port_force: np.ndarray
    power: float
    residual: float
    route: str
    value: float = 0.0     # minimization-route optimal value; 0 for a NESS


def ness_residual(ps: PortSystem, u, y, eta) -> np.ndarray:
    """Stacked residual of the two steady-state equations."""
    u, y, eta = coords(u), coords(y), coords(eta)
    gs = ps.gs
    de = gs.energy.grad(u)
    r1 = gs.dissipation.velocity(u, -de) - ps.port_in @ y
    r2 = ps.port_out @ de + eta
    return np.concatenate([r1, r2])


def _ness_euler_lagrange(ps, eta, u0, tol):
    nx, ny = ps.gs.space.dim, ps.y_space.dim

    def G(z):
        return ness_residual(ps, z[:nx], z[nx:], eta)

    z0 = np.concatenate([np.asarray(u0, dtype=float), np.zeros(ny)])
    try:
        z, info = newton_solve(G, z0, tol=tol, max_iter=120)
    except NewtonDivergence as exc:
        raise NoConvergence(
            f"steady-state Newton stalled: {exc}", best=exc.best,
            residual=exc.residual) from exc
    return z[:nx], z[nx:], float(np.linalg.norm(G(z)))


def _ness_minimization(ps, eta, u0, tol):
    """Augmented-Lagrangian minimization of the null-minimizer functional
    R(u, Py) + R*(u, -DE(u)) - <eta, y> on {P* DE(u) = -eta}."""
    gs, P = ps.gs, ps.port_in
    nx, ny = gs.space.dim, ps.y_space.dim
    spec = gs.dissipation
    pair_y = ps.y_space.pair

    def objective(z):
        u, y = z[:nx], z[nx:]
        de = gs.energy.grad(u)
        return (spec.primal(u, P @ y) + spec.dual(u, -de)
                - pair_y(eta, y))

    def constraint(z):
        u = z[:nx]
        return ps.port_out @ gs.energy.grad(u) + eta

    z = np.concatenate([np.asarray(u0, dtype=float), np.zeros(ny)])
    lam = np.zeros(ny)
    rho = 10.0
    c_prev = np.inf
    for _ in range(40):
        def merit(zz):
            c = constraint(zz)
            return objective(zz) + lam @ c + 0.5 * rho * float(c @ c)

        try:
            z, _ = minimize_convex(merit, z, opts=MinimizeOpts(tol=1e-9))
        except NoConvergence as exc:
            # Damped Newton can stall on nearly flat merits; fall back to a
            # quasi-Newton pass from its best iterate.
            z0 = exc.best if exc.best is not None else z
            res = _scipy_minimize(merit, z0, method="L-BFGS-B",
                                  options={"ftol": 1e-16, "gtol": 1e-10,
                                           "maxiter": 4000})
            z = res.x
        c = constraint(z)
        cn = float(np.linalg.norm(c))
        if cn <= 1e-9:
            break
        lam = lam + rho * c
        if cn > 0.25 * c_prev:
            rho *= 2.0
        c_prev = cn
        if rho > 1e14:
            raise Infeasible(
                f"port-force constraint unreachable: residual {cn:.3e} with "
                f"penalty {rho:.1e}")
    else:
        raise Infeasible(
            f"port-force constraint not met: residual {cn:.3e}")

    val = float(objective(z))
    if val > 1e-6 * (1.0 + abs(val)) + 1e-6:
        raise NotNullMinimizer(
            f"minimization route bottomed out at {val:.6g} > 0: no steady "
            f"state at this port force")
    return z[:nx], z[nx:], val


def solve_ness(ps: PortSystem, eta, u0=None, route: str = "euler-lagrange",
               tol: float = 1e-10) -> NessResult:
    """Solve the steady-state equations at port force eta.

    route="euler-lagrange" applies Newton to the stacked equations;
    route="minimization" minimizes the Fenchel-Young surplus
    R(u, Py) + R*(u, -DE(u)) - <eta, y> over the constrained set, whose
    null-minimizers are exactly the steady states (a strictly positive
    optimum raises NotNullMinimizer). Both routes agree on the state.
    """
    eta = coords(eta)
    u0 = np.ones(ps.gs.space.dim) if u0 is None else coords(u0)
    if route == "euler-lagrange":
        u, y, res = _ness_euler_lagrange(ps, eta, u0, tol)
        val = 0.0
    elif route == "minimization":
        u, y, val = _ness_minimization(ps, eta, u0, tol)
        res = float(np.linalg.norm(ness_residual(ps, u, y, eta)))
    else:
        raise ValueError(f"unknown route {route!r}")
    power = ps.y_space.pair(eta, y)
    return NessResult(state=u, port_flux=y, port_force=eta, power=power,
                      residual=res, route=route, value=val)


def port_dual_value(ps: PortSystem, eta, cross_check: bool = False,
                    tol: float = 1e-7) -> float:
    """R_Y*(eta) = inf{ R*(xi) : P* xi = eta } for state-independent
    dissipation; by conjugate duality this equals the conjugate of
    y -> R(P y) and is independent of the energy.

    The direct constrained minimization is always used; with
    ``cross_check`` the multiplier route (via the conjugation identity) is
    run as well and disagreement raises DualityMismatch."""
    spec = ps.gs.dissipation
    if not spec.state_independent:
        raise DomainError("port_dual_value requires state-independent "
                          "dissipation; use solve_ness for the general case")
    eta = coords(eta)
    u_dummy = np.zeros(ps.gs.space.dim)
    con = AffineConstraint(ps.port_out, eta)
    xi0 = con.particular()
    xi, val = minimize_convex(lambda xi: spec.dual(u_dummy, xi), xi0,
                              constraint=con)
    if cross_check and spec.has_primal:
        from .saddle import constrained_conjugate
        other = constrained_conjugate(lambda v: spec.primal(u_dummy, v),
                                      ps.port_out, eta, tol=tol)
        # constrained_conjugate raises DualityMismatch internally if its own
        # two routes split; here we additionally compare against the direct
        # minimization.
        if abs(other - val) > tol * (1.0 + abs(val)):
            from .errors import DualityMismatch
            raise DualityMismatch(
                f"port dual potential routes disagree: {val:.10g} vs "
                f"{other:.10g}")
    return float(val)


def port_map(ps: PortSystem, eta, h0: float = 1e-5) -> np.ndarray:
    """Port flux y at force eta. For state-independent dissipation this is
    the pairing gradient of the port dual potential R_Y*; otherwise the
    steady-state solve supplies the flux."""
    eta = coords(eta)
    if ps.gs.dissipation.state_independent:
        g = fd_gradient(lambda e: port_dual_value(ps, e), eta, h0=h0)
        return g / ps.y_space.weights
    return solve_ness(ps, eta).port_flux


def _is_affine_gradient(energy: EnergyFunctional, probes: int = 3,
                        seed: int = 11, tol: float = 1e-9) -> bool:
    """Heuristic: DE is affine iff DE(u) - DE(0) is linear on probes."""
    rng = np.random.default_rng(seed)
    n = energy.space.dim
    g0 = energy.grad(np.zeros(n))
    for _ in range(probes):
        a, b = rng.standard_normal(n), rng.standard_normal(n)
        lhs = energy.grad(a + b) - g0
        rhs = (energy.grad(a) - g0) + (energy.grad(b) - g0)
        if np.linalg.norm(lhs - rhs) > tol * (1.0 + np.linalg.norm(rhs)):
            return False
    return True


def solve_steady_saddle(ps: PortSystem, eta, u0=None,
                        opts: SaddleOpts | None = None) -> SaddleResult:
    """Saddle of the excess over {u : P* DE(u) = -eta} x {xi : P* xi = eta}.

    For affine DE the state constraint is eliminated exactly; otherwise an
    augmented-multiplier loop wraps the unconstrained saddle solve. The
    converged points are steady states with xi = -DE(u) up to the solver
    tolerance, and the saddle value is zero there.
    """
    eta = coords(eta)
    gs = ps.gs
    nx = gs.space.dim
    u0 = np.ones(nx) if u0 is None else coords(u0)
    xi_con = AffineConstraint(ps.port_out, eta)

    if _is_affine_gradient(gs.energy):
        g0 = gs.energy.grad(np.zeros(nx))
        A = np.column_stack([gs.energy.grad(e) - g0 for e in np.eye(nx)])
        u_con = AffineConstraint(ps.port_out @ A, -eta - ps.port_out @ g0)
        prob = SaddleProblem(
            objective=lambda u, xi: excess(gs, u, xi),
            dim_x=nx, dim_y=nx,
            constraint_x=u_con, constraint_y=xi_con, name=f"{ps.name}-saddle")
        xi0 = xi_con.particular()
        return solve_saddle(prob, u0, xi0, opts)

    # Nonlinear DE: augment the objective with multiplier and penalty terms
    # for c(u) = P* DE(u) + eta and re-solve until the constraint closes.
    opts = opts or SaddleOpts()
    lam = np.zeros(ps.y_space.dim)
    rho = 10.0
    result = None
    c_prev = np.inf
    u_start = u0
    for _ in range(30):
        def obj(u, xi, lam=lam, rho=rho):
            c = ps.port_out @ gs.energy.grad(u) + eta
            return (excess(gs, u, xi) - lam @ c - 0.5 * rho * float(c @ c))

        prob = SaddleProblem(objective=obj, dim_x=nx, dim_y=nx,
                             constraint_y=xi_con, name=f"{ps.name}-saddle")
        result = solve_saddle(prob, u_start, xi_con.particular(), opts)
        c = ps.port_out @ gs.energy.grad(result.x_star) + eta
        cn = float(np.linalg.norm(c))
        u_start = result.x_star
        if cn <= 1e-10:
            return result
        lam = lam - rho * c
        if cn > 0.25 * c_prev:
            rho *= 2.0
        c_prev = cn
    raise Infeasible(f"steady-saddle constraint residual stuck at {cn:.3e}")


@dataclass
class NullSaddleReport:
    ok: bool
    value: float
    max_raise: float      # worst feasible competitor gain in the max slot
    max_drop: float       # worst feasible competitor drop in the min slot
    force_mismatch: float  # |xi + DE(u)|, informative only

    def __bool__(self):
        return self.ok


def is_null_saddle(gs: GradientSystem, u, xi, tol: float = 1e-8,
                   constraint_u: Optional[AffineConstraint] = None,
                   constraint_xi: Optional[AffineConstraint] = None,
                   n_probe: int = 40, radius: float = 0.5,
                   seed: int = 3) -> NullSaddleReport:
    """Probe whether (u, xi) is a null-saddle of the excess.

    Checks |excess| <= tol and the saddle inequalities against random
    feasible competitors within ``radius``. The force mismatch |xi + DE(u)|
    is reported but not required to vanish: without strict convexity of the
    dual, null-saddles off the driving force exist.
    """
    u, xi = coords(u), coords(xi)
    rng = np.random.default_rng(seed)
    val = excess(gs, u, xi)
    Nu = constraint_u.basis() if constraint_u is not None else np.eye(u.size)
    Nxi = (constraint_xi.basis() if constraint_xi is not None
           else np.eye(xi.size))

    max_raise = 0.0
    for _ in range(n_probe):
        du = Nu @ (radius * rng.standard_normal(Nu.shape[1]))
        u_try = u + du
        if gs.space.positive:
            u_try = np.maximum(u_try, 1e-10)
            u_try = u + Nu @ (Nu.T @ (u_try - u))  # stay feasible
            if np.any(u_try <= 0):
                continue
        max_raise = max(max_raise, excess(gs, u_try, xi) - val)

    max_drop = 0.0
    for _ in range(n_probe):
        dxi = Nxi @ (radius * rng.standard_normal(Nxi.shape[1]))
        max_drop = max(max_drop, val - excess(gs, u, xi + dxi))

    force_mismatch = float(np.linalg.norm(xi + gs.energy.grad(u)))
    ok = (abs(val) <= tol and max_raise <= tol and max_drop <= tol)
    return NullSaddleReport(ok=ok, value=float(val), max_raise=float(max_raise),
                            max_drop=float(max_drop),
                            force_mismatch=force_mismatch)


@dataclass
class PortExcessOpts:
    n_starts: int = 8
    start_radius: float = 2.0
    inner_tol: float = 1e-10
    outer_gtol: float = 1e-9
    outer_maxiter: int = 2000


def port_excess(gs: GradientSystem, P, P_star, y, eta,
                opts: PortExcessOpts | None = None) -> float:
    """Reduced excess: sup over {P u = y} of inf over {P* xi = eta} of
    excess(gs, u, xi). The inner problem is convex and solved by Newton on
    the eliminated coordinates; the outer sup runs multi-start quasi-Newton
    ascent. Raises Infeasible when {P u = y} is empty."""
    opts = opts or PortExcessOpts()
    P = np.atleast_2d(np.asarray(P, dtype=float))
    P_star = np.atleast_2d(np.asarray(P_star, dtype=float))
    y, eta = coords(y), coords(eta)
    spec = gs.dissipation

    try:
        u_con = AffineConstraint(P, y)
        u_p = u_con.particular()
    except ConstraintInfeasible:
        raise Infeasible("state slice {P u = y} is empty")
    Nu = u_con.basis()
    xi_con = AffineConstraint(P_star, eta)
    xi_p = xi_con.particular()

    xi_free = xi_con.basis().shape[1] > 0

    def inner_min(u):
        """Inner minimizer and value of the constrained dual at state u."""
        if not xi_free:
            return xi_p, spec.dual(u, xi_p)
        xi, v = minimize_convex(lambda xi: spec.dual(u, xi), xi_p,
                                constraint=xi_con,
                                opts=MinimizeOpts(tol=opts.inner_tol))
        return xi, v

    def inner(u):
        _, v = inner_min(u)
        return v - spec.dual(u, -gs.energy.grad(u))

    if Nu.shape[1] == 0:
        return float(inner(u_p))

    def outer_neg(a):
        return -inner(u_p + Nu @ a)

    def outer_neg_jac(a):
        # Envelope derivative: the inner minimizer is frozen, so only the
        # explicit state dependence of the excess is differenced.
        u = u_p + Nu @ a
        xi_star, _ = inner_min(u)
        frozen = lambda uu: (spec.dual(uu, xi_star)
                             - spec.dual(uu, -gs.energy.grad(uu)))
        return -(Nu.T @ fd_gradient(frozen, u))

    starts = [np.zeros(Nu.shape[1])]
    pts = halton_points(opts.n_starts - 1, Nu.shape[1])
    for q in pts:
        starts.append((2.0 * q - 1.0) * opts.start_radius)
    best = np.inf
    for a0 in starts:
        res = _scipy_minimize(outer_neg, a0, method="L-BFGS-B",
                              jac=outer_neg_jac,
                              options={"ftol": 1e-16,
                                       "gtol": opts.outer_gtol,
                                       "maxiter": opts.outer_maxiter})
        best = min(best, float(res.fun))
    return -best


def port_range_residual(ps: PortSystem, u) -> float:
    """Distance of the steady velocity from the range of the port map,
    relative to its size: zero at steady states with through-flux."""
    u = coords(u)
    v = ps.gs.dissipation.velocity(u, -ps.gs.energy.grad(u))
    y, *_ = np.linalg.lstsq(ps.port_in, v, rcond=None)
    return float(np.linalg.norm(ps.port_in @ y - v) /
                 (1.0 + np.linalg.norm(v)))


@dataclass
class ExcessFormReport:
    anchored_violation: float   # worst K(y,0) - K(y,eta) over samples
    convexity_violation: float  # worst midpoint-convexity defect in eta
    null_violation: float       # worst |K(y, -DE(y))| over samples
    ok: bool
    witness: Optional[Tuple[np.ndarray, np.ndarray]] = None


@dataclass
class ExcessForm:
    """An effective dual dissipation potential extracted from a reduced
    excess sampler K via r_eff_dual(y, eta) = K(y, eta) - K(y, 0)."""

    energy: EnergyFunctional
    r_eff_dual: Callable[[np.ndarray, np.ndarray], float]
    report: ExcessFormReport
    _base_cache: Dict[Tuple, float] = field(default_factory=dict, repr=False)


def extract_excess_form(sampler: Callable[[np.ndarray, np.ndarray], float],
                        energy: EnergyFunctional,
                        samples_y, samples_eta,
                        tol: float = 1e-6,
                        strict: bool = True) -> ExcessForm:
    """Validate the three structure conditions of a reduced excess sampler
    K and wrap it as an effective dual potential.

    Conditions: K(y, eta) >= K(y, 0) (anchored nonnegativity), midpoint
    convexity in eta, and K(y, -DE(y)) = 0 on all sampled y. With
    ``strict`` a violation raises ExcessFormViolation carrying a witness;
    otherwise the report records it and ok is False.
    """
    samples_y = [np.asarray(y, dtype=float) for y in samples_y]
    samples_eta = [np.asarray(e, dtype=float) for e in samples_eta]
    base: Dict[Tuple, float] = {}

    def base_value(y):
        key = tuple(np.round(np.asarray(y, dtype=float) / 1e-12).astype(np.int64))
        if key not in base:
            base[key] = sampler(y, np.zeros_like(np.asarray(y, dtype=float)))
        return base[key]

    anchored = -np.inf
    convexity = -np.inf
    null_v = 0.0
    witness = None
    for y in samples_y:
        b = base_value(y)
        for k, e in enumerate(samples_eta):
            v = sampler(y, e)
            if b - v > anchored:
                anchored = b - v
                if b - v > tol:
                    witness = witness or (y, e)
            e2 = samples_eta[(k + 1) % len(samples_eta)]
            mid = sampler(y, 0.5 * (e + e2))
            defect = mid - 0.5 * (v + sampler(y, e2))
            if defect > convexity:
                convexity = defect
                if defect > tol:
                    witness = witness or (y, e)
        ne = abs(sampler(y, -energy.grad(y)))
        if ne > null_v:
            null_v = ne
            if ne > tol:
                witness = witness or (y, -energy.grad(y))

    ok = anchored <= tol and convexity <= tol and null_v <= tol
    report = ExcessFormReport(anchored_violation=float(anchored),
                              convexity_violation=float(convexity),
                              null_violation=float(null_v), ok=ok,
                              witness=witness)
    if strict and not ok:
        failing = []
        if anchored > tol:
            failing.append(f"anchored nonnegativity ({anchored:.3e})")
        if convexity > tol:
            failing.append(f"eta-convexity ({convexity:.3e})")
        if null_v > tol:
            failing.append(f"null anchoring ({null_v:.3e})")
        raise ExcessFormViolation(
            "reduced excess lacks the required structure: "
            + "; ".join(failing), witness=witness)

    def r_eff_dual(y, eta):
        return sampler(y, eta) - base_value(y)

    return ExcessForm(energy=energy, r_eff_dual=r_eff_dual, report=report,
                      _base_cache=base)


@dataclass
class CriticalityReport:
    critical_point: bool
    velocity_zero: bool
    grad_norm: float
    velocity_norm: float

    @property
    def agree(self) -> bool:
        return self.critical_point == self.velocity_zero

    def __bool__(self):
        return self.critical_point and self.velocity_zero


def steady_criticality(gs: GradientSystem, u, tol: float = 1e-6,
                       h0: float = 1e-5) -> CriticalityReport:
    """Test the equivalence: (u, -DE(u)) is a critical point of the excess
    iff the steady velocity D_xi R*(u, -DE(u)) vanishes. Both sides are
    evaluated independently so the equivalence itself is checkable."""
    u = coords(u)
    xi = -gs.energy.grad(u)
    g_u = fd_gradient(lambda z: excess(gs, z, xi), u, h0=h0)
    g_xi = fd_gradient(lambda z: excess(gs, u, z), xi, h0=h0)
    grad_norm = float(np.sqrt(g_u @ g_u + g_xi @ g_xi))
    vel = gs.dissipation.velocity(u, xi)
    velocity_norm = float(np.linalg.norm(vel))
    return CriticalityReport(critical_point=grad_norm <= tol,
                             velocity_zero=velocity_norm <= tol,
                             grad_norm=grad_norm,
                             velocity_norm=velocity_norm)
