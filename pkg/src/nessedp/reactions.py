"""Mass-action reaction networks with entropy energies and cosh-type dual
dissipation potentials, plus the four-species fast-intermediate family
A + B <-> D, A + D <-> C and its explicit ternary reduction.

The intermediate D is scaled as d = eps * w so its reference concentration
vanishes with eps; the remaining species (a, b, c) evolve on the slow time
scale. Everything needed for the reduction is available in closed form
here: the two-channel infimum, the concentration-dependent effective rate
kappa_eff, the steady intermediate, the reduced excess, and the effective
cosh potential. The generic network evaluators at the bottom are the
independent route used to cross-check the hand-written four-species ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from ._kernels import boltzmann, cosh_star, cosh_star_prime
from ._numerics import newton_solve
from .errors import DomainError, NoConvergence
from .gradsys import (DissipationPotential, EnergyFunctional, GradientSystem,
                      IntegratorOpts, Trajectory)
from .spaces import POSITIVITY_FLOOR, Space


def lambda_b(z: float) -> float:
    """Entropy density z log z - z + 1 (nonnegative, strictly convex,
    zero only at z = 1). Raises DomainError for z <= 0; the z -> 0 limit
    exists but concentrations of zero are outside the admissible cone."""
    if z <= 0.0:
        raise DomainError(f"entropy density needs z > 0, got {z!r}")
    return boltzmann(z)


def cstar(z: float) -> float:
    """Cosh-type dual rate profile 4 cosh(z/2) - 4."""
    return cosh_star(z)


def cstar_prime(z: float) -> float:
    return cosh_star_prime(z)


def cosh_primal(w: float) -> float:
    """Legendre transform of the cosh profile:
    C(w) = 2 w asinh(w/2) - 2 sqrt(4 + w^2) + 4 (superlinear, zero at 0)."""
    return 2.0 * w * math.asinh(0.5 * w) - 2.0 * math.sqrt(4.0 + w * w) + 4.0


def _rates_primal(weights: np.ndarray, directions: np.ndarray, v,
                  span_tol: float = 1e-8) -> float:
    """Primal dissipation of a finite cosh-type network: decompose the
    velocity along the reaction vectors and charge each channel
    weight * C(rate / weight). Velocities outside the reaction span (or
    on a dead channel) cost +inf. Degenerate decompositions fall back to
    the convex minimum over the null space."""
    S = directions.T  # species x reactions
    v = np.asarray(v, dtype=float)
    lam, _, rank, _ = np.linalg.lstsq(S, v, rcond=None)
    off = np.linalg.norm(S @ lam - v)
    if off > span_tol * (1.0 + np.linalg.norm(v)):
        return np.inf

    def channel_cost(lam):
        total = 0.0
        for r in range(lam.size):
            if weights[r] <= 0.0:
                if abs(lam[r]) > span_tol:
                    return np.inf
                continue
            total += weights[r] * cosh_primal(lam[r] / weights[r])
        return total

    if rank == S.shape[1]:
        return channel_cost(lam)
    from scipy.linalg import null_space
    from scipy.optimize import minimize as sp_minimize
    N = null_space(S)
    res = sp_minimize(lambda t: channel_cost(lam + N @ t),
                      np.zeros(N.shape[1]), method="Nelder-Mead",
                      options=dict(xatol=1e-10, fatol=1e-13))
    return float(res.fun)


def two_channel_infimum(g: float, h: float, rho: float) -> Tuple[float, float]:
    """inf over z of g*C(z) + h*C(rho - z) for the cosh profile C.

    Returns (value, W) with value = 4W - 4(g + h) and
    W = sqrt((g + h)^2 + (g h / 2) C(rho)); W is the quantity that
    reappears inside the reduced dissipation potentials."""
    if g < 0.0 or h < 0.0:
        raise DomainError("channel weights must be nonnegative")
    W = math.sqrt((g + h) ** 2 + 0.5 * g * h * cosh_star(rho))
    return 4.0 * W - 4.0 * (g + h), W


@dataclass
class FourSpecies:
    """Rate constants and detailed-balance references of the family
    A + B <-> D (rate kappa1), A + D <-> C (rate kappa2); w_ref is the
    eps-free reference of the rescaled intermediate d = eps * w."""

    kappa1: float = 1.0
    kappa2: float = 1.0
    a_ref: float = 1.0
    b_ref: float = 1.0
    c_ref: float = 1.0
    w_ref: float = 1.0

    def __post_init__(self):
        for f in ("kappa1", "kappa2", "a_ref", "b_ref", "c_ref", "w_ref"):
            if getattr(self, f) <= 0.0:
                raise DomainError(f"{f} must be positive")

    def refs4(self, eps: float) -> np.ndarray:
        return np.array([self.a_ref, self.b_ref, self.c_ref,
                         eps * self.w_ref])

    @property
    def refs3(self) -> np.ndarray:
        return np.array([self.a_ref, self.b_ref, self.c_ref])


# reaction directions (columns of the net stoichiometry, one per reaction)
STOICH_FOUR = np.array([[1.0, 1.0, 0.0, -1.0],
                        [1.0, 0.0, -1.0, 1.0]]).T
# conserved moieties: rows annihilate every reaction vector
CONSERVED_FOUR = np.array([[1.0, 0.0, 2.0, 1.0],
                           [0.0, 1.0, 1.0, 1.0]])
STOICH_TERNARY = np.array([2.0, 1.0, -1.0])
CONSERVED_TERNARY = np.array([[1.0, 0.0, 2.0],
                              [0.0, 1.0, 1.0]])


def four_species_rhs(cfg: FourSpecies, eps: float, state) -> np.ndarray:
    """Mass-action balance of the four species (a, b, c, d) at scale eps:
    r1*(1,1,0,-1) + r2*(1,0,-1,1) with the net rates r1, r2 in
    detailed-balance normalization."""
    a, b, c, d = np.asarray(state, dtype=float)
    d_ref = eps * cfg.w_ref
    r1 = cfg.kappa1 * (d / d_ref - a * b / (cfg.a_ref * cfg.b_ref))
    r2 = cfg.kappa2 * (c / cfg.c_ref - a * d / (cfg.a_ref * d_ref))
    return r1 * STOICH_FOUR[:, 0] + r2 * STOICH_FOUR[:, 1]


def four_species_dual(cfg: FourSpecies, eps: float, state, xi) -> float:
    """Cosh-type dual dissipation potential of the four-species system:
    each reaction contributes (geometric mean of its normalized
    concentrations) * C(force combination along the reaction vector)."""
    a, b, c, d = np.asarray(state, dtype=float)
    x = np.asarray(xi, dtype=float)
    ah, bh, ch, dh = (a / cfg.a_ref, b / cfg.b_ref, c / cfg.c_ref,
                      d / (eps * cfg.w_ref))
    z1 = x[0] + x[1] - x[3]
    z2 = x[0] - x[2] + x[3]
    return (cfg.kappa1 * math.sqrt(ah * bh * dh) * cosh_star(z1)
            + cfg.kappa2 * math.sqrt(ah * ch * dh) * cosh_star(z2))


def four_species_velocity(cfg: FourSpecies, eps: float, state, xi) -> np.ndarray:
    """Force-slot gradient of four_species_dual (the kinetic relation)."""
    a, b, c, d = np.asarray(state, dtype=float)
    x = np.asarray(xi, dtype=float)
    ah, bh, ch, dh = (a / cfg.a_ref, b / cfg.b_ref, c / cfg.c_ref,
                      d / (eps * cfg.w_ref))
    z1 = x[0] + x[1] - x[3]
    z2 = x[0] - x[2] + x[3]
    s1 = cfg.kappa1 * math.sqrt(ah * bh * dh) * cosh_star_prime(z1)
    s2 = cfg.kappa2 * math.sqrt(ah * ch * dh) * cosh_star_prime(z2)
    return s1 * STOICH_FOUR[:, 0] + s2 * STOICH_FOUR[:, 1]


def entropy_energy(refs, name: str = "relative-entropy") -> EnergyFunctional:
    """Relative entropy sum_i ref_i * lambda_b(u_i / ref_i) on the positive
    cone; the gradient is log(u_i / ref_i)."""
    refs = np.asarray(refs, dtype=float)
    if (refs <= 0.0).any():
        raise DomainError("entropy references must be positive")
    space = Space(dim=refs.size, positive=True, name=name)

    def value(u):
        u = np.asarray(u, dtype=float)
        if (u <= 0.0).any():
            raise DomainError("entropy defined on positive concentrations")
        return float(sum(refs[i] * boltzmann(u[i] / refs[i])
                         for i in range(refs.size)))

    def gradient(u):
        return np.log(np.asarray(u, dtype=float) / refs)

    def hessian(u):
        return np.diag(1.0 / np.asarray(u, dtype=float))

    return EnergyFunctional(value=value, gradient=gradient, hessian=hessian,
                            space=space, name=name)


def full_entropy(cfg: FourSpecies, eps: float) -> EnergyFunctional:
    return entropy_energy(cfg.refs4(eps), name="four-species-entropy")


def slow_entropy(cfg: FourSpecies) -> EnergyFunctional:
    return entropy_energy(cfg.refs3, name="ternary-entropy")


def fast_entropy(cfg: FourSpecies) -> EnergyFunctional:
    return entropy_energy([cfg.w_ref], name="intermediate-entropy")


def _four_species_weights(cfg: FourSpecies, eps: float, state) -> np.ndarray:
    a, b, c, d = np.asarray(state, dtype=float)
    ah, bh, ch, dh = (a / cfg.a_ref, b / cfg.b_ref, c / cfg.c_ref,
                      d / (eps * cfg.w_ref))
    return np.array([cfg.kappa1 * math.sqrt(ah * bh * dh),
                     cfg.kappa2 * math.sqrt(ah * ch * dh)])


def four_species_primal(cfg: FourSpecies, eps: float, state, v) -> float:
    return _rates_primal(_four_species_weights(cfg, eps, state),
                         STOICH_FOUR.T, v)


def full_gs(cfg: FourSpecies, eps: float) -> GradientSystem:
    """The four-species system at scale eps as a gradient system."""
    space = Space(dim=4, positive=True, name="four-species")
    diss = DissipationPotential(
        dual_value=lambda u, xi: four_species_dual(cfg, eps, u, xi),
        velocity_map=lambda u, xi: four_species_velocity(cfg, eps, u, xi),
        primal_value=lambda u, v: four_species_primal(cfg, eps, u, v),
        space=space, name="four-species-cosh")
    return GradientSystem(energy=full_entropy(cfg, eps), dissipation=diss,
                          space=space, name=f"four-species-eps-{eps:g}")


def kappa_eff(cfg: FourSpecies, a: float) -> float:
    """Concentration-dependent effective rate of the reduced ternary
    reaction 2A + B <-> C: the harmonic-type mean
    kappa1*kappa2*a_ref / (kappa1*a_ref + kappa2*a), decreasing in a with
    values in ]0, kappa2]."""
    if a < 0.0:
        raise DomainError("concentration must be nonnegative")
    return (cfg.kappa1 * cfg.kappa2 * cfg.a_ref
            / (cfg.kappa1 * cfg.a_ref + cfg.kappa2 * a))


def fast_steady_w(cfg: FourSpecies, U) -> float:
    """Intermediate concentration at which the fast reaction balance
    vanishes for frozen (a, b, c):
    w/w_ref = (kappa1 ab/(a_ref b_ref) + kappa2 c/c_ref)
              / (kappa1 + kappa2 a/a_ref)."""
    a, b, c = np.asarray(U, dtype=float)
    num = (cfg.kappa1 * a * b / (cfg.a_ref * cfg.b_ref)
           + cfg.kappa2 * c / cfg.c_ref)
    den = cfg.kappa1 + cfg.kappa2 * a / cfg.a_ref
    return cfg.w_ref * num / den


def ternary_rhs(cfg: FourSpecies, U) -> np.ndarray:
    """Reduced balance of 2A + B <-> C:
    kappa_eff(a) * (c/c_ref - a^2 b/(a_ref^2 b_ref)) * (2, 1, -1)."""
    a, b, c = np.asarray(U, dtype=float)
    rate = kappa_eff(cfg, a) * (c / cfg.c_ref
                                - a * a * b / (cfg.a_ref ** 2 * cfg.b_ref))
    return rate * STOICH_TERNARY


def _hats(cfg: FourSpecies, U):
    a, b, c = np.asarray(U, dtype=float)
    return a / cfg.a_ref, b / cfg.b_ref, c / cfg.c_ref


def excess_ternary(cfg: FourSpecies, U, Xi) -> float:
    """Closed-form reduced excess of the four-species family:

        kappa_eff(a) * sqrt(P r) * C(2 Xi_1 + Xi_2 - Xi_3)
        - 2 kappa_eff(a) * (sqrt(P) - sqrt(r))^2

    with P = a^2 b / (a_ref^2 b_ref) and r = c / c_ref. Vanishes at the
    steady force Xi = -DE(U) and is convex in Xi."""
    ah, bh, ch = _hats(cfg, U)
    x = np.asarray(Xi, dtype=float)
    P = ah * ah * bh
    r = ch
    k = kappa_eff(cfg, np.asarray(U, dtype=float)[0])
    rho = 2.0 * x[0] + x[1] - x[2]
    return (k * math.sqrt(P * r) * cosh_star(rho)
            - 2.0 * k * (math.sqrt(P) - math.sqrt(r)) ** 2)


def effective_ternary_dual(cfg: FourSpecies, U, Xi) -> float:
    """Effective dual potential of the reduced ternary system: the excess
    re-anchored at zero force, which collapses to the single cosh term
    kappa_eff(a) sqrt(P r) C(2 Xi_1 + Xi_2 - Xi_3)."""
    ah, bh, ch = _hats(cfg, U)
    x = np.asarray(Xi, dtype=float)
    k = kappa_eff(cfg, np.asarray(U, dtype=float)[0])
    rho = 2.0 * x[0] + x[1] - x[2]
    return k * math.sqrt(ah * ah * bh * ch) * cosh_star(rho)


def effective_ternary_velocity(cfg: FourSpecies, U, Xi) -> np.ndarray:
    ah, bh, ch = _hats(cfg, U)
    x = np.asarray(Xi, dtype=float)
    k = kappa_eff(cfg, np.asarray(U, dtype=float)[0])
    rho = 2.0 * x[0] + x[1] - x[2]
    return (k * math.sqrt(ah * ah * bh * ch) * cosh_star_prime(rho)
            * STOICH_TERNARY)


def ternary_primal(cfg: FourSpecies, U, v) -> float:
    ah, bh, ch = _hats(cfg, U)
    k = kappa_eff(cfg, np.asarray(U, dtype=float)[0])
    sigma = np.array([k * math.sqrt(ah * ah * bh * ch)])
    return _rates_primal(sigma, STOICH_TERNARY[None, :], v)


def ternary_gs(cfg: FourSpecies) -> GradientSystem:
    """The reduced ternary system (2A + B <-> C with state-dependent
    effective rate) as a gradient system."""
    space = Space(dim=3, positive=True, name="ternary")
    diss = DissipationPotential(
        dual_value=lambda U, Xi: effective_ternary_dual(cfg, U, Xi),
        velocity_map=lambda U, Xi: effective_ternary_velocity(cfg, U, Xi),
        primal_value=lambda U, v: ternary_primal(cfg, U, v),
        space=space, name="ternary-cosh")
    return GradientSystem(energy=slow_entropy(cfg), dissipation=diss,
                          space=space, name="ternary-effective")


def as_slow_fast(cfg: FourSpecies):
    """The four-species family in slow-fast product form: slow state
    (a, b, c), fast state w (the rescaled intermediate). The joint dual
    potential is eps-free in these variables."""
    from .slowfast import SlowFastSystem

    def rbar_dual(U, w, Xi, zeta):
        ah, bh, ch = _hats(cfg, U)
        wh = float(np.asarray(w, float)[0]) / cfg.w_ref
        x = np.asarray(Xi, dtype=float)
        z = float(np.asarray(zeta, float)[0])
        return (cfg.kappa1 * math.sqrt(ah * bh * wh)
                * cosh_star(x[0] + x[1] - z)
                + cfg.kappa2 * math.sqrt(ah * ch * wh)
                * cosh_star(x[0] - x[2] + z))

    def slow_velocity(U, w, Xi, zeta):
        ah, bh, ch = _hats(cfg, U)
        wh = float(np.asarray(w, float)[0]) / cfg.w_ref
        x = np.asarray(Xi, dtype=float)
        z = float(np.asarray(zeta, float)[0])
        s1 = cfg.kappa1 * math.sqrt(ah * bh * wh) * cosh_star_prime(
            x[0] + x[1] - z)
        s2 = cfg.kappa2 * math.sqrt(ah * ch * wh) * cosh_star_prime(
            x[0] - x[2] + z)
        return np.array([s1 + s2, s1, -s2])

    def fast_velocity(U, w, Xi, zeta):
        ah, bh, ch = _hats(cfg, U)
        wh = float(np.asarray(w, float)[0]) / cfg.w_ref
        x = np.asarray(Xi, dtype=float)
        z = float(np.asarray(zeta, float)[0])
        s1 = cfg.kappa1 * math.sqrt(ah * bh * wh) * cosh_star_prime(
            x[0] + x[1] - z)
        s2 = cfg.kappa2 * math.sqrt(ah * ch * wh) * cosh_star_prime(
            x[0] - x[2] + z)
        return np.array([-s1 + s2])

    return SlowFastSystem(case="product", slow_energy=slow_entropy(cfg),
                          fast_energy=fast_entropy(cfg),
                          rbar_dual=rbar_dual, slow_velocity=slow_velocity,
                          fast_velocity=fast_velocity,
                          name="four-species-slow-fast")


@dataclass
class ReactionNetwork:
    """General mass-action network in detailed-balance normalization.

    alpha, beta: (reactions x species) reactant and product orders;
    kappa: per-reaction rates; c_ref: positive reference concentrations
    satisfying detailed balance."""

    alpha: np.ndarray
    beta: np.ndarray
    kappa: np.ndarray
    c_ref: np.ndarray

    def __post_init__(self):
        self.alpha = np.atleast_2d(np.asarray(self.alpha, dtype=float))
        self.beta = np.atleast_2d(np.asarray(self.beta, dtype=float))
        self.kappa = np.atleast_1d(np.asarray(self.kappa, dtype=float))
        self.c_ref = np.atleast_1d(np.asarray(self.c_ref, dtype=float))
        r, n = self.alpha.shape
        if self.beta.shape != (r, n) or self.kappa.shape != (r,) \
                or self.c_ref.shape != (n,):
            raise DomainError("inconsistent network shapes")
        if (self.kappa <= 0).any() or (self.c_ref <= 0).any():
            raise DomainError("rates and references must be positive")
        if (self.alpha < 0).any() or (self.beta < 0).any():
            raise DomainError("stoichiometric orders must be nonnegative")

    @property
    def n_reactions(self) -> int:
        return self.alpha.shape[0]

    @property
    def n_species(self) -> int:
        return self.alpha.shape[1]

    @property
    def directions(self) -> np.ndarray:
        """Net reaction vectors alpha - beta, one row per reaction (the
        balance moves along +direction when the backward channel wins)."""
        return self.alpha - self.beta


def mass_action_rhs(net: ReactionNetwork, conc) -> np.ndarray:
    """sum_r kappa_r (chat^beta_r - chat^alpha_r) (alpha_r - beta_r) with
    chat = conc / c_ref."""
    ch = np.asarray(conc, dtype=float) / net.c_ref
    if (ch <= 0).any():
        raise DomainError("concentrations must be positive")
    fw = np.prod(ch[None, :] ** net.alpha, axis=1)
    bw = np.prod(ch[None, :] ** net.beta, axis=1)
    return (net.kappa * (bw - fw)) @ net.directions


def network_dual(net: ReactionNetwork, conc, xi) -> float:
    """Cosh-type dual potential: sum over reactions of
    kappa_r sqrt(chat^(alpha_r + beta_r)) C(xi . (alpha_r - beta_r))."""
    ch = np.asarray(conc, dtype=float) / net.c_ref
    if (ch <= 0).any():
        raise DomainError("concentrations must be positive")
    x = np.asarray(xi, dtype=float)
    geo = np.sqrt(np.prod(ch[None, :] ** (net.alpha + net.beta), axis=1))
    z = net.directions @ x
    return float(sum(net.kappa[r] * geo[r] * cosh_star(z[r])
                     for r in range(net.n_reactions)))


def network_velocity(net: ReactionNetwork, conc, xi) -> np.ndarray:
    ch = np.asarray(conc, dtype=float) / net.c_ref
    x = np.asarray(xi, dtype=float)
    geo = np.sqrt(np.prod(ch[None, :] ** (net.alpha + net.beta), axis=1))
    z = net.directions @ x
    s = np.array([net.kappa[r] * geo[r] * cosh_star_prime(z[r])
                  for r in range(net.n_reactions)])
    return s @ net.directions


def network_entropy(net: ReactionNetwork) -> EnergyFunctional:
    return entropy_energy(net.c_ref, name="network-entropy")


def network_primal(net: ReactionNetwork, conc, v) -> float:
    ch = np.asarray(conc, dtype=float) / net.c_ref
    geo = np.sqrt(np.prod(ch[None, :] ** (net.alpha + net.beta), axis=1))
    return _rates_primal(net.kappa * geo, net.directions, v)


def network_gs(net: ReactionNetwork) -> GradientSystem:
    space = Space(dim=net.n_species, positive=True, name="network")
    diss = DissipationPotential(
        dual_value=lambda u, xi: network_dual(net, u, xi),
        velocity_map=lambda u, xi: network_velocity(net, u, xi),
        primal_value=lambda u, v: network_primal(net, u, v),
        space=space, name="network-cosh")
    return GradientSystem(energy=network_entropy(net), dissipation=diss,
                          space=space, name="network")


def four_species_network(cfg: FourSpecies, eps: float) -> ReactionNetwork:
    """The four-species family expressed as a generic network (the
    independent route for cross-checking the hand-written evaluators)."""
    return ReactionNetwork(
        alpha=[[1.0, 1.0, 0.0, 0.0], [1.0, 0.0, 0.0, 1.0]],
        beta=[[0.0, 0.0, 0.0, 1.0], [0.0, 0.0, 1.0, 0.0]],
        kappa=[cfg.kappa1, cfg.kappa2],
        c_ref=cfg.refs4(eps))


def integrate_network(net: ReactionNetwork, conc0, T: float,
                      opts: Optional[IntegratorOpts] = None,
                      energy: Optional[EnergyFunctional] = None) -> Trajectory:
    """Implicit-Euler integration in reaction-extent coordinates.

    Each step solves for the extent vector e with
    u_next = u + directions^T e and e = dt * rate(u_next), so every
    accepted state differs from the previous one by an exact combination
    of reaction vectors: moiety invariants are conserved to round-off no
    matter how stiff the rates are. Steps are rejected (and halved) on
    Newton failure, positivity loss, or entropy increase."""
    opts = opts or IntegratorOpts()
    energy = energy or network_entropy(net)
    V = net.directions
    u = np.asarray(conc0, dtype=float).copy()
    if (u <= 0).any():
        raise DomainError("initial concentrations must be positive")

    def rate(ucur):
        ch = ucur / net.c_ref
        fw = np.prod(ch[None, :] ** net.alpha, axis=1)
        bw = np.prod(ch[None, :] ** net.beta, axis=1)
        return net.kappa * (bw - fw)

    times = [0.0]
    states = [u.copy()]
    velocities = []
    energies = [energy(u)]
    t, dt = 0.0, opts.dt_init
    newton_iters = 0
    rejected = 0
    for _ in range(opts.max_steps):
        if t >= T * (1.0 - 1e-12):
            break
        dt = min(dt, T - t)

        def F(e, u=u, dt=dt):
            un = u + V.T @ e
            if (un <= POSITIVITY_FLOOR).any():
                return e * np.inf  # force rejection through Newton failure
            return e - dt * rate(un)

        try:
            e, info = newton_solve(F, np.zeros(net.n_reactions),
                                   tol=opts.newton_tol, max_iter=40)
            newton_iters += info["iterations"]
        except NoConvergence:
            dt *= 0.5
            rejected += 1
            if dt < opts.dt_min:
                raise
            continue
        un = u + V.T @ e
        if (un <= POSITIVITY_FLOOR).any():
            dt *= 0.5
            rejected += 1
            continue
        en = energy(un)
        if en > energies[-1] + opts.energy_tol:
            dt *= 0.5
            rejected += 1
            continue
        velocities.append((un - u) / dt)
        u = un
        t += dt
        times.append(t)
        states.append(u.copy())
        energies.append(en)
        dt = min(dt * opts.grow_factor, opts.dt_max)
    if t < T * (1.0 - 1e-12) and T > 0:
        raise NoConvergence("step budget exhausted before reaching T",
                            best=states[-1], residual=T - t)
    return Trajectory(times=np.array(times), states=np.array(states),
                      velocities=np.array(velocities),
                      energies=np.array(energies),
                      newton_iters=newton_iters, rejected_steps=rejected,
                      name="network-extents")


def integrate_four_species(cfg: FourSpecies, eps: float, state0, T: float,
                           opts: Optional[IntegratorOpts] = None) -> Trajectory:
    """Stiff four-species integration (extent coordinates); the initial
    step is capped at eps/10 to resolve the fast layer."""
    opts = opts or IntegratorOpts()
    run = IntegratorOpts(**{**opts.__dict__,
                            "dt_init": min(opts.dt_init, eps / 10.0)})
    return integrate_network(four_species_network(cfg, eps), state0, T, run,
                             energy=full_entropy(cfg, eps))


def integrate_ternary(cfg: FourSpecies, U0, T: float,
                      opts: Optional[IntegratorOpts] = None) -> Trajectory:
    """Reduced ternary integration in its single extent coordinate, with
    the state-dependent effective rate."""
    opts = opts or IntegratorOpts()
    energy = slow_entropy(cfg)
    u = np.asarray(U0, dtype=float).copy()

    times = [0.0]
    states = [u.copy()]
    velocities = []
    energies = [energy(u)]
    t, dt = 0.0, opts.dt_init
    newton_iters = 0
    rejected = 0
    for _ in range(opts.max_steps):
        if t >= T * (1.0 - 1e-12):
            break
        dt = min(dt, T - t)

        def F(e, u=u, dt=dt):
            un = u + STOICH_TERNARY * e[0]
            if (un <= POSITIVITY_FLOOR).any():
                return e * np.inf
            a, b, c = un
            rate = kappa_eff(cfg, a) * (
                c / cfg.c_ref - a * a * b / (cfg.a_ref ** 2 * cfg.b_ref))
            return e - dt * np.array([rate])

        try:
            e, info = newton_solve(F, np.zeros(1), tol=opts.newton_tol,
                                   max_iter=40)
            newton_iters += info["iterations"]
        except NoConvergence:
            dt *= 0.5
            rejected += 1
            if dt < opts.dt_min:
                raise
            continue
        un = u + STOICH_TERNARY * e[0]
        if (un <= POSITIVITY_FLOOR).any():
            dt *= 0.5
            rejected += 1
            continue
        en = energy(un)
        if en > energies[-1] + opts.energy_tol:
            dt *= 0.5
            rejected += 1
            continue
        velocities.append((un - u) / dt)
        u = un
        t += dt
        times.append(t)
        states.append(u.copy())
        energies.append(en)
        dt = min(dt * opts.grow_factor, opts.dt_max)
    if t < T * (1.0 - 1e-12) and T > 0:
        raise NoConvergence("step budget exhausted before reaching T",
                            best=states[-1], residual=T - t)
    return Trajectory(times=np.array(times), states=np.array(states),
                      velocities=np.array(velocities),
                      energies=np.array(energies),
                      newton_iters=newton_iters, rejected_steps=rejected,
                      name="ternary-extents")
