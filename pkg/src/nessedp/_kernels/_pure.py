"""Pure-Python reference implementation of the scalar kernels.

Kept dependency-free apart from ``math`` so it mirrors the compiled extension
one to one; array callers wrap these with ``numpy`` where needed.
"""

import math


def boltzmann(z: float) -> float:
    """Entropy density z*log(z) - z + 1, extended by continuity to z = 0."""
    if z < 0.0:
        raise ValueError(f"boltzmann needs z >= 0, got {z}")
    if z == 0.0:
        return 1.0
    return z * math.log(z) - z + 1.0


def cosh_star(z: float) -> float:
    """Cosh-type dual rate profile 4*cosh(z/2) - 4 (even, convex, zero at 0)."""
    return 4.0 * math.cosh(0.5 * z) - 4.0


def cosh_star_prime(z: float) -> float:
    return 2.0 * math.sinh(0.5 * z)


def cosh_pair_value(g: float, h: float, rho: float, z: float) -> float:
    """The two-channel objective g*C(z) + h*C(rho - z) with C = cosh_star."""
    return g * cosh_star(z) + h * cosh_star(rho - z)


def cosh_pair_min(g: float, h: float, rho: float, tol: float = 1e-13) -> float:
    """Minimum over z of g*C(z) + h*C(rho - z), computed numerically.

    Newton on the stationarity condition g*sinh(z/2) = h*sinh((rho-z)/2),
    with bisection safeguarding. This is the independent oracle for the
    closed form ``cosh_pair_inf_closed``; it must not call it.
    """
    if g < 0.0 or h < 0.0:
        raise ValueError("cosh_pair_min needs g, h >= 0")
    if g == 0.0 and h == 0.0:
        return 0.0
    if g == 0.0:
        return 0.0  # pick z = rho, both terms vanish
    if h == 0.0:
        return 0.0
    # f'(z) = 2 g sinh(z/2) - 2 h sinh((rho-z)/2); strictly increasing in z.
    lo, hi = (0.0, rho) if rho >= 0.0 else (rho, 0.0)
    flo = g * math.sinh(0.5 * lo) - h * math.sinh(0.5 * (rho - lo))
    fhi = g * math.sinh(0.5 * hi) - h * math.sinh(0.5 * (rho - hi))
    if flo > 0.0 or fhi < 0.0:  # pragma: no cover - cannot happen for g,h > 0
        raise ArithmeticError("bracket failure in cosh_pair_min")
    z = 0.5 * (lo + hi)
    for _ in range(200):
        fz = g * math.sinh(0.5 * z) - h * math.sinh(0.5 * (rho - z))
        if fz > 0.0:
            hi = z
        else:
            lo = z
        dfz = 0.5 * (g * math.cosh(0.5 * z) + h * math.cosh(0.5 * (rho - z)))
        step = fz / dfz
        z_new = z - step
        if not (lo < z_new < hi):
            z_new = 0.5 * (lo + hi)
        if abs(z_new - z) <= tol * (1.0 + abs(z)):
            z = z_new
            break
        z = z_new
    return cosh_pair_value(g, h, rho, z)


def cosh_pair_inf_closed(g: float, h: float, rho: float) -> float:
    """Closed form of the two-channel infimum: 4*W - 4*(g + h) with
    W = sqrt((g + h)^2 + (g*h/2)*cosh_star(rho))."""
    w = math.sqrt((g + h) ** 2 + 0.5 * g * h * cosh_star(rho))
    return 4.0 * w - 4.0 * (g + h)


def four_species_rates(a: float, b: float, c: float, d: float,
                       kappa1: float, kappa2: float,
                       a_ref: float, b_ref: float, c_ref: float,
                       d_ref: float) -> tuple:
    """Net forward rates of the two elementary reactions
    A + B <-> D and A + D <-> C, in detailed-balance normalization.

    Returns (r1, r2) with r1 = kappa1*(d/d_ref - a*b/(a_ref*b_ref)) and
    r2 = kappa2*(c/c_ref - a*d/(a_ref*d_ref)); the species balance is
    rhs = r1*(1, 1, 0, -1) + r2*(1, 0, -1, 1).
    """
    r1 = kappa1 * (d / d_ref - a * b / (a_ref * b_ref))
    r2 = kappa2 * (c / c_ref - a * d / (a_ref * d_ref))
    return r1, r2
