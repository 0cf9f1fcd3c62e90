# cython: language_level=3, boundscheck=False, cdivision=True
"""Compiled twin of _pure.py. Signatures and semantics must stay identical."""

from libc.math cimport cosh, sinh, sqrt, log, fabs


cpdef double boltzmann(double z) except? -1.0:
    if z < 0.0:
        raise ValueError(f"boltzmann needs z >= 0, got {z}")
    if z == 0.0:
        return 1.0
    return z * log(z) - z + 1.0


cpdef double cosh_star(double z):
    return 4.0 * cosh(0.5 * z) - 4.0


cpdef double cosh_star_prime(double z):
    return 2.0 * sinh(0.5 * z)


cpdef double cosh_pair_value(double g, double h, double rho, double z):
    return g * cosh_star(z) + h * cosh_star(rho - z)


cpdef double cosh_pair_min(double g, double h, double rho, double tol=1e-13) except? -1.0:
    cdef double lo, hi, flo, fhi, z, fz, dfz, z_new
    cdef int i
    if g < 0.0 or h < 0.0:
        raise ValueError("cosh_pair_min needs g, h >= 0")
    if g == 0.0 or h == 0.0:
        return 0.0
    if rho >= 0.0:
        lo = 0.0
        hi = rho
    else:
        lo = rho
        hi = 0.0
    flo = g * sinh(0.5 * lo) - h * sinh(0.5 * (rho - lo))
    fhi = g * sinh(0.5 * hi) - h * sinh(0.5 * (rho - hi))
    if flo > 0.0 or fhi < 0.0:
        raise ArithmeticError("bracket failure in cosh_pair_min")
    z = 0.5 * (lo + hi)
    for i in range(200):
        fz = g * sinh(0.5 * z) - h * sinh(0.5 * (rho - z))
        if fz > 0.0:
            hi = z
        else:
            lo = z
        dfz = 0.5 * (g * cosh(0.5 * z) + h * cosh(0.5 * (rho - z)))
        z_new = z - fz / dfz
        if not (lo < z_new < hi):
            z_new = 0.5 * (lo + hi)
        if fabs(z_new - z) <= tol * (1.0 + fabs(z)):
            z = z_new
            break
        z = z_new
    return cosh_pair_value(g, h, rho, z)


cpdef double cosh_pair_inf_closed(double g, double h, double rho):
    cdef double w = sqrt((g + h) * (g + h) + 0.5 * g * h * cosh_star(rho))
    return 4.0 * w - 4.0 * (g + h)


cpdef tuple four_species_rates(double a, double b, double c, double d,
                               double kappa1, double kappa2,
                               double a_ref, double b_ref, double c_ref,
                               double d_ref):
    cdef double r1 = kappa1 * (d / d_ref - a * b / (a_ref * b_ref))
    cdef double r2 = kappa2 * (c / c_ref - a * d / (a_ref * d_ref))
    return r1, r2
