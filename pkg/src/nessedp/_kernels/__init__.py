"""Scalar kernels used inside the inner loops.

Two interchangeable backends: a Cython extension ``_core`` and a pure-Python
``_pure`` module with identical signatures. The compiled one is preferred when
it imported cleanly; set ``NESSEDP_PURE=1`` to force the fallback (used by the
benchmark and by tests that exercise both).
"""

import os

if os.environ.get("NESSEDP_PURE", "") == "1":
    from . import _pure as _impl

    BACKEND = "pure"
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        from . import _pure as _impl

        BACKEND = "pure"

boltzmann = _impl.boltzmann
cosh_star = _impl.cosh_star
cosh_star_prime = _impl.cosh_star_prime
cosh_pair_value = _impl.cosh_pair_value
cosh_pair_min = _impl.cosh_pair_min
cosh_pair_inf_closed = _impl.cosh_pair_inf_closed
four_species_rates = _impl.four_species_rates

__all__ = [
    "BACKEND",
    "boltzmann",
    "cosh_star",
    "cosh_star_prime",
    "cosh_pair_value",
    "cosh_pair_min",
    "cosh_pair_inf_closed",
    "four_species_rates",
]
