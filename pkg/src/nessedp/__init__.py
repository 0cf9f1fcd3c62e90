"""nessedp: non-equilibrium steady states and effective dissipation potentials.

Gradient systems driven through boundary ports, their steady states, and
the saddle-point reduction that turns a resolved model into an effective
dissipation potential for the slow variables.
"""

from ._kernels import BACKEND as kernel_backend
from .errors import NessedpError
from .spaces import Space, StateVector, ForceVector
from .gradsys import (DissipationPotential, EnergyFunctional, GradientSystem,
                      Trajectory, check_fenchel_triple, dissipated_power,
                      edi_residual, gradient_flow_rhs, integrate_gradient_flow,
                      legendre_conjugate, quadratic_system)

__version__ = "0.1.0"

__all__ = [
    "kernel_backend", "NessedpError", "Space", "StateVector", "ForceVector",
    "DissipationPotential", "EnergyFunctional", "GradientSystem", "Trajectory",
    "check_fenchel_triple", "dissipated_power", "edi_residual",
    "gradient_flow_rhs", "integrate_gradient_flow", "legendre_conjugate",
    "quadratic_system", "__version__",
]
