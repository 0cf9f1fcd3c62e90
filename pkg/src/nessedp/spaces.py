"""Finite-dimensional state and force spaces with weighted duality pairings.

A space is R^n together with strictly positive quadrature weights; the pairing
between a force xi and a velocity v is sum_i w_i * xi_i * v_i. Discretized
fields use cell widths as weights so that functional gradients coincide with
pointwise variational derivatives; plain ODE systems use unit weights.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

POSITIVITY_FLOOR = 1e-12


@dataclass
class Space:
    """Descriptor of a coordinate space.

    Parameters
    ----------
    dim : int
        Number of coordinates.
    weights : array, optional
        Strictly positive pairing weights; defaults to ones.
    positive : bool
        Whether states in this space must stay strictly positive
        (entropy-driven concentrations and densities).
    name : str
        Label used in error messages.
    """

    dim: int
    weights: np.ndarray | None = None
    positive: bool = False
    name: str = "state"

    def __post_init__(self):
        if self.dim <= 0:
            raise DomainError(f"space {self.name!r}: dim must be positive")
        if self.weights is None:
            self.weights = np.ones(self.dim)
        else:
            self.weights = np.asarray(self.weights, dtype=float)
            if self.weights.shape != (self.dim,):
                raise DomainError(
                    f"space {self.name!r}: weights shape {self.weights.shape} "
                    f"does not match dim {self.dim}")
            if np.any(self.weights <= 0):
                raise DomainError(f"space {self.name!r}: weights must be > 0")

    def pair(self, xi, v) -> float:
        """Duality pairing <xi, v>."""
        return float(np.dot(self.weights * np.asarray(xi), np.asarray(v)))

    def norm(self, v) -> float:
        return float(np.sqrt(self.pair(v, v)))

    def check_state(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape != (self.dim,):
            raise DomainError(
                f"space {self.name!r}: state shape {u.shape}, expected ({self.dim},)")
        if self.positive and np.any(u < POSITIVITY_FLOOR):
            raise DomainError(
                f"space {self.name!r}: positive state has coordinate "
                f"{u.min():.3e} below floor {POSITIVITY_FLOOR:g}")
        return u


@dataclass(frozen=True)
class StateVector:
    """A validated point of a state space."""

    coords: np.ndarray
    space: Space

    def __post_init__(self):
        object.__setattr__(self, "coords", self.space.check_state(self.coords))


@dataclass(frozen=True)
class ForceVector:
    """A validated covector (thermodynamic force) of a state space."""

    coords: np.ndarray
    space: Space
    dual_of: str = ""

    def __post_init__(self):
        xi = np.asarray(self.coords, dtype=float)
        if xi.shape != (self.space.dim,):
            raise DomainError(
                f"force on {self.space.name!r}: shape {xi.shape}, "
                f"expected ({self.space.dim},)")
        object.__setattr__(self, "coords", xi)


def coords(x) -> np.ndarray:
    """Accept a raw array, StateVector or ForceVector and return the array."""
    if isinstance(x, (StateVector, ForceVector)):
        return x.coords
    return np.asarray(x, dtype=float)
