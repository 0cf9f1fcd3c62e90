"""Diffusion across a thin low-mobility layer in one dimension.

The physical domain ]-1-eps, 1+eps[ carries a layer ]-eps, eps[ whose
mobility is scaled by eps. Piecewise-affine coordinate maps relate it to
the fixed reference interval [-2, 2], where the layer becomes the fast
region [-1, 1] of a slow-fast split. Provided here:

* profile and grid containers with interface bookkeeping,
* conservative finite-volume assembly of the eps-family and of the
  limiting transmission problem, whose interface flux is proportional to
  the jump of A*u with a conductance obtained by quadrature,
* entropic (state-weighted) dissipation evaluators and the effective
  interface coefficients of the layer reduction, including the closed
  saddle value and an independent boundary-value oracle,
* sorption variants where a reaction with the background survives inside
  the layer and produces two extra single-sided interface channels,
* the effective slow system in all three structures, and a general
  reaction-diffusion right-hand side with spatially varying references.

Interface trace conventions: the layer-reduction formulas use the limits
of the coefficients taken from inside [-1, 1]; the effective slow system
uses the limits from the slow side. The two coincide exactly when the
energy coefficient is continuous across the interface, which is also the
condition for the reduced excess to vanish at the equilibrium force.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import simpson
from scipy.linalg import LinAlgError, eigh, null_space, solve_banded
from scipy.optimize import minimize

from ._kernels import cosh_star, cosh_star_prime
from .errors import (BVPSingular, DomainError, GridMismatch, OutOfDomain,
                     SingularCoefficient, WronskianDrift)
from .gradsys import (DissipationPotential, EnergyFunctional, GradientSystem,
                      Trajectory)
from .reactions import ReactionNetwork, cosh_primal, lambda_b, mass_action_rhs
from .spaces import Space, coords

_REGIONS = ("left", "mid", "right")


def _as_piece(spec) -> Callable[[float], np.ndarray | float]:
    """Coerce a piece description (constant, matrix, polynomial coefficient
    list, or callable) into a callable of the spatial coordinate."""
    if callable(spec):
        return spec
    arr = np.asarray(spec, dtype=float)
    if arr.ndim == 0:
        val = float(arr)
        return lambda x, _v=val: _v
    if arr.ndim == 1:
        co = arr.copy()
        return lambda x, _c=co: float(np.polynomial.polynomial.polyval(x, _c))
    if arr.ndim == 2:
        mat = arr.copy()
        return lambda x, _m=mat: _m
    raise DomainError(f"cannot interpret coefficient piece {spec!r}")


@dataclass
class PiecewiseCoefficient:
    """A coefficient on [-2,-1] u [-1,1] u [1,2], one continuous piece per
    closed subinterval so that one-sided limits at the interfaces are plain
    evaluations of the adjacent piece."""

    left: Callable[[float], np.ndarray | float]
    mid: Callable[[float], np.ndarray | float]
    right: Callable[[float], np.ndarray | float]
    name: str = "coefficient"

    def piece(self, region: str) -> Callable:
        if region not in _REGIONS:
            raise DomainError(f"unknown region {region!r}")
        return getattr(self, region)

    def __call__(self, x: float):
        """Evaluate at an interior point; the layer piece wins on [-1, 1].
        Use ``one_sided`` to resolve the ambiguity at exactly +-1."""
        if x < -2.0 - 1e-12 or x > 2.0 + 1e-12:
            raise OutOfDomain(f"{self.name}: x = {x!r} outside [-2, 2]")
        if x < -1.0:
            return self.left(x)
        if x <= 1.0:
            return self.mid(x)
        return self.right(x)

    def one_sided(self, x0: float, side: int):
        """Limit at x0 in {-1, +1} from the given side (side < 0 means from
        below). Evaluates the closed-interval piece at its endpoint."""
        if x0 == 1.0:
            return self.mid(1.0) if side < 0 else self.right(1.0)
        if x0 == -1.0:
            return self.left(-1.0) if side < 0 else self.mid(-1.0)
        raise DomainError(f"one-sided limits are tracked at +-1, not {x0!r}")


def _coerce_coefficient(spec, name: str) -> PiecewiseCoefficient:
    if isinstance(spec, PiecewiseCoefficient):
        return spec
    if isinstance(spec, tuple) and len(spec) == 3:
        l, m, r = spec
        return PiecewiseCoefficient(_as_piece(l), _as_piece(m), _as_piece(r),
                                    name=name)
    f = _as_piece(spec)
    return PiecewiseCoefficient(f, f, f, name=name)


_PROBE = {"left": np.linspace(-2.0, -1.0, 241),
          "mid": np.linspace(-1.0, 1.0, 241),
          "right": np.linspace(1.0, 2.0, 241)}


@dataclass
class MembraneProfile:
    """Coefficient triple (A_bar, B_bar, K_bar) of the layer problem.

    A_bar weights the energy density, K_bar the mobility, and B_bar an
    optional background-exchange rate. A_bar and K_bar must be uniformly
    positive definite (checked on a fine probe grid); B_bar must be
    nonnegative and scalar. Scalar and square-matrix values are supported;
    the species count is inferred from A_bar.
    """

    A_bar: PiecewiseCoefficient
    B_bar: PiecewiseCoefficient
    K_bar: PiecewiseCoefficient
    dim: int = field(init=False, default=1)

    def __post_init__(self):
        self.A_bar = _coerce_coefficient(self.A_bar, "A_bar")
        self.B_bar = _coerce_coefficient(self.B_bar, "B_bar")
        self.K_bar = _coerce_coefficient(self.K_bar, "K_bar")
        probe = np.asarray(self.A_bar.mid(0.0), dtype=float)
        self.dim = 1 if probe.ndim == 0 else probe.shape[0]
        for coef, kind in ((self.A_bar, "pd"), (self.K_bar, "pd"),
                           (self.B_bar, "nonneg")):
            self._validate(coef, kind)

    def _validate(self, coef: PiecewiseCoefficient, kind: str):
        for region in _REGIONS:
            f = coef.piece(region)
            for x in _PROBE[region]:
                v = np.asarray(f(float(x)), dtype=float)
                if kind == "nonneg":
                    if v.ndim != 0:
                        raise DomainError(
                            f"{coef.name}: must be scalar-valued")
                    if v < 0.0:
                        raise DomainError(
                            f"{coef.name}: negative value {float(v):.3e} "
                            f"at x = {x:.4f}")
                    continue
                if v.ndim == 0:
                    if self.dim != 1 or v <= 0.0:
                        raise DomainError(
                            f"{coef.name}: needs a positive "
                            f"{self.dim}x{self.dim} value at x = {x:.4f}")
                else:
                    if v.shape != (self.dim, self.dim) \
                            or not np.allclose(v, v.T, atol=1e-12):
                        raise DomainError(
                            f"{coef.name}: value at x = {x:.4f} is not a "
                            f"symmetric {self.dim}x{self.dim} matrix")
                    if np.linalg.eigvalsh(v).min() <= 0.0:
                        raise DomainError(
                            f"{coef.name}: not positive definite "
                            f"at x = {x:.4f}")

    @classmethod
    def constants(cls, a=1.0, b=0.0, k=1.0) -> "MembraneProfile":
        return cls(_coerce_coefficient(a, "A_bar"),
                   _coerce_coefficient(b, "B_bar"),
                   _coerce_coefficient(k, "K_bar"))

    @classmethod
    def from_tables(cls, table: dict) -> "MembraneProfile":
        """Build a profile from a configuration mapping. Each of the keys
        "A", "B", "K" maps to either a single piece description or a
        mapping with "left"/"mid"/"right" entries; a piece description is
        a number or an ascending polynomial coefficient list."""
        def one(key, default):
            spec = table.get(key, default)
            if isinstance(spec, dict):
                missing = [r for r in _REGIONS if r not in spec]
                if missing:
                    raise DomainError(
                        f"coefficient {key!r}: missing regions {missing}")
                return tuple(spec[r] for r in _REGIONS)
            return spec
        return cls(_coerce_coefficient(one("A", 1.0), "A_bar"),
                   _coerce_coefficient(one("B", 0.0), "B_bar"),
                   _coerce_coefficient(one("K", 1.0), "K_bar"))

    def require_scalar(self, op: str):
        if self.dim != 1:
            raise DomainError(f"{op}: needs a scalar profile, "
                              f"got {self.dim} species")


# ---------------------------------------------------------------------------
# coordinate maps between the physical and the reference interval

def _check_eps(eps: float):
    if not (eps > 0.0):
        raise DomainError(f"layer half-width must be positive, got {eps!r}")


def psi_eps(x, eps: float):
    """Map the reference interval [-2, 2] onto [-1-eps, 1+eps]; affine on
    each of the three pieces and compressing [-1, 1] onto [-eps, eps]."""
    _check_eps(eps)
    arr = np.asarray(x, dtype=float)
    if np.any(arr < -2.0 - 1e-12) or np.any(arr > 2.0 + 1e-12):
        raise OutOfDomain(f"psi_eps: input outside [-2, 2]")
    out = np.where(arr >= 1.0, arr + eps - 1.0,
                   np.where(arr <= -1.0, arr - eps + 1.0, eps * arr))
    return float(out) if arr.ndim == 0 else out


def phi_eps(y, eps: float):
    """Inverse of psi_eps, stretching [-eps, eps] back onto [-1, 1]."""
    _check_eps(eps)
    arr = np.asarray(y, dtype=float)
    lim = 1.0 + eps
    if np.any(arr < -lim - 1e-12) or np.any(arr > lim + 1e-12):
        raise OutOfDomain(f"phi_eps: input outside [{-lim}, {lim}]")
    out = np.where(arr >= eps, arr - eps + 1.0,
                   np.where(arr <= -eps, arr + eps - 1.0, arr / eps))
    return float(out) if arr.ndim == 0 else out


# ---------------------------------------------------------------------------
# grids

@dataclass
class Grid1D:
    """Cell-centered grid on one contiguous interval. ``interfaces`` lists
    coordinates that must coincide exactly with cell edges; they mark where
    the layer meets the bulk."""

    edges: np.ndarray
    domain: str = "omega"
    interfaces: Tuple[float, ...] = ()
    eps: Optional[float] = None

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=float)
        if self.edges.ndim != 1 or self.edges.size < 2 \
                or np.any(np.diff(self.edges) <= 0.0):
            raise GridMismatch("edges must be strictly increasing")
        for p in self.interfaces:
            if not np.any(self.edges == p):
                raise GridMismatch(
                    f"interface {p!r} does not coincide with a cell edge")

    @property
    def n_cells(self) -> int:
        return self.edges.size - 1

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    def edge_index(self, p: float) -> int:
        idx = np.nonzero(self.edges == p)[0]
        if idx.size == 0:
            raise GridMismatch(f"{p!r} is not an edge of this grid")
        return int(idx[0])

    def interface_cells(self, p: float) -> Tuple[Optional[int], Optional[int]]:
        """Cells hugging the interface edge: (left cell, right cell), with
        None on a side that falls outside the grid."""
        k = self.edge_index(p)
        return (k - 1 if k > 0 else None,
                k if k < self.n_cells else None)


def membrane_grid(eps: float, n_per: int) -> Grid1D:
    """Grid on ]-1-eps, 1+eps[ with n_per cells per subinterval and edges
    exactly at the layer boundary +-eps."""
    _check_eps(eps)
    edges = np.concatenate([
        np.linspace(-1.0 - eps, -eps, n_per + 1),
        np.linspace(-eps, eps, n_per + 1)[1:],
        np.linspace(eps, 1.0 + eps, n_per + 1)[1:]])
    return Grid1D(edges, domain="omega-eps", interfaces=(-eps, eps), eps=eps)


def omega_grid(n_per: int) -> Grid1D:
    """Grid on the reference interval [-2, 2] with edges at +-1."""
    edges = np.concatenate([
        np.linspace(-2.0, -1.0, n_per + 1),
        np.linspace(-1.0, 1.0, n_per + 1)[1:],
        np.linspace(1.0, 2.0, n_per + 1)[1:]])
    return Grid1D(edges, domain="omega", interfaces=(-1.0, 1.0))


def slow_grids(n_per: int) -> Tuple[Grid1D, Grid1D]:
    """The two bulk grids [-2, -1] and [1, 2] flanking the interface."""
    gl = Grid1D(np.linspace(-2.0, -1.0, n_per + 1), domain="slow-left",
                interfaces=(-1.0,))
    gr = Grid1D(np.linspace(1.0, 2.0, n_per + 1), domain="slow-right",
                interfaces=(1.0,))
    return gl, gr


def fast_grid(n_per: int) -> Grid1D:
    return Grid1D(np.linspace(-1.0, 1.0, n_per + 1), domain="fast",
                  interfaces=(-1.0, 1.0))


# ---------------------------------------------------------------------------
# coefficient sampling at cell centers

def _region_at(x: float, lo: float, hi: float) -> str:
    return "left" if x < lo else ("mid" if x < hi else "right")


def _sample(profile: MembraneProfile, grid: Grid1D):
    """Per-cell coefficient matrices (n, d, d) for A and K plus the scalar
    vector (n,) for B. On a physical grid the layer scaling of the
    mobility and of the exchange rate is applied; on reference grids the
    raw pieces are used."""
    d = profile.dim
    centers = grid.centers
    n = centers.size
    A = np.empty((n, d, d))
    K = np.empty((n, d, d))
    B = np.empty(n)
    physical = grid.eps is not None
    lo, hi = (-grid.eps, grid.eps) if physical else (-1.0, 1.0)
    for j, y in enumerate(centers):
        region = _region_at(y, lo, hi)
        x = phi_eps(y, grid.eps) if physical else y
        a = np.asarray(profile.A_bar.piece(region)(x), dtype=float)
        k = np.asarray(profile.K_bar.piece(region)(x), dtype=float)
        b = float(profile.B_bar.piece(region)(x))
        if physical and region == "mid":
            k = k * grid.eps
            b = b / grid.eps
        A[j] = a if a.ndim == 2 else a * np.eye(d)
        K[j] = k if k.ndim == 2 else k * np.eye(d)
        B[j] = b
    return A, K, B


def _harmonic(k1: np.ndarray, k2: np.ndarray) -> np.ndarray:
    h = 2.0 * np.linalg.inv(np.linalg.inv(k1) + np.linalg.inv(k2))
    return 0.5 * (h + h.T)


def _bulk_matrices(centers, widths, A, K):
    """Block energy matrix and the positive-semidefinite face form G with
    R*(xi) = 0.5 xi^T G xi; no-flux ends, harmonic face mobilities."""
    n, d = A.shape[0], A.shape[1]
    nd = n * d
    Ablk = np.zeros((nd, nd))
    G = np.zeros((nd, nd))
    for j in range(n):
        Ablk[j * d:(j + 1) * d, j * d:(j + 1) * d] = A[j]
    for f in range(n - 1):
        df = centers[f + 1] - centers[f]
        g = _harmonic(K[f], K[f + 1]) / df
        s0, s1 = slice(f * d, (f + 1) * d), slice((f + 1) * d, (f + 2) * d)
        G[s0, s0] += g
        G[s1, s1] += g
        G[s0, s1] -= g
        G[s1, s0] -= g
    return Ablk, G


def _lazy_pinv_primal(G: np.ndarray, w: np.ndarray):
    """Primal form v -> 0.5 <v, G^+ (Wv)> for a singular quadratic dual;
    off-range velocities (mass-creating) evaluate to +inf."""
    cache = {}

    def primal(u, v):
        P = cache.get("pinv")
        if P is None:
            P = np.linalg.pinv(G, rcond=1e-12)
            cache["pinv"] = P
        t = w * np.asarray(v, dtype=float)
        xi = P @ t
        if np.linalg.norm(G @ xi - t) > 1e-8 * (1.0 + np.linalg.norm(t)):
            return float("inf")
        return 0.5 * float(t @ xi)

    return primal


def _quadratic_gs(Ablk, G, w, name: str, grid=None) -> GradientSystem:
    space = Space(dim=w.size, weights=w, name=name)
    energy = EnergyFunctional(
        value=lambda u: 0.5 * float(u @ (w * (Ablk @ u))),
        gradient=lambda u: Ablk @ u,
        hessian=lambda u: Ablk.copy(),
        space=space, name=f"{name}-energy")
    diss = DissipationPotential(
        dual_value=lambda u, xi: 0.5 * float(xi @ (G @ xi)),
        velocity_map=lambda u, xi: (G @ xi) / w,
        primal_value=_lazy_pinv_primal(G, w),
        state_independent=True,
        space=space, name=f"{name}-dissipation")
    gs = GradientSystem(energy=energy, dissipation=diss, space=space,
                        name=name)
    gs.grid = grid
    gs.matrices = (Ablk, G)
    return gs


def assemble_quadratic_pde(profile: MembraneProfile, eps: float,
                           n_per: int) -> GradientSystem:
    """Finite-volume semidiscretization of the layer family on the physical
    interval, as a gradient system with quadratic energy and quadratic
    force potential. The no-flux row sums make every discrete flow conserve
    total mass exactly; faces at +-eps take the harmonic mean across the
    mobility jump."""
    if n_per < 16:
        raise GridMismatch(
            f"need at least 16 cells per subinterval, got {n_per}")
    grid = membrane_grid(eps, n_per)
    A, K, _ = _sample(profile, grid)
    Ablk, G = _bulk_matrices(grid.centers, grid.widths, A, K)
    w = np.repeat(grid.widths, profile.dim)
    return _quadratic_gs(Ablk, G, w, f"layer-pde-eps-{eps:g}", grid=grid)


# ---------------------------------------------------------------------------
# quadratures for the interface coefficients

def _adaptive_simpson(f, a: float, b: float, tol: float = 1e-10,
                      max_depth: int = 48, seed: int = 8) -> np.ndarray:
    """Adaptive Simpson quadrature for scalar or array-valued integrands.
    The local tolerance is held fixed under subdivision so that bounded
    jumps inside the interval terminate."""
    def rec(x0, x2, f0, f1, f2, whole, depth):
        x1 = 0.5 * (x0 + x2)
        xl, xr = 0.5 * (x0 + x1), 0.5 * (x1 + x2)
        fl, fr = np.asarray(f(xl), float), np.asarray(f(xr), float)
        h = x1 - x0
        left = (h / 3.0) * (f0 + 4.0 * fl + f1)
        right = (h / 3.0) * (f1 + 4.0 * fr + f2)
        err = np.max(np.abs(left + right - whole))
        if err <= 15.0 * tol or depth >= max_depth:
            return left + right + (left + right - whole) / 15.0
        return (rec(x0, x1, f0, fl, f1, left, depth + 1)
                + rec(x1, x2, f1, fr, f2, right, depth + 1))

    xs = np.linspace(a, b, seed + 1)
    total = None
    for x0, x2 in zip(xs[:-1], xs[1:]):
        xm = 0.5 * (x0 + x2)
        f0, f1, f2 = (np.asarray(f(t), float) for t in (x0, xm, x2))
        whole = ((x2 - x0) / 6.0) * (f0 + 4.0 * f1 + f2)
        part = rec(x0, x2, f0, f1, f2, whole, 0)
        total = part if total is None else total + part
    return total


def transmission_hk(profile: MembraneProfile, tol: float = 1e-10):
    """Interface conductance of the quadratic structure: the inverse of the
    layer resistance integral of K_bar^{-1} over [-1, 1]. Depends on the
    mobility only, never on the energy coefficient."""
    d = profile.dim
    kmid = profile.K_bar.mid

    def integrand(x):
        k = np.asarray(kmid(float(x)), dtype=float)
        if d == 1:
            kv = float(k)
            if not (kv > 1e-14):
                raise SingularCoefficient(
                    f"K_bar({x:.4f}) = {kv:.3e} is not invertible")
            return 1.0 / kv
        if np.linalg.eigvalsh(k).min() <= 1e-14:
            raise SingularCoefficient(
                f"K_bar({x:.4f}) is not invertible")
        return np.linalg.inv(k)

    I = _adaptive_simpson(integrand, -1.0, 1.0, tol=tol)
    if d == 1:
        return 1.0 / float(I)
    H = np.linalg.inv(I)
    return 0.5 * (H + H.T)


def otto_keff(profile: MembraneProfile, tol: float = 1e-10) -> float:
    """Interface coefficient of the entropic structure: inverse of the
    integral of A_bar/K_bar over the layer. Unlike the quadratic
    conductance this sees the energy coefficient."""
    profile.require_scalar("otto_keff")
    amid, kmid = profile.A_bar.mid, profile.K_bar.mid

    def integrand(x):
        k = float(kmid(float(x)))
        if not (k > 1e-14):
            raise SingularCoefficient(
                f"K_bar({x:.4f}) = {k:.3e} is not invertible")
        return float(amid(float(x))) / k

    return 1.0 / float(_adaptive_simpson(integrand, -1.0, 1.0, tol=tol))


# ---------------------------------------------------------------------------
# linear evolution and the limiting transmission problem

def _linear_trajectory(Ablk, G, w, u0, times, name: str) -> Trajectory:
    """Exact-in-time evolution of u' = -W^{-1} G A u through the symmetric
    eigendecomposition in the energy-weighted metric."""
    nd = w.size
    d = Ablk.shape[0] // (nd // Ablk.shape[0]) if False else None
    # blockwise square root of A in the cell-weighted metric
    n_blocks = nd // (Ablk.shape[0] // nd * nd) if False else None
    # A is block diagonal; extract block size from the first nonzero row
    blk = 1
    while blk < nd and np.any(Ablk[0, blk:]):
        blk += 1
    P = np.zeros_like(Ablk)
    Pinv = np.zeros_like(Ablk)
    for j in range(0, nd, blk):
        s = slice(j, j + blk)
        lam, Q = eigh(Ablk[s, s])
        if lam.min() <= 0.0:
            raise DomainError("energy block not positive definite")
        sq = Q @ np.diag(np.sqrt(lam)) @ Q.T
        isq = Q @ np.diag(1.0 / np.sqrt(lam)) @ Q.T
        root_w = math.sqrt(w[j])
        P[s, s] = sq * root_w
        Pinv[s, s] = isq / root_w
    D = Pinv * w[None, :] if False else None
    Dm = np.zeros_like(Ablk)
    for j in range(0, nd, blk):
        s = slice(j, j + blk)
        Dm[s, s] = P[s, s] / w[j]
    S = Dm @ G @ Dm.T
    S = 0.5 * (S + S.T)
    lam, Q = eigh(S)
    lam = np.clip(lam, 0.0, None)
    z0 = P @ np.asarray(u0, dtype=float)
    c0 = Q.T @ z0
    times = np.asarray(times, dtype=float)
    states = np.empty((times.size, nd))
    for i, t in enumerate(times):
        states[i] = Pinv @ (Q @ (np.exp(-lam * t) * c0))
    dt = np.diff(times)
    vels = (states[1:] - states[:-1]) / dt[:, None]
    energies = np.array([0.5 * float(u @ (w * (Ablk @ u))) for u in states])
    return Trajectory(times=times, states=states, velocities=vels,
                      energies=energies, name=name)


def _limit_matrices(profile: MembraneProfile, n_per: int):
    """Matrices of the transmission problem on the two bulk grids, with the
    interface face built by ghost elimination: the jump conductance is the
    series composition of the layer conductance and the two half-cells, so
    the flux enters both neighbor cells antisymmetrically."""
    gl, gr = slow_grids(n_per)
    Al, Kl, _ = _sample(profile, gl)
    Ar, Kr, _ = _sample(profile, gr)
    A = np.concatenate([Al, Ar])
    d = profile.dim
    n = 2 * n_per
    centers = np.concatenate([gl.centers, gr.centers])
    widths = np.concatenate([gl.widths, gr.widths])
    Ablk = np.zeros((n * d, n * d))
    G = np.zeros((n * d, n * d))
    Ab_l, G_l = _bulk_matrices(gl.centers, gl.widths, Al, Kl)
    Ab_r, G_r = _bulk_matrices(gr.centers, gr.widths, Ar, Kr)
    half = n_per * d
    Ablk[:half, :half], Ablk[half:, half:] = Ab_l, Ab_r
    G[:half, :half], G[half:, half:] = G_l, G_r
    hk = transmission_hk(profile)
    hk_mat = np.atleast_2d(hk) if d == 1 else hk
    hL, hR = gl.widths[-1], gr.widths[0]
    C = np.linalg.inv(np.linalg.inv(hk_mat)
                      + 0.5 * hL * np.linalg.inv(Kl[-1])
                      + 0.5 * hR * np.linalg.inv(Kr[0]))
    C = 0.5 * (C + C.T)
    s0 = slice((n_per - 1) * d, n_per * d)
    s1 = slice(n_per * d, (n_per + 1) * d)
    G[s0, s0] += C
    G[s1, s1] += C
    G[s0, s1] -= C
    G[s1, s0] -= C
    w = np.repeat(widths, d)
    aux = {"grids": (gl, gr), "hk": hk, "C": C,
           "K_trace": (Kl[-1], Kr[0]), "h_trace": (hL, hR),
           "A": A, "centers": centers}
    return Ablk, G, w, aux


def solve_limit_quadratic(profile: MembraneProfile, U0, T: float,
                          n_per: int, times=None) -> Trajectory:
    """Evolve the transmission problem on [-2,-1] u [1,2]: bulk diffusion
    with no-flux outer ends and an interface flux proportional to the jump
    of A*u across the (collapsed) layer. U0 is a flat vector over left
    cells then right cells, or a callable of the cell center."""
    Ablk, G, w, aux = _limit_matrices(profile, n_per)
    d = profile.dim
    if callable(U0):
        vals = np.array([U0(x) for x in aux["centers"]], dtype=float)
        u0 = vals.reshape(-1) if d > 1 else vals
    else:
        u0 = np.asarray(U0, dtype=float).reshape(-1)
    if u0.size != w.size:
        raise GridMismatch(
            f"U0 has {u0.size} entries, expected {w.size}")
    if times is None:
        times = np.linspace(0.0, T, 33)
    traj = _linear_trajectory(Ablk, G, w, u0, times, "transmission-limit")
    traj.grids = aux["grids"]
    traj.hk = aux["hk"]
    return traj


def interface_traces(profile: MembraneProfile, U, n_per: int, hk=None):
    """Reconstruct the one-sided interface values of A*u and the interface
    flux from a transmission-problem state by ghost elimination. The
    returned triple (mu_minus, mu_plus, flux) satisfies
    flux = hk (mu_plus - mu_minus) exactly."""
    d = profile.dim
    gl, gr = slow_grids(n_per)
    Al, Kl, _ = _sample(profile, gl)
    Ar, Kr, _ = _sample(profile, gr)
    u = np.asarray(U, dtype=float).reshape(2 * n_per, d)
    mu_l = Al[-1] @ u[n_per - 1]
    mu_r = Ar[0] @ u[n_per]
    if hk is None:
        hk = transmission_hk(profile)
    hk_mat = np.atleast_2d(hk) if d == 1 else hk
    hL, hR = gl.widths[-1], gr.widths[0]
    R = (np.linalg.inv(hk_mat) + 0.5 * hL * np.linalg.inv(Kl[-1])
         + 0.5 * hR * np.linalg.inv(Kr[0]))
    J = np.linalg.solve(R, mu_r - mu_l)
    mu_minus = mu_l + 0.5 * hL * (np.linalg.inv(Kl[-1]) @ J)
    mu_plus = mu_r - 0.5 * hR * (np.linalg.inv(Kr[0]) @ J)
    if d == 1:
        return float(mu_minus[0]), float(mu_plus[0]), float(J[0])
    return mu_minus, mu_plus, J


# ---------------------------------------------------------------------------
# entropic structure: state-weighted dissipation evaluators

def _scalar_fields(profile: MembraneProfile, grid: Grid1D):
    A, K, B = _sample(profile, grid)
    return A[:, 0, 0], K[:, 0, 0], B


def otto_dual_r(u, xi, profile: MembraneProfile, grid: Grid1D) -> float:
    """Dual dissipation of the entropic structure: the face sum discretizing
    the integral of (K/2) |grad xi|^2 u. Linear in u, quadratic in xi, and
    zero for constant forces. Admits u = 0 cells."""
    profile.require_scalar("otto_dual_r")
    a, k, _ = _scalar_fields(profile, grid)
    u = np.asarray(u, dtype=float)
    xi = np.asarray(xi, dtype=float)
    if u.size != grid.n_cells or xi.size != grid.n_cells:
        raise GridMismatch("field length does not match the grid")
    c = grid.centers
    df = np.diff(c)
    kf = 2.0 * k[:-1] * k[1:] / (k[:-1] + k[1:])
    uf = 0.5 * (u[:-1] + u[1:])
    return float(np.sum(0.5 * kf * uf * (np.diff(xi) / df) ** 2 * df))


def otto_slope(u, profile: MembraneProfile, grid: Grid1D) -> float:
    """Dissipation of the entropic flow at the natural force, written in
    the square-root variable so that vanishing densities are admissible:
    2 * integral of (K/A) |d/dx sqrt(A u)|^2."""
    profile.require_scalar("otto_slope")
    a, k, _ = _scalar_fields(profile, grid)
    u = np.asarray(u, dtype=float)
    if u.size != grid.n_cells:
        raise GridMismatch("field length does not match the grid")
    if np.any(u < 0.0):
        raise DomainError("density must be nonnegative")
    s = np.sqrt(a * u)
    kap = k / a
    kf = 2.0 * kap[:-1] * kap[1:] / (kap[:-1] + kap[1:])
    df = np.diff(grid.centers)
    return float(np.sum(2.0 * kf * (np.diff(s) / df) ** 2 * df))


# ---------------------------------------------------------------------------
# the layer reduction: closed saddle value and boundary-value oracle

def _inner_traces(profile: MembraneProfile) -> Tuple[float, float]:
    a_minus = float(np.asarray(profile.A_bar.one_sided(-1.0, +1)))
    a_plus = float(np.asarray(profile.A_bar.one_sided(1.0, -1)))
    return a_minus, a_plus


def membrane_saddle_value(w_minus: float, w_plus: float, zeta_minus: float,
                          zeta_plus: float,
                          profile: MembraneProfile) -> float:
    """Closed form of the layer reduction for the entropic structure
    without background exchange: a single cosh channel across the
    interface, anchored so that equal boundary potentials with equal
    energy densities give zero. The energy weights are the one-sided
    limits of A_bar from inside the layer."""
    profile.require_scalar("membrane_saddle_value")
    if w_minus <= 0.0 or w_plus <= 0.0:
        raise DomainError("boundary densities must be positive")
    a_minus, a_plus = _inner_traces(profile)
    keff = otto_keff(profile)
    vm, vp = a_minus * w_minus, a_plus * w_plus
    cross = math.sqrt(vm * vp)
    return (keff * cross * cosh_star(zeta_plus - zeta_minus)
            - 2.0 * keff * (math.sqrt(vp) - math.sqrt(vm)) ** 2)


def _tridiag_bvp(kf: np.ndarray, beta: np.ndarray, rhs: np.ndarray,
                 h: float, bc: Tuple[float, float]) -> np.ndarray:
    """Solve (kappa u')' - beta u = -rhs on a uniform node grid with Dirichlet
    ends, conservative second-order differences, kappa given at the faces
    and beta, rhs at the interior nodes."""
    m = beta.size            # number of interior nodes
    ab = np.zeros((3, m))
    ab[0, 1:] = kf[1:-1] / h ** 2
    ab[1, :] = -(kf[:-1] + kf[1:]) / h ** 2 - beta
    ab[2, :-1] = kf[1:-1] / h ** 2
    b = -rhs.copy()
    b[0] -= kf[0] / h ** 2 * bc[0]
    b[-1] -= kf[-1] / h ** 2 * bc[1]
    try:
        interior = solve_banded((1, 1), ab, b)
    except (LinAlgError, ValueError) as exc:
        raise BVPSingular(f"interface BVP solve failed: {exc}") from exc
    if not np.all(np.isfinite(interior)):
        raise BVPSingular("interface BVP produced non-finite values")
    return np.concatenate([[bc[0]], interior, [bc[1]]])


def _eta_problem(profile: MembraneProfile, sorption: bool, n: int):
    x = np.linspace(-1.0, 1.0, n + 1)
    xf = 0.5 * (x[:-1] + x[1:])
    amid, kmid, bmid = (profile.A_bar.mid, profile.K_bar.mid,
                        profile.B_bar.mid)
    kap_f = np.array([float(kmid(t)) / float(amid(t)) for t in xf])
    if sorption:
        beta = np.array([float(bmid(t)) / math.sqrt(float(amid(t)))
                         for t in x[1:-1]])
    else:
        beta = np.zeros(n - 1)
    return x, kap_f, beta


def _end_slopes(field: np.ndarray, h: float) -> Tuple[float, float]:
    left = (-3.0 * field[0] + 4.0 * field[1] - field[2]) / (2.0 * h)
    right = (3.0 * field[-1] - 4.0 * field[-2] + field[-3]) / (2.0 * h)
    return left, right


def membrane_saddle_oracle(w_minus: float, w_plus: float, zeta_minus: float,
                           zeta_plus: float, profile: MembraneProfile,
                           sorption: bool = False, n: int = 800) -> float:
    """Numerical route to the layer reduction value. Substituting
    v = A_bar w and eta = sqrt(v) exp(-zeta/2) turns the saddle problem
    into a linear two-point boundary-value problem for eta; the saddle
    value is then a pure boundary-flux expression. Solved at n and 2n
    intervals with Richardson extrapolation of the scalar result.

    Smooth layer coefficients are assumed for the extrapolation step."""
    profile.require_scalar("membrane_saddle_oracle")
    if w_minus <= 0.0 or w_plus <= 0.0:
        raise DomainError("boundary densities must be positive")
    a_minus, a_plus = _inner_traces(profile)
    vm, vp = a_minus * w_minus, a_plus * w_plus
    eta_m = math.sqrt(vm) * math.exp(-0.5 * zeta_minus)
    eta_p = math.sqrt(vp) * math.exp(-0.5 * zeta_plus)

    def value(n_int: int) -> float:
        x, kap_f, beta = _eta_problem(profile, sorption, n_int)
        h = x[1] - x[0]
        eta = _tridiag_bvp(kap_f, beta, beta, h, (eta_m, eta_p))
        if eta[0] <= 0.0 or eta[-1] <= 0.0:
            raise BVPSingular("boundary values must stay positive")
        dl, dr = _end_slopes(eta, h)
        kap_l = float(profile.K_bar.mid(-1.0)) / a_minus
        kap_r = float(profile.K_bar.mid(1.0)) / a_plus
        return (2.0 * kap_l * dl * (vm / eta[0] - 1.0)
                + 2.0 * kap_r * dr * (1.0 - vp / eta[-1]))

    coarse, fine = value(n), value(2 * n)
    return fine + (fine - coarse) / 3.0


# ---------------------------------------------------------------------------
# sorption coefficients from the auxiliary interface profiles

@dataclass
class HpmSolution:
    """The two auxiliary interface profiles and their end slopes. The
    ``wronskian`` array holds the scheme-exact face invariant
    kappa (H_plus' H_minus - H_minus' H_plus); its drift diagnoses a
    corrupted solve."""

    x: np.ndarray
    h_minus: np.ndarray
    h_plus: np.ndarray
    dh_minus: Tuple[float, float]
    dh_plus: Tuple[float, float]
    wronskian: np.ndarray
    residual: float


def solve_hpm(profile: MembraneProfile, n: int = 256) -> HpmSolution:
    """Solve the pair of interface profiles H_-, H_+ on [-1, 1]:
    (kappa H')' = beta H with kappa = K_bar/A_bar and
    beta = B_bar/sqrt(A_bar), H_+ rising from 0 to 1 and H_- falling from
    1 to 0. Conservative second-order differences at n and 2n intervals;
    end slopes are one-sided three-point values, Richardson extrapolated."""
    profile.require_scalar("solve_hpm")
    if n < 64:
        raise DomainError(f"need at least 64 intervals, got {n}")

    def solve(n_int: int):
        x, kap_f, beta = _eta_problem(profile, True, n_int)
        h = x[1] - x[0]
        zero = np.zeros(n_int - 1)
        hp = _tridiag_bvp(kap_f, beta, zero, h, (0.0, 1.0))
        hm = _tridiag_bvp(kap_f, beta, zero, h, (1.0, 0.0))
        return x, h, kap_f, hm, hp

    xc, hc, _, hm_c, hp_c = solve(n)
    xf, hf, kap_f, hm_f, hp_f = solve(2 * n)
    residual = max(float(np.max(np.abs(hm_f[::2] - hm_c))),
                   float(np.max(np.abs(hp_f[::2] - hp_c))))

    def slopes(coarse, fine):
        lc, rc = _end_slopes(coarse, hc)
        lf, rf = _end_slopes(fine, hf)
        return (lf + (lf - lc) / 3.0, rf + (rf - rc) / 3.0)

    wron = kap_f * (hp_f[1:] * hm_f[:-1] - hp_f[:-1] * hm_f[1:]) / hf
    return HpmSolution(x=xf, h_minus=hm_f, h_plus=hp_f,
                       dh_minus=slopes(hm_c, hm_f),
                       dh_plus=slopes(hp_c, hp_f),
                       wronskian=wron, residual=residual)


@dataclass
class TransmissionCoeffs:
    """Interface coefficients of the three structures. ``h_k`` is the
    quadratic conductance, ``k_eff`` the entropic one, and the m-family
    weights the cosh channels of the sorption reduction (cross channel plus
    one single-sided channel per face)."""

    h_k: Optional[np.ndarray | float] = None
    k_eff: Optional[float] = None
    m_eff: Optional[float] = None
    m_minus: Optional[float] = None
    m_plus: Optional[float] = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.h_k is not None:
            h = np.asarray(self.h_k, dtype=float)
            if h.ndim == 0:
                if not float(h) > 0.0:
                    raise DomainError("h_k must be positive")
            elif not np.allclose(h, h.T, atol=1e-10) \
                    or np.linalg.eigvalsh(h).min() <= 0.0:
                raise DomainError("h_k must be symmetric positive definite")
        for label, v, strict in (("k_eff", self.k_eff, True),
                                 ("m_eff", self.m_eff, True),
                                 ("m_minus", self.m_minus, False),
                                 ("m_plus", self.m_plus, False)):
            if v is None:
                continue
            if strict and not v > 0.0:
                raise DomainError(f"{label} must be positive, got {v!r}")
            if not strict and v < 0.0:
                raise DomainError(f"{label} must be nonnegative, got {v!r}")


def sorption_coeffs(profile: MembraneProfile, n: int = 256) -> TransmissionCoeffs:
    """All interface coefficients of the sorption reduction from the
    auxiliary profiles: the cross coefficient via both one-sided slope
    expressions (their gap is reported), the single-sided coefficients by
    Richardson-extrapolated Simpson quadrature of beta H_+-, and the
    quadratic/entropic conductances for cross-structure comparisons."""
    profile.require_scalar("sorption_coeffs")
    hpm = solve_hpm(profile, n)
    a_minus, a_plus = _inner_traces(profile)
    kap_l = float(profile.K_bar.mid(-1.0)) / a_minus
    kap_r = float(profile.K_bar.mid(1.0)) / a_plus
    m_left = kap_l * hpm.dh_plus[0]
    m_right = -kap_r * hpm.dh_minus[1]
    gap = abs(m_left - m_right) / max(abs(m_left), abs(m_right), 1e-300)
    wmean = float(np.mean(hpm.wronskian))
    drift = (float(np.max(hpm.wronskian) - np.min(hpm.wronskian))
             / max(abs(wmean), 1e-300))
    if drift > 1e-6:
        raise WronskianDrift(
            f"interface profile invariant drifts by {drift:.3e}")

    def weighted_integral(field_fine):
        x = hpm.x
        amid, bmid = profile.A_bar.mid, profile.B_bar.mid
        dens_f = np.array([float(bmid(t)) / math.sqrt(float(amid(t)))
                           for t in x]) * field_fine
        fine_val = simpson(dens_f, x=x)
        coarse_val = simpson(dens_f[::2], x=x[::2])
        return fine_val + (fine_val - coarse_val) / 15.0

    m_plus = float(weighted_integral(hpm.h_plus))
    m_minus = float(weighted_integral(hpm.h_minus))
    prov = {"bvp_intervals": n, "bvp_residual": hpm.residual,
            "meff_route_gap": gap, "wronskian_drift": drift,
            "quadrature_tol": 1e-10}
    return TransmissionCoeffs(h_k=transmission_hk(profile),
                              k_eff=otto_keff(profile),
                              m_eff=0.5 * (m_left + m_right),
                              m_minus=max(m_minus, 0.0),
                              m_plus=max(m_plus, 0.0),
                              provenance=prov)


def sorption_coeffs_const(a_bar: float, b_bar: float,
                          k_bar: float) -> TransmissionCoeffs:
    """Closed-form interface coefficients for constant layer coefficients,
    with sigma^2 = sqrt(A) B / K. A series branch below sigma = 1e-4 keeps
    the vanishing-exchange limit continuous: m_eff -> K/(2A) (the entropic
    conductance) and the single-sided coefficients -> B/sqrt(A)."""
    if a_bar <= 0.0 or k_bar <= 0.0 or b_bar < 0.0:
        raise DomainError("need A, K > 0 and B >= 0")
    sigma = math.sqrt(math.sqrt(a_bar) * b_bar / k_bar)
    base_eff = k_bar / a_bar
    base_pm = b_bar / math.sqrt(a_bar)
    if sigma < 1e-4:
        t2 = (2.0 * sigma) ** 2
        m_eff = base_eff * 0.5 * (1.0 - t2 / 6.0 + 7.0 * t2 * t2 / 360.0)
        m_pm = base_pm * (1.0 - t2 / 12.0)
    else:
        m_eff = base_eff * sigma / math.sinh(2.0 * sigma)
        m_pm = base_pm * (math.cosh(2.0 * sigma) - 1.0) \
            / (sigma * math.sinh(2.0 * sigma))
    return TransmissionCoeffs(h_k=k_bar / 2.0,
                              k_eff=k_bar / (2.0 * a_bar),
                              m_eff=m_eff, m_minus=m_pm, m_plus=m_pm,
                              provenance={"method": "closed-form",
                                          "sigma": sigma})


def ry_star_sorption(w_minus: float, w_plus: float, zeta_minus: float,
                     zeta_plus: float, coeffs: TransmissionCoeffs,
                     a_minus: float, a_plus: float) -> float:
    """Interface dissipation of the sorption reduction: a cross cosh
    channel between the faces plus one single-sided channel per face.
    Nonnegative and zero at vanishing forces."""
    if w_minus <= 0.0 or w_plus <= 0.0 or a_minus <= 0.0 or a_plus <= 0.0:
        raise DomainError("densities and energy weights must be positive")
    vm, vp = a_minus * w_minus, a_plus * w_plus
    return (coeffs.m_eff * math.sqrt(vm * vp)
            * cosh_star(zeta_plus - zeta_minus)
            + coeffs.m_minus * math.sqrt(vm) * cosh_star(zeta_minus)
            + coeffs.m_plus * math.sqrt(vp) * cosh_star(zeta_plus))


def sorption_bvalue(w_minus: float, w_plus: float, zeta_minus: float,
                    zeta_plus: float, coeffs: TransmissionCoeffs,
                    a_minus: float, a_plus: float) -> float:
    """Excess of the interface dissipation over its value at the anchor
    force log(A w); by evenness of the cosh channels this also vanishes at
    the equilibrium force -log(A w)."""
    anchor_m = math.log(a_minus * w_minus)
    anchor_p = math.log(a_plus * w_plus)
    return (ry_star_sorption(w_minus, w_plus, zeta_minus, zeta_plus,
                             coeffs, a_minus, a_plus)
            - ry_star_sorption(w_minus, w_plus, anchor_m, anchor_p,
                               coeffs, a_minus, a_plus))


# ---------------------------------------------------------------------------
# effective slow system

def _channel_primal_factory():
    """Primal evaluator for dissipation duals that are sums of quadratic
    and cosh channels along fixed incidence directions. The flux
    decomposition solves a least-squares system on the cached incidence
    matrix; leftover null-space directions are minimized with the convex
    channel costs."""
    cache = {}

    def build(entries_list, n):
        key = ("B", n, tuple(entries_list))
        if key not in cache:
            B = np.zeros((n, len(entries_list)))
            for c, entries in enumerate(entries_list):
                for idx, sign in entries:
                    B[idx, c] = sign
            cache[key] = (B, np.linalg.pinv(B), null_space(B))
        return cache[key]

    def primal(v, weights, quad, cosh):
        # quad: list of (entries, coef); cosh likewise. Zero-coefficient
        # channels are dead and carry no flux.
        chans = [(e, c, "quad") for e, c in quad if c > 1e-300] \
            + [(e, c, "cosh") for e, c in cosh if c > 1e-300]
        if not chans:
            return 0.0 if not np.any(weights * v) else float("inf")
        entries_list = tuple(e for e, _, _ in chans)
        B, Bp, N = build(entries_list, v.size)
        target = weights * np.asarray(v, dtype=float)
        j0 = Bp @ target
        if np.linalg.norm(B @ j0 - target) \
                > 1e-8 * (1.0 + np.linalg.norm(target)):
            return float("inf")
        coef = np.array([c for _, c, _ in chans])
        kinds = np.array([k == "cosh" for _, _, k in chans])

        def cost_and_grad(j):
            val = 0.0
            grad = np.empty_like(j)
            q = ~kinds
            val += float(np.sum(j[q] ** 2 / (2.0 * coef[q])))
            grad[q] = j[q] / coef[q]
            for i in np.nonzero(kinds)[0]:
                z = j[i] / coef[i]
                val += coef[i] * cosh_primal(z)
                grad[i] = 2.0 * math.asinh(0.5 * z)
            return val, grad

        if N.shape[1] == 0:
            return cost_and_grad(j0)[0]

        def obj(t):
            val, grad = cost_and_grad(j0 + N @ t)
            return val, N.T @ grad

        res = minimize(obj, np.zeros(N.shape[1]), jac=True,
                       method="L-BFGS-B",
                       options={"gtol": 1e-12, "maxiter": 500})
        return float(res.fun)

    return primal


def effective_membrane_gs(profile: MembraneProfile,
                          coeffs: TransmissionCoeffs | None = None,
                          structure: str = "quadratic",
                          n_per: int = 32) -> GradientSystem:
    """Effective slow system on the two bulk intervals after the layer has
    collapsed to an interface.

    * "quadratic": quadratic energy and force potential; the interface is
      a linear conductance and the flow coincides with the transmission
      solver on the same grids.
    * "otto": entropy energy with state-weighted bulk diffusion and one
      cosh interface channel weighted by sqrt of the face values of A u.
    * "sorption": additionally the two single-sided interface channels and
      the bulk background-exchange channels wherever B_bar > 0.

    The flow of the cosh interface channel at the natural force reduces to
    the same linear jump flux as the quadratic structure; the nonlinearity
    lives purely in the fluctuation shape of the dissipation."""
    if structure == "quadratic":
        Ablk, G, w, aux = _limit_matrices(profile, n_per)
        gs = _quadratic_gs(Ablk, G, w, "effective-quadratic")
        gs.grids = aux["grids"]
        gs.hk = aux["hk"]
        return gs
    if structure not in ("otto", "sorption"):
        raise DomainError(f"unknown structure {structure!r}")
    profile.require_scalar("effective_membrane_gs")
    gl, gr = slow_grids(n_per)
    a = np.concatenate([_scalar_fields(profile, gl)[0],
                        _scalar_fields(profile, gr)[0]])
    k = np.concatenate([_scalar_fields(profile, gl)[1],
                        _scalar_fields(profile, gr)[1]])
    b = np.concatenate([_scalar_fields(profile, gl)[2],
                        _scalar_fields(profile, gr)[2]])
    if structure == "otto":
        b = np.zeros_like(b)
    centers = np.concatenate([gl.centers, gr.centers])
    w = np.concatenate([gl.widths, gr.widths])
    n = centers.size
    jm, jp = n_per - 1, n_per
    a_out_m = float(np.asarray(profile.A_bar.one_sided(-1.0, -1)))
    a_out_p = float(np.asarray(profile.A_bar.one_sided(1.0, +1)))
    if coeffs is None:
        coeffs = (sorption_coeffs(profile) if structure == "sorption"
                  else TransmissionCoeffs(k_eff=otto_keff(profile)))
    keff = coeffs.k_eff if structure == "otto" else coeffs.m_eff
    if keff is None:
        raise DomainError("coeffs lacks the interface coefficient "
                          f"needed for structure {structure!r}")
    m_minus = coeffs.m_minus or 0.0
    m_plus = coeffs.m_plus or 0.0
    if structure == "otto":
        m_minus = m_plus = 0.0

    space = Space(dim=n, weights=w, positive=True,
                  name=f"effective-{structure}")
    energy = EnergyFunctional(
        value=lambda u: float(np.sum(w * np.array(
            [lambda_b(ai * ui) / ai for ai, ui in zip(a, u)]))),
        gradient=lambda u: np.log(a * u),
        hessian=lambda u: np.diag(1.0 / u),
        space=space, name=f"effective-{structure}-energy")

    # interior faces never straddle the interface gap
    df = np.diff(centers)
    live = np.ones(n - 1, dtype=bool)
    live[jm] = False
    kf = 2.0 * k[:-1] * k[1:] / (k[:-1] + k[1:])

    def face_coef(u):
        return np.where(live, kf * 0.5 * (u[:-1] + u[1:]) / df, 0.0)

    def port_coef(u):
        return keff * math.sqrt(a_out_m * u[jm] * a_out_p * u[jp])

    def side_coefs(u):
        return (m_minus * math.sqrt(a_out_m * u[jm]),
                m_plus * math.sqrt(a_out_p * u[jp]))

    def dual(u, xi):
        dxi = np.diff(xi)
        val = float(np.sum(0.5 * face_coef(u) * dxi ** 2 * df))
        val += port_coef(u) * cosh_star(xi[jp] - xi[jm])
        gm, gp = side_coefs(u)
        val += gm * cosh_star(xi[jm]) + gp * cosh_star(xi[jp])
        val += float(np.sum(w * b * np.sqrt(u)
                            * np.array([cosh_star(z) for z in xi])))
        return val

    def velocity(u, xi):
        dxi = np.diff(xi)
        flux = face_coef(u) * dxi
        v = np.zeros(n)
        v[:-1] += flux
        v[1:] -= flux
        r = port_coef(u) * cosh_star_prime(xi[jp] - xi[jm])
        v[jp] += r
        v[jm] -= r
        gm, gp = side_coefs(u)
        v[jm] += gm * cosh_star_prime(xi[jm])
        v[jp] += gp * cosh_star_prime(xi[jp])
        v /= w
        v += b * np.sqrt(u) * np.array([cosh_star_prime(z) for z in xi])
        return v

    channel_primal = _channel_primal_factory()
    face_idx = [((i, -1.0), (i + 1, 1.0)) for i in range(n - 1) if live[i]]
    face_pos = [i for i in range(n - 1) if live[i]]
    port_entry = ((jp, 1.0), (jm, -1.0))
    cell_idx = [((i, 1.0),) for i in range(n)]

    def primal(u, v):
        fc = face_coef(u)
        quad = [(face_idx[q], float(fc[i]))
                for q, i in enumerate(face_pos)]
        gm, gp = side_coefs(u)
        cosh_list = [(port_entry, float(port_coef(u)))]
        cosh_list += [(((jm, 1.0),), float(gm)), (((jp, 1.0),), float(gp))]
        cosh_list += [(cell_idx[i], float(w[i] * b[i] * math.sqrt(u[i])))
                      for i in range(n)]
        return channel_primal(np.asarray(v, float), w, quad, cosh_list)

    diss = DissipationPotential(
        dual_value=dual, velocity_map=velocity, primal_value=primal,
        space=space, name=f"effective-{structure}-dissipation")
    gs = GradientSystem(energy=energy, dissipation=diss, space=space,
                        name=f"effective-{structure}")
    gs.grids = (gl, gr)
    gs.coeffs = coeffs
    gs.structure = structure
    return gs


# ---------------------------------------------------------------------------
# reaction-diffusion right-hand side with spatial references

@dataclass
class RDCoefficients:
    """Per-species diffusion coefficients and reference densities, each a
    constant or a callable of the cell center, plus an optional scalar or
    spatial rescaling of all reaction rates (used for layer scalings)."""

    k_diff: Sequence
    c_star: Sequence
    reaction_scale: float | Callable[[float], float] = 1.0

    def tables(self, centers: np.ndarray):
        def column(spec):
            if callable(spec):
                return np.array([float(spec(x)) for x in centers])
            return np.full(centers.size, float(spec))
        kd = np.column_stack([column(s) for s in self.k_diff])
        cs = np.column_stack([column(s) for s in self.c_star])
        scale = column(self.reaction_scale)
        return kd, cs, scale


def rd_pde_rhs(c, coeffs: RDCoefficients, net: Optional[ReactionNetwork],
               grid: Grid1D) -> np.ndarray:
    """Finite-volume rate of a reaction-diffusion system whose diffusive
    flux drives each species toward its spatial reference and whose
    reactions follow mass-action kinetics relative to the same reference.
    At c equal to the reference everything vanishes; without reactions the
    per-species masses are conserved exactly."""
    c = np.asarray(c, dtype=float)
    flat = c.ndim == 1
    if flat:
        c = c[:, None]
    if c.shape[0] != grid.n_cells:
        raise GridMismatch(
            f"{c.shape[0]} cells of data on a {grid.n_cells}-cell grid")
    ns = c.shape[1]
    if len(coeffs.k_diff) != ns or len(coeffs.c_star) != ns:
        raise DomainError("coefficient count does not match species count")
    if net is not None and net.n_species != ns:
        raise DomainError("network species count does not match the fields")
    if np.any(c <= 0.0):
        raise DomainError("densities must be positive")
    centers, widths = grid.centers, grid.widths
    kd, cs, scale = coeffs.tables(centers)
    xi = -np.log(c / cs)
    df = np.diff(centers)
    rhs = np.zeros_like(c)
    for i in range(ns):
        kf = 2.0 * kd[:-1, i] * kd[1:, i] / (kd[:-1, i] + kd[1:, i])
        cf = 0.5 * (c[:-1, i] + c[1:, i])
        flux = kf * cf * np.diff(xi[:, i]) / df
        rhs[:-1, i] -= flux
        rhs[1:, i] += flux
        rhs[:, i] /= widths
    if net is not None:
        ratio = net.c_ref[None, :] / cs
        for j in range(grid.n_cells):
            rhs[j] += scale[j] * mass_action_rhs(net, c[j] * ratio[j])
    return rhs[:, 0] if flat else rhs
