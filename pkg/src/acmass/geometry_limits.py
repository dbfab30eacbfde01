"""Sharp-interface limits: perimeters of clipped balls and small-volume isoperimetric profiles."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import VolumeTooLarge
from .mesh import Ball, DomainMesh, ball_indicator
from .potential import PotentialSpec

MODES = ("neumann", "dirichlet")


@dataclass(frozen=True, eq=False)
class IndicatorRegion:
    """Ball ``B(center, radius)`` clipped to the domain, with its perimeters.

    ``relative_perimeter`` counts only the part of the ball's circle inside the
    domain; ``full_perimeter`` adds the stretch of ``∂M`` the ball covers.
    """

    mesh: DomainMesh
    center: tuple[float, float]
    radius: float
    volume: float
    relative_perimeter: float
    full_perimeter: float
    fractions: np.ndarray | None = None

    @property
    def ball(self) -> Ball:
        return Ball(tuple(self.center), self.radius)


@dataclass(frozen=True)
class ProfileEstimate:
    m: float
    I_M: float
    I_bar_M: float
    best_center: tuple[float, float]
    method: str = "candidate_family"


def euclidean_profile(m: float, half: bool) -> float:
    """Least perimeter enclosing area ``m`` in the plane (``2 sqrt(π m)``) or half-plane (``sqrt(2 π m)``)."""
    if m <= 0:
        raise ValueError("m must be positive")
    return math.sqrt(2.0 * math.pi * m) if half else 2.0 * math.sqrt(math.pi * m)


def limit_energy(region: IndicatorRegion, sigma: float, mode: str) -> float:
    if mode == "neumann":
        return sigma * region.relative_perimeter
    if mode == "dirichlet":
        return sigma * region.full_perimeter
    raise ValueError(f"unknown mode {mode!r}")


def ball_region(mesh: DomainMesh, center, m: float) -> IndicatorRegion:
    """Ball of volume ``m`` around ``center`` on the polygonal mesh domain."""
    frac, r = ball_indicator(mesh, center, m)
    c = tuple(float(v) for v in center)
    rel = mesh.polygon.arc_length_inside(c, r)
    full = rel + mesh.polygon.boundary_length_in_disk(c, r)
    return IndicatorRegion(mesh, c, r, float(frac @ mesh.triangle_areas), rel, full, frac)


def analytic_ball(shape, center, m: float) -> tuple[float, float, float]:
    """Radius, relative and full perimeter of the volume-``m`` ball at ``center`` in ``shape``."""
    c = (float(center[0]), float(center[1]))
    r0 = math.sqrt(m / math.pi)
    if shape.distance_to_boundary(np.array([c]))[0] >= r0 and shape.contains(np.array([c]))[0]:
        return r0, 2 * math.pi * r0, 2 * math.pi * r0
    hi = 2.0 * r0
    while shape.disk_area(c, hi) < m:
        hi *= 2.0
        if hi > 1e6:
            raise VolumeTooLarge(f"cannot fit volume {m} around {c}")
    r = brentq(lambda s: shape.disk_area(c, s) - m, 0.0, hi, xtol=1e-15, rtol=1e-14)
    rel = shape.arc_length_inside(c, r)
    return r, rel, rel + shape.boundary_length_in_disk(c, r)


def _feature(mesh: DomainMesh) -> float:
    return mesh.spec.feature_size if mesh.spec is not None else mesh.inj_estimate


def estimate_profile(mesh: DomainMesh, m: float, mode: str = "neumann", n_centers: int = 64) -> ProfileEstimate:
    """Least perimeter over balls of volume ``m``.

    ``I_M`` minimizes the relative perimeter over balls centered at
    ``n_centers`` boundary points; ``I_bar_M`` minimizes the full perimeter
    over balls centered at every mesh node. Clipping uses the exact domain
    shape (circular segments for circular boundaries).
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if m <= 0:
        raise ValueError("m must be positive")
    if math.sqrt(2 * m / math.pi) >= 0.5 * _feature(mesh):
        raise VolumeTooLarge(f"volume {m} is too large for the small-volume regime of this domain")
    shape = mesh.shape

    best_rel, best_rel_c = math.inf, None
    for c in shape.boundary_samples(n_centers):
        _, rel, _ = analytic_ball(shape, c, m)
        if rel < best_rel:
            best_rel, best_rel_c = rel, (float(c[0]), float(c[1]))

    r0 = math.sqrt(m / math.pi)
    nodes = mesh.nodes
    free = shape.contains(nodes) & (shape.distance_to_boundary(nodes) >= r0)
    best_full = math.inf
    best_full_c = None
    if free.any():
        best_full = 2 * math.pi * r0
        best_full_c = tuple(float(v) for v in nodes[np.flatnonzero(free)[0]])
    for i in np.flatnonzero(~free):
        _, _, full = analytic_ball(shape, nodes[i], m)
        if full < best_full - 1e-14:
            best_full, best_full_c = full, (float(nodes[i, 0]), float(nodes[i, 1]))

    best_center = best_rel_c if mode == "neumann" else best_full_c
    return ProfileEstimate(m=m, I_M=best_rel, I_bar_M=best_full, best_center=best_center)


def curvature_spread(mesh: DomainMesh) -> tuple[float, float]:
    k = mesh.boundary_curvature[mesh.boundary_nodes]
    return float(np.max(k)), float(np.min(k))


def theta_constant(mesh: DomainMesh, pot: PotentialSpec, gamma_hat: float = 1.0) -> float:
    """``σ γ̂ (max H - min H + 1)`` over the boundary curvature."""
    kmax, kmin = curvature_spread(mesh)
    return pot.sigma * gamma_hat * (kmax - kmin + 1.0)


def sublevel_threshold(mesh: DomainMesh, pot: PotentialSpec, m: float, mode: str = "neumann",
                       gamma_hat: float = 1.0, tau_slack: float = 1.0,
                       estimate: ProfileEstimate | None = None, n_centers: int = 64) -> float:
    """Energy level ``c_m`` expected to contain every photograph.

    Neumann: ``σ I_M(m) + θ m``. Dirichlet: ``σ Ī_M(m) + τ(m)`` with
    ``τ(m) = tau_slack * m`` (flat domains carry no scalar-curvature term).
    """
    est = estimate if estimate is not None else estimate_profile(mesh, m, mode, n_centers)
    if mode == "neumann":
        return pot.sigma * est.I_M + theta_constant(mesh, pot, gamma_hat) * m
    if mode == "dirichlet":
        return pot.sigma * est.I_bar_M + tau_slack * m
    raise ValueError(f"unknown mode {mode!r}")
