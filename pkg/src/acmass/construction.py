"""Explicit constructions: recovery sequences, photography maps, boundary layer and barycenter."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .energy import ScalarField, energy
from .errors import MassUnreachable, SupportTouchesBoundary, ZeroMass
from .geometry_limits import IndicatorRegion, ball_region
from .mesh import BoundaryPoint, DomainMesh, project_to_boundary, signed_distance_to_complement
from .potential import PotentialSpec, ProfileTable, solve_profile


@dataclass(frozen=True)
class RecoveryParams:
    epsilon: float
    delta: float
    profile: ProfileTable
    region: IndicatorRegion
    mass_residual: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.delta <= self.profile.eta:
            raise ValueError(f"shift {self.delta} outside [0, {self.profile.eta}]")


@dataclass(frozen=True)
class PhotographOutput:
    field: ScalarField
    source_point: tuple[float, float]
    region: IndicatorRegion
    energy_at_emission: float
    params: RecoveryParams | None = None


def recovery_sequence(region: IndicatorRegion, profile: ProfileTable, target_mass: float | None = None,
                      bc: str = "neumann", delta_tol: float = 1e-10) -> tuple[ScalarField, RecoveryParams]:
    """``u(x) = q(d(x) + δ)`` with ``d`` the signed distance to the complement of the region.

    The shift ``δ ∈ [0, η]`` is the root of the (nondecreasing) mass defect.
    If even ``δ = η`` (or ``δ = 0``) cannot reach the target, the field at the
    nearest achievable shift is attached to the raised ``MassUnreachable``.
    """
    mesh = region.mesh
    m = region.volume if target_mass is None else float(target_mass)
    d = signed_distance_to_complement(mesh, region.ball)
    ml = mesh.lumped_mass

    def mass_at(delta):
        return float(ml @ profile(d + delta))

    lo, hi = mass_at(0.0), mass_at(profile.eta)
    if hi < m:
        raise MassUnreachable(f"mass {hi:.6g} at the largest shift stays below {m:.6g}", achieved=hi,
                              delta=profile.eta)
    if lo > m:
        raise MassUnreachable(f"mass {lo:.6g} at zero shift already exceeds {m:.6g}", achieved=lo, delta=0.0)
    if lo == m:
        delta = 0.0
    elif hi == m:
        delta = profile.eta
    else:
        delta = brentq(lambda s: mass_at(s) - m, 0.0, profile.eta, xtol=delta_tol, rtol=1e-15, maxiter=500)
    values = profile(d + delta)
    if bc == "dirichlet":
        values[mesh.boundary_nodes] = 0.0
    u = ScalarField(mesh, values, bc)
    residual = u.mass - m
    if abs(residual) > 1e-8 * mesh.area:
        raise MassUnreachable(f"mass residual {residual:.3e} after shift search", achieved=u.mass, delta=delta)
    return u, RecoveryParams(profile.epsilon, float(delta), profile, region, float(residual))


def _as_point(p) -> np.ndarray:
    if isinstance(p, BoundaryPoint):
        return np.asarray(p.coords, dtype=float)
    return np.asarray(p, dtype=float)


def photograph_neumann(mesh: DomainMesh, pot: PotentialSpec, p, m: float, epsilon: float,
                       profile: ProfileTable | None = None) -> PhotographOutput:
    """Recovery field of the volume-``m`` ball centered at the boundary point ``p``."""
    profile = profile if profile is not None else solve_profile(pot, epsilon)
    c = _as_point(p)
    region = ball_region(mesh, c, m)
    u, params = recovery_sequence(region, profile, m, bc="neumann")
    return PhotographOutput(u, (float(c[0]), float(c[1])), region, energy(u, epsilon, pot), params)


def layer_depth(t, delta_m: float):
    """``h(t) = δ_M/2 + t²/(2δ_M)`` on ``[0, δ_M]``.

    This is the cubic Hermite interpolant of ``h(0) = δ_M/2``, ``h'(0) = 0``,
    ``h(δ_M) = δ_M``, ``h'(δ_M) = 1``; its cubic coefficient vanishes.
    """
    t = np.asarray(t, dtype=float)
    return 0.5 * delta_m + t * t / (2.0 * delta_m)


def boundary_layer(mesh: DomainMesh, p) -> np.ndarray:
    """Push ``p`` along its boundary normal to depth ``h(dist(p, ∂M))``; identity at depth ``≥ δ_M``."""
    q = _as_point(p)
    dm = mesh.delta_M
    proj = project_to_boundary(mesh, q, mode="boundary")
    t = proj.distance
    if t >= dm:
        return q.copy()
    if t > 0.0:
        direction = (q - proj.coords) / t
    else:
        direction = np.asarray(proj.normal, dtype=float)
    return proj.coords + float(layer_depth(t, dm)) * direction


def photograph_dirichlet(mesh: DomainMesh, pot: PotentialSpec, p, m: float, epsilon: float,
                         profile: ProfileTable | None = None) -> PhotographOutput:
    """Recovery field of the interior ball of volume ``m`` centered at ``L(p)``, zero on ``∂M``."""
    profile = profile if profile is not None else solve_profile(pot, epsilon)
    r = math.sqrt(m / math.pi)
    if r + profile.eta >= 0.5 * mesh.delta_M:
        raise SupportTouchesBoundary(
            f"ball radius {r:.4g} plus layer width {profile.eta:.4g} reaches half the collar {0.5 * mesh.delta_M:.4g}"
        )
    c = boundary_layer(mesh, p)
    region = ball_region(mesh, c, m)
    u, params = recovery_sequence(region, profile, m, bc="dirichlet")
    return PhotographOutput(u, (float(c[0]), float(c[1])), region, energy(u, epsilon, pot), params)


def barycenter(u: ScalarField) -> np.ndarray:
    """``∫ x |u| / ∫ |u|`` with lumped-mass quadrature."""
    w = u.mesh.lumped_mass * np.abs(u.values)
    total = float(w.sum())
    if not total > 0.0:
        raise ZeroMass("field has zero L1 mass")
    return (w @ u.mesh.nodes) / total


def compose_B(u: ScalarField, mode: str = "neumann", strict: bool = False, tol: float | None = None) -> BoundaryPoint:
    """Nearest point of ``∂M`` (Neumann) or of ``M`` (Dirichlet) to the barycenter of ``u``."""
    target = "boundary" if mode == "neumann" else "domain"
    return project_to_boundary(u.mesh, barycenter(u), mode=target, strict=strict, tol=tol)
