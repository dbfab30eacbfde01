"""Critical points of the mass-constrained Allen-Cahn energy on planar domains with boundary."""

from .construction import (
    PhotographOutput,
    RecoveryParams,
    barycenter,
    boundary_layer,
    compose_B,
    photograph_dirichlet,
    photograph_neumann,
    recovery_sequence,
)
from .energy import EnergyReport, ScalarField, energy, hessian_apply, kkt_residual, lagrange_multiplier
from .geometry_limits import (
    IndicatorRegion,
    ProfileEstimate,
    ball_region,
    estimate_profile,
    euclidean_profile,
    limit_energy,
    sublevel_threshold,
)
from .mesh import (
    Ball,
    BoundaryPoint,
    DomainMesh,
    DomainSpec,
    ball_indicator,
    build_domain,
    project_to_boundary,
    signed_distance_to_complement,
)
from .potential import PotentialSpec, ProfileTable, check_assumptions, compute_sigma, make_quartic, solve_profile
from .solver import (
    CriticalPointRecord,
    SolveConfig,
    concentration_check,
    dedup,
    flow,
    morse_index,
    multistart,
    newton_refine,
)

__version__ = "0.1.0"
