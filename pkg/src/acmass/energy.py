"""Discrete Allen-Cahn energy, its derivatives and the mass-constraint multiplier.

The gradient term uses the exact P1 stiffness matrix; the potential term is
integrated with the lumped mass matrix, so ``W'`` and ``W''`` act diagonally
in the nodal basis. Residuals are dual (load) vectors; their size is measured
in the ``M_L^{-1}`` norm, which is the discrete L² norm of the strong residual
and does not drift with the mesh size.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import InvariantViolation
from .mesh import DomainMesh
from .potential import PotentialSpec, make_quartic

BCS = ("neumann", "dirichlet")

_QUARTIC = make_quartic()


@dataclass(frozen=True, eq=False)
class ScalarField:
    mesh: DomainMesh
    values: np.ndarray
    bc: str = "neumann"

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != (self.mesh.n_nodes,):
            raise InvariantViolation(f"field has shape {vals.shape}, mesh has {self.mesh.n_nodes} nodes")
        if self.bc not in BCS:
            raise InvariantViolation(f"unknown boundary condition {self.bc!r}")
        if self.bc == "dirichlet" and np.any(vals[self.mesh.boundary_nodes] != 0.0):
            raise InvariantViolation("dirichlet field has nonzero boundary values")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def mass(self) -> float:
        """``1ᵀ M u`` (consistent and lumped masses agree on this)."""
        return float(self.mesh.lumped_mass @ self.values)

    def with_values(self, values) -> "ScalarField":
        return ScalarField(self.mesh, values, self.bc)


def free_dofs(mesh: DomainMesh, bc: str) -> np.ndarray:
    if bc == "dirichlet":
        return mesh.interior_nodes
    return np.arange(mesh.n_nodes)


@dataclass
class EnergyReport:
    energy: float
    gradient_field: np.ndarray
    lam: float
    kkt_residual: float
    mass_error: float
    bc: str
    normal_derivative_norm: float = 0.0

    def to_dict(self) -> dict:
        return {
            "energy": self.energy,
            "lambda": self.lam,
            "kkt_residual": self.kkt_residual,
            "mass_error": self.mass_error,
            "bc": self.bc,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def energy(u: ScalarField, epsilon: float, pot: PotentialSpec | None = None) -> float:
    """``(ε/2) uᵀKu + (1/ε) Σ_i m_i W(u_i)``."""
    pot = pot or _QUARTIC
    v = u.values
    mesh = u.mesh
    grad_term = 0.5 * epsilon * float(v @ (mesh.stiffness_matrix @ v))
    pot_term = float(mesh.lumped_mass @ pot.W(v)) / epsilon
    return grad_term + pot_term


def gradient(u: ScalarField, epsilon: float, pot: PotentialSpec | None = None) -> np.ndarray:
    """Unconstrained Euler-Lagrange load vector ``εKu + (1/ε) M_L W'(u)``."""
    pot = pot or _QUARTIC
    mesh = u.mesh
    return epsilon * (mesh.stiffness_matrix @ u.values) + mesh.lumped_mass * pot.dW(u.values) / epsilon


def _multiplier(g_free: np.ndarray, c_free: np.ndarray) -> float:
    # minimizer of ||g - λc|| in the M_L^{-1} norm; c = M_L 1 gives Σg / Σc
    return float(g_free.sum() / c_free.sum())


def dual_norm(r_free: np.ndarray, ml_free: np.ndarray) -> float:
    return float(np.sqrt(np.sum(r_free * r_free / ml_free)))


def lagrange_multiplier(u: ScalarField, epsilon: float, pot: PotentialSpec | None = None) -> float:
    """Multiplier ``λ`` best balancing the gradient against the mass constraint.

    Neumann: ``λ = 1ᵀg / area``. Dirichlet: the same weighted least-squares
    fit restricted to interior nodes.
    """
    g = gradient(u, epsilon, pot)
    f = free_dofs(u.mesh, u.bc)
    return _multiplier(g[f], u.mesh.lumped_mass[f])


def kkt_residual(u: ScalarField, epsilon: float, m: float, pot: PotentialSpec | None = None) -> EnergyReport:
    mesh = u.mesh
    g = gradient(u, epsilon, pot)
    f = free_dofs(mesh, u.bc)
    ml = mesh.lumped_mass[f]
    lam = _multiplier(g[f], ml)
    r = g[f] - lam * ml
    nd = normal_derivative_norm(u) if u.bc == "neumann" else 0.0
    return EnergyReport(
        energy=energy(u, epsilon, pot),
        gradient_field=g,
        lam=lam,
        kkt_residual=dual_norm(r, ml),
        mass_error=abs(u.mass - m),
        bc=u.bc,
        normal_derivative_norm=nd,
    )


def hessian_matrix(u: ScalarField, epsilon: float, pot: PotentialSpec | None = None,
                   restrict: bool = True) -> sp.csr_matrix:
    """``εK + (1/ε) M_L diag(W''(u))``, restricted to free dofs when ``restrict``."""
    pot = pot or _QUARTIC
    mesh = u.mesh
    H = epsilon * mesh.stiffness_matrix + sp.diags(mesh.lumped_mass * pot.d2W(u.values) / epsilon)
    H = H.tocsr()
    if restrict:
        f = free_dofs(mesh, u.bc)
        if len(f) != mesh.n_nodes:
            H = H[f][:, f]
    return H


def hessian_apply(u: ScalarField, epsilon: float, v, pot: PotentialSpec | None = None) -> np.ndarray:
    """Action of the second variation on a direction ``v`` (nodal vector).

    For Dirichlet fields the boundary entries of ``v`` must vanish and the
    boundary rows of the result are zeroed.
    """
    pot = pot or _QUARTIC
    mesh = u.mesh
    v = np.asarray(v, dtype=float)
    if u.bc == "dirichlet" and np.any(v[mesh.boundary_nodes] != 0.0):
        raise InvariantViolation("direction does not vanish on the boundary")
    out = epsilon * (mesh.stiffness_matrix @ v) + mesh.lumped_mass * pot.d2W(u.values) * v / epsilon
    if u.bc == "dirichlet":
        out[mesh.boundary_nodes] = 0.0
    return out


def normal_derivative_norm(u: ScalarField) -> float:
    """Boundary L² norm of the recovered normal derivative ``∂u/∂ν`` (diagnostic).

    Element gradients are averaged (area weighted) onto the boundary nodes
    and dotted with the inner normal.
    """
    mesh = u.mesh
    p = mesh.nodes[mesh.triangles]
    vals = u.values[mesh.triangles]
    area2 = 2.0 * mesh.triangle_areas
    gx = np.stack([p[:, 1, 1] - p[:, 2, 1], p[:, 2, 1] - p[:, 0, 1], p[:, 0, 1] - p[:, 1, 1]], axis=1)
    gy = np.stack([p[:, 2, 0] - p[:, 1, 0], p[:, 0, 0] - p[:, 2, 0], p[:, 1, 0] - p[:, 0, 0]], axis=1)
    grad = np.column_stack([(gx * vals).sum(1), (gy * vals).sum(1)]) / area2[:, None]
    acc = np.zeros((mesh.n_nodes, 2))
    wsum = np.zeros(mesh.n_nodes)
    for k in range(3):
        np.add.at(acc, mesh.triangles[:, k], grad * mesh.triangle_areas[:, None])
        np.add.at(wsum, mesh.triangles[:, k], mesh.triangle_areas)
    total = 0.0
    for lp in mesh.boundary_loops:
        nodal = acc[lp] / wsum[lp][:, None]
        dn = np.einsum("ij,ij->i", nodal, mesh.boundary_normals[lp])
        xy = mesh.nodes[lp]
        seg = np.linalg.norm(np.roll(xy, -1, axis=0) - xy, axis=1)
        weight = 0.5 * (seg + np.roll(seg, 1))
        total += float(np.sum(weight * dn * dn))
    return float(np.sqrt(total))
