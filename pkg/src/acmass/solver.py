"""Mass-preserving flow, bordered Newton refinement, Morse indices and the multistart pipeline."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackError, ArpackNoConvergence, LinearOperator, eigsh, splu

from .construction import barycenter, compose_B, photograph_dirichlet, photograph_neumann
from .energy import ScalarField, dual_norm, energy, free_dofs, gradient, hessian_matrix, kkt_residual
from .errors import (
    AcmassError,
    ConfigError,
    DidNotConverge,
    FactorizationFailure,
    LinearSolveFailure,
    SingularKKT,
    StepCollapse,
)
from .geometry_limits import sublevel_threshold
from .mesh import DomainMesh, sample_boundary
from .potential import PotentialSpec, make_quartic, solve_profile

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolveConfig:
    epsilon: float
    m: float
    bc: str = "neumann"
    dt: float | None = None
    max_steps: int = 400
    stall_tol: float = 1e-9
    stabilization: float = 2.0
    newton_tol: float = 1e-9
    newton_max_iter: int = 40
    basin_tol: float = math.inf
    dedup_l2_tol: float | None = None
    dedup_energy_tol: float | None = None
    dedup_bary_tol: float | None = None
    n_seeds: int = 32
    gamma_hat: float = 1.0
    tau_slack: float = 1.0
    mu_hat: float = 3.0
    alpha: float = 0.1
    gap_rel_tol: float = 1e-3
    m_cap_fraction: float = 0.02
    eps_cap_factor: float = 0.1
    enforce_caps: bool = True
    constant_seed: bool = True
    seed: int = 0

    def validate(self, area: float | None = None) -> "SolveConfig":
        if self.bc not in ("neumann", "dirichlet"):
            raise ConfigError("bc", f"unknown boundary condition {self.bc!r}")
        if not self.epsilon > 0:
            raise ConfigError("epsilon", "must be positive")
        if not self.m > 0:
            raise ConfigError("m", "must be positive")
        if area is not None and not self.m < area:
            raise ConfigError("m", f"must be below the domain area {area:.6g}")
        for name in ("stall_tol", "newton_tol", "basin_tol", "gap_rel_tol", "mu_hat", "alpha", "gamma_hat"):
            if not getattr(self, name) > 0:
                raise ConfigError(name, "must be positive")
        for name in ("dt", "dedup_l2_tol", "dedup_energy_tol", "dedup_bary_tol"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ConfigError(name, "must be positive")
        if self.tau_slack < 0 or self.stabilization < 0:
            raise ConfigError("tau_slack" if self.tau_slack < 0 else "stabilization", "must be nonnegative")
        for name in ("max_steps", "newton_max_iter", "n_seeds"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(name, "must be at least 1")
        if self.enforce_caps:
            if area is not None and self.m > self.m_cap_fraction * area:
                raise ConfigError("m", f"exceeds the mass cap {self.m_cap_fraction} * area = {self.m_cap_fraction * area:.6g}")
            cap = self.eps_cap
            if self.epsilon > cap * (1 + 1e-12):
                raise ConfigError("epsilon", f"exceeds the cap {self.eps_cap_factor} * sqrt(m / pi) = {cap:.6g}")
        return self

    @property
    def eps_cap(self) -> float:
        return self.eps_cap_factor * math.sqrt(self.m / math.pi)

    @property
    def l2_tol(self) -> float:
        return self.dedup_l2_tol if self.dedup_l2_tol is not None else 0.2 * math.sqrt(self.m)

    @property
    def bary_tol(self) -> float:
        return self.dedup_bary_tol if self.dedup_bary_tol is not None else 0.5 * math.sqrt(self.m)


@dataclass
class FlowResult:
    field: ScalarField
    energies: np.ndarray
    masses: np.ndarray
    steps: int
    rejected: int
    reason: str

    @property
    def max_mass_drift(self) -> float:
        return float(np.max(np.abs(np.diff(self.masses)))) if len(self.masses) > 1 else 0.0

    @property
    def monotone(self) -> bool:
        e = self.energies
        return bool(np.all(np.diff(e) <= 1e-12 * np.maximum(1.0, np.abs(e[:-1]))))


@dataclass
class CriticalPointRecord:
    field: ScalarField
    energy: float
    lam: float
    kkt_residual: float
    mass_error: float
    morse_index: int
    gap: float
    nondegenerate: bool
    barycenter: tuple[float, float]
    projected_point: tuple[float, float]
    seed_provenance: str
    newton_residuals: list = field(default_factory=list)
    flow: FlowResult | None = None

    def to_dict(self) -> dict:
        return {
            "energy": self.energy,
            "lambda": self.lam,
            "kkt_residual": self.kkt_residual,
            "mass_error": self.mass_error,
            "morse_index": self.morse_index,
            "gap": self.gap,
            "nondegenerate": self.nondegenerate,
            "barycenter": list(self.barycenter),
            "projected_point": list(self.projected_point),
            "seed_provenance": self.seed_provenance,
            "lambda_over_energy": abs(self.lam) / self.energy if self.energy > 0 else None,
        }


# ---------------------------------------------------------------------------
# flow


def _mass_vector(mesh: DomainMesh, f: np.ndarray) -> np.ndarray:
    return mesh.lumped_mass[f]


def flow(u0: ScalarField, cfg: SolveConfig, pot: PotentialSpec | None = None) -> FlowResult:
    """Stabilized semi-implicit L² gradient flow with the mass enforced exactly each step.

    Each step solves ``(M_L (1/dt + s/ε) + εK) u⁺ = M_L (u/dt + s u/ε - W'(u)/ε) + λ c``
    on the free dofs, with ``c = M_L 1`` and ``λ`` fixed by ``cᵀu⁺ = m``.
    Steps that raise the energy are retried at half the time step.
    """
    pot = pot or make_quartic()
    mesh = u0.mesh
    eps = cfg.epsilon
    f = free_dofs(mesh, u0.bc)
    ml = mesh.lumped_mass[f]
    c = ml
    K = mesh.stiffness_matrix
    if len(f) != mesh.n_nodes:
        K = K[f][:, f]
    K = K.tocsc()
    s = cfg.stabilization
    dt0 = cfg.dt if cfg.dt is not None else 10.0 * eps
    dt = dt0
    m_target = u0.mass
    factors: dict = {}

    def solver_for(step):
        if step not in factors:
            A = (sp.diags(ml * (1.0 / step + s / eps)) + eps * K).tocsc()
            try:
                lu = splu(A)
            except RuntimeError as exc:
                raise LinearSolveFailure(str(exc)) from exc
            Ac = lu.solve(c)
            factors[step] = (lu, Ac, float(c @ Ac))
        return factors[step]

    full = np.array(u0.values, dtype=float)
    u = full[f].copy()
    E = energy(u0, eps, pot)
    energies, masses = [E], [float(c @ u)]
    rejected = 0
    streak = 0
    reason = "max_steps"
    steps = 0
    while steps < cfg.max_steps:
        lu, Ac, cAc = solver_for(dt)
        b = ml * (u * (1.0 / dt + s / eps) - pot.dW(u) / eps)
        Ab = lu.solve(b)
        lam = (m_target - float(c @ Ab)) / cAc
        u_new = Ab + lam * Ac
        if not np.all(np.isfinite(u_new)):
            raise LinearSolveFailure("flow step produced non-finite values")
        full[f] = u_new
        E_new = energy(u0.with_values(full), eps, pot)
        if E_new > E + 1e-14 * max(1.0, abs(E)):
            full[f] = u
            rejected += 1
            streak = 0
            dt *= 0.5
            if dt < 1e-12 * dt0:
                raise StepCollapse(f"time step fell below {dt:.3e}")
            continue
        steps += 1
        drop = E - E_new
        u = u_new
        E = E_new
        energies.append(E)
        masses.append(float(c @ u))
        streak += 1
        if streak >= 10 and dt < dt0:
            dt = min(2.0 * dt, dt0)
            streak = 0
        if drop <= cfg.stall_tol * max(abs(E), 1e-300):
            reason = "stall"
            break
    full[f] = u
    return FlowResult(u0.with_values(full), np.array(energies), np.array(masses), steps, rejected, reason)


# ---------------------------------------------------------------------------
# Newton on the bordered system


def _bordered(H: sp.spmatrix, c: np.ndarray) -> sp.csc_matrix:
    n = H.shape[0]
    col = sp.csc_matrix(c.reshape(-1, 1))
    return sp.bmat([[H, col], [col.T, sp.csc_matrix((1, 1))]], format="csc")


def _residual(u: ScalarField, eps: float, pot: PotentialSpec, f: np.ndarray):
    g = gradient(u, eps, pot)[f]
    ml = u.mesh.lumped_mass[f]
    lam = float(g.sum() / ml.sum())
    r = g - lam * ml
    return r, lam, dual_norm(r, ml)


def newton_refine(u: ScalarField, cfg: SolveConfig, pot: PotentialSpec | None = None,
                  provenance: str = "", flow_result: FlowResult | None = None,
                  with_morse: bool = True) -> CriticalPointRecord:
    """Solve the constrained Euler-Lagrange system by Newton steps on the bordered KKT matrix.

    Each step solves ``[[H, c], [cᵀ, 0]] [δu, -δλ] = [-r, m - cᵀu]``; a
    backtracking line search keeps the residual norm decreasing.
    """
    pot = pot or make_quartic()
    mesh = u.mesh
    eps = cfg.epsilon
    f = free_dofs(mesh, u.bc)
    c = mesh.lumped_mass[f]
    r, lam, res = _residual(u, eps, pot, f)
    if res > cfg.basin_tol:
        raise DidNotConverge(f"initial residual {res:.3e} lies outside the Newton basin {cfg.basin_tol:.3e}")
    history = [res]
    full = np.array(u.values, dtype=float)
    for _ in range(cfg.newton_max_iter):
        if res <= cfg.newton_tol:
            break
        H = hessian_matrix(u, eps, pot, restrict=True)
        KKT = _bordered(H, c)
        rhs = np.concatenate([-r, [cfg.m - float(c @ full[f])]])
        try:
            sol = splu(KKT).solve(rhs)
        except RuntimeError as exc:
            raise SingularKKT(f"bordered Hessian is singular: {exc}") from exc
        if not np.all(np.isfinite(sol)):
            raise SingularKKT("bordered solve returned non-finite values")
        du = sol[:-1]
        step = 1.0
        while True:
            trial = full.copy()
            trial[f] = full[f] + step * du
            ut = u.with_values(trial)
            rt, lamt, rest = _residual(ut, eps, pot, f)
            if rest < res or step < 1e-4:
                break
            step *= 0.5
        if rest >= res:
            raise DidNotConverge(f"line search stalled at residual {res:.3e}")
        full, u, r, lam, res = trial, ut, rt, lamt, rest
        history.append(res)
    if res > cfg.newton_tol:
        raise DidNotConverge(f"residual {res:.3e} above {cfg.newton_tol:.3e} after {cfg.newton_max_iter} iterations")
    rep = kkt_residual(u, eps, cfg.m, pot)
    if with_morse:
        index, gap, second = morse_index(u, cfg, pot)
        nondeg = bool(gap > cfg.gap_rel_tol * second)
    else:
        index, gap, nondeg = -1, float("nan"), False
    bary = barycenter(u)
    proj = compose_B(u, cfg.bc)
    return CriticalPointRecord(
        field=u,
        energy=rep.energy,
        lam=rep.lam,
        kkt_residual=rep.kkt_residual,
        mass_error=rep.mass_error,
        morse_index=index,
        gap=gap,
        nondegenerate=nondeg,
        barycenter=(float(bary[0]), float(bary[1])),
        projected_point=(float(proj.coords[0]), float(proj.coords[1])),
        seed_provenance=provenance,
        newton_residuals=history,
        flow=flow_result,
    )


# ---------------------------------------------------------------------------
# Morse index


def symmetric_inertia(A: sp.spmatrix) -> tuple[int, int, int]:
    """(negative, zero, positive) eigenvalue counts of a symmetric sparse matrix.

    Uses an LU factorization restricted to symmetric permutations
    (``A = P L U Pᵀ``); then ``U = D Lᵀ`` and Sylvester's law reads the
    inertia off ``diag(U)``.
    """
    A = sp.csc_matrix(A)
    try:
        lu = splu(A, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                  options={"SymmetricMode": True})
    except RuntimeError as exc:
        raise FactorizationFailure(f"symmetric factorization failed: {exc}") from exc
    if not np.array_equal(lu.perm_r, lu.perm_c):
        raise FactorizationFailure("factorization used a non-symmetric pivot order")
    d = lu.U.diagonal()
    scale = np.max(np.abs(d))
    tiny = np.abs(d) <= 1e-13 * scale
    return int(np.sum((d < 0) & ~tiny)), int(np.sum(tiny)), int(np.sum((d > 0) & ~tiny))


def _constrained_operator(H: sp.spmatrix, c: np.ndarray):
    lu = splu(_bordered(H, c))
    n = H.shape[0]

    def apply(b):
        return lu.solve(np.concatenate([np.asarray(b, dtype=float).ravel(), [0.0]]))[:n]

    return LinearOperator((n, n), matvec=apply, dtype=float)


def constrained_eigs(u: ScalarField, cfg: SolveConfig, pot: PotentialSpec | None = None,
                     k: int = 2, sigma: float = 0.0) -> np.ndarray:
    """Eigenvalues of the mass-constrained pencil ``(H, M̂)`` closest to ``sigma``."""
    pot = pot or make_quartic()
    mesh = u.mesh
    f = free_dofs(mesh, u.bc)
    H = hessian_matrix(u, cfg.epsilon, pot, restrict=True)
    M = mesh.mass_matrix
    if len(f) != mesh.n_nodes:
        M = M[f][:, f]
    c = mesh.lumped_mass[f]
    Hs = (H - sigma * M).tocsc() if sigma else H.tocsc()
    try:
        op = _constrained_operator(Hs, c)
    except RuntimeError as exc:
        raise FactorizationFailure(str(exc)) from exc
    k = min(k, len(f) - 2)
    try:
        vals = eigsh(H, k=k, M=M.tocsc(), sigma=sigma, OPinv=op, which="LM",
                     v0=np.ones(len(f)) / math.sqrt(len(f)) + 1e-3 * np.cos(np.arange(len(f))),
                     tol=1e-10, return_eigenvectors=False)
    except (ArpackError, ArpackNoConvergence) as exc:
        raise FactorizationFailure(f"eigensolver failed: {exc}") from exc
    return np.sort(vals)


def morse_index(u: ScalarField, cfg: SolveConfig, pot: PotentialSpec | None = None) -> tuple[int, float, float]:
    """Number of negative eigenvalues of the Hessian restricted to mass-zero directions.

    Returns ``(index, gap, second)`` where ``gap`` is the smallest
    eigenvalue modulus of the constrained pencil and ``second`` the next one.
    The count comes from factorization inertia (Haynsworth):
    ``neg(H|c⊥) = neg(H) + [cᵀH⁻¹c > 0] - 1``.
    """
    pot = pot or make_quartic()
    mesh = u.mesh
    f = free_dofs(mesh, u.bc)
    H = hessian_matrix(u, cfg.epsilon, pot, restrict=True).tocsc()
    c = mesh.lumped_mass[f]
    neg, zero, _ = symmetric_inertia(H)
    if zero:
        raise FactorizationFailure("Hessian is singular; inertia of the restriction is undefined")
    try:
        Hc = splu(H).solve(c)
    except RuntimeError as exc:
        raise FactorizationFailure(str(exc)) from exc
    index = neg + (1 if float(c @ Hc) > 0 else 0) - 1
    vals = np.abs(constrained_eigs(u, cfg, pot, k=2))
    vals.sort()
    return int(index), float(vals[0]), float(vals[1])


def neumann_spectrum(mesh: DomainMesh, k: int, lumped: bool = False) -> np.ndarray:
    """Smallest ``k`` eigenvalues of the discrete Neumann Laplacian pencil ``(K̂, M̂)``."""
    M = sp.diags(mesh.lumped_mass).tocsc() if lumped else mesh.mass_matrix.tocsc()
    vals = eigsh(mesh.stiffness_matrix.tocsc(), k=k, M=M, sigma=-1.0, which="LM",
                 v0=np.ones(mesh.n_nodes), tol=1e-12, return_eigenvectors=False)
    return np.sort(vals)


# ---------------------------------------------------------------------------
# pipeline


def _seed_points(mesh: DomainMesh, cfg: SolveConfig) -> list[tuple[str, np.ndarray]]:
    if cfg.bc == "neumann":
        pts = sample_boundary(mesh, cfg.n_seeds)
        return [(f"boundary[{p.component}:{p.s:.4f}]", np.asarray(p.coords)) for p in pts]
    rng = np.random.default_rng(cfg.seed)
    nodes = mesh.interior_nodes
    pick = np.sort(rng.choice(len(nodes), size=min(cfg.n_seeds, len(nodes)), replace=False))
    return [(f"interior[{int(nodes[i])}]", mesh.nodes[nodes[i]].copy()) for i in pick]


def _run_seed(args):
    mesh, pot, cfg, label, point, profile = args
    try:
        if point is None:
            u0 = ScalarField(mesh, np.full(mesh.n_nodes, cfg.m / mesh.area), cfg.bc)
        elif cfg.bc == "neumann":
            u0 = photograph_neumann(mesh, pot, point, cfg.m, cfg.epsilon, profile).field
        else:
            u0 = photograph_dirichlet(mesh, pot, point, cfg.m, cfg.epsilon, profile).field
        fr = flow(u0, cfg, pot)
        rec = newton_refine(fr.field, cfg, pot, provenance=label, flow_result=fr)
        return rec, None
    except AcmassError as exc:
        return None, {"seed": label, "error": type(exc).__name__, "message": str(exc)}


def multistart(mesh: DomainMesh, pot: PotentialSpec, cfg: SolveConfig, jobs: int = 1,
               return_failures: bool = False):
    """Flow and refine from photographs at sampled points, plus the constant seed (Neumann)."""
    cfg.validate(mesh.area)
    profile = solve_profile(pot, cfg.epsilon)
    tasks = [(mesh, pot, cfg, label, p, profile) for label, p in _seed_points(mesh, cfg)]
    if cfg.bc == "neumann" and cfg.constant_seed:
        tasks.append((mesh, pot, cfg, "constant", None, profile))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_run_seed, tasks))
    else:
        results = [_run_seed(t) for t in tasks]
    records = [r for r, _ in results if r is not None]
    failures = [e for _, e in results if e is not None]
    for e in failures:
        log.info("seed %s failed: %s", e["seed"], e["message"])
    c_m = sublevel_threshold(mesh, pot, cfg.m, cfg.bc, cfg.gamma_hat, cfg.tau_slack)
    out = dedup(records, cfg, c_m)
    return (out, failures) if return_failures else out


def _l2(a: ScalarField, b: ScalarField) -> float:
    d = a.values - b.values
    return float(math.sqrt(max(d @ (a.mesh.mass_matrix @ d), 0.0)))


def dedup(records, cfg: SolveConfig, c_m: float | None = None) -> list[CriticalPointRecord]:
    """Greedy clustering of records sorted by energy.

    A record joins the first cluster whose anchor is within the L², energy
    and barycenter tolerances; each cluster is represented by its member with
    the lowest KKT residual.
    """
    recs = sorted(records, key=lambda r: (r.energy, r.seed_provenance))
    if not recs:
        return []
    if cfg.dedup_energy_tol is not None:
        e_tol = cfg.dedup_energy_tol
    elif c_m is not None:
        e_tol = 0.05 * c_m
    else:
        e_tol = 0.05 * max(r.energy for r in recs)
    clusters: list[list[CriticalPointRecord]] = []
    for r in recs:
        for cl in clusters:
            a = cl[0]
            if (abs(r.energy - a.energy) <= e_tol
                    and math.dist(r.barycenter, a.barycenter) <= cfg.bary_tol
                    and _l2(r.field, a.field) <= cfg.l2_tol):
                cl.append(r)
                break
        else:
            clusters.append([r])
    return [min(cl, key=lambda r: (r.kkt_residual, r.seed_provenance)) for cl in clusters]


def concentration_check(u, cfg: SolveConfig, center=None) -> bool:
    """Whether at most ``α m`` of ``∫|u|`` lies outside ``B(p_u, μ̂ √m)``.

    ``p_u`` defaults to the projected barycenter.
    """
    fld = u.field if isinstance(u, CriticalPointRecord) else u
    if center is None:
        if isinstance(u, CriticalPointRecord):
            center = u.projected_point
        else:
            center = compose_B(fld, cfg.bc).coords
    mesh = fld.mesh
    w = mesh.lumped_mass * np.abs(fld.values)
    outside = np.linalg.norm(mesh.nodes - np.asarray(center, dtype=float), axis=1) > cfg.mu_hat * math.sqrt(cfg.m)
    return bool(float(w[outside].sum()) <= cfg.alpha * cfg.m)


def with_overrides(cfg: SolveConfig, **kw) -> SolveConfig:
    return replace(cfg, **kw)
