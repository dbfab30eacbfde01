"""Acceptance suite: eleven numbered checks, each reporting pass or fail with its measurements."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .construction import compose_B, photograph_dirichlet, photograph_neumann, recovery_sequence
from .energy import ScalarField, energy, gradient
from .geometry_limits import ball_region, estimate_profile, euclidean_profile, sublevel_threshold
from .mesh import DomainSpec, build_domain, sample_boundary
from .potential import compute_sigma, line_tension, make_quartic, solve_profile
from .solver import (
    SolveConfig,
    concentration_check,
    flow,
    morse_index,
    multistart,
    neumann_spectrum,
    newton_refine,
)

BUDGETS = {1: 1.0, 2: 1.0, 3: 30.0, 4: 60.0, 5: 60.0, 6: 10.0, 7: 30.0, 8: 600.0, 9: 600.0, 10: 60.0, 11: 60.0}


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    seconds: float
    detail: dict = field(default_factory=dict)

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] criterion {self.number:2d}: {self.name} ({self.seconds:.2f} s)"

    def to_dict(self) -> dict:
        return {"number": self.number, "name": self.name, "passed": self.passed,
                "seconds": round(self.seconds, 3), "detail": self.detail}


class Context:
    """Shared state: meshes built once, and every flow run by criteria 6 to 9."""

    def __init__(self):
        self.meshes: dict = {}
        self.flows: list = []
        self.pot = make_quartic()

    def mesh(self, spec: DomainSpec):
        if spec not in self.meshes:
            self.meshes[spec] = build_domain(spec)
        return self.meshes[spec]


def _timed(number, name, fn, ctx):
    t0 = time.perf_counter()
    ok, detail = fn(ctx)
    dt = time.perf_counter() - t0
    within = dt <= BUDGETS[number]
    detail["runtime_ok"] = within
    return CriterionResult(number, name, bool(ok and within), dt, detail)


def _c1(ctx):
    sigma = compute_sigma(ctx.pot)
    return abs(sigma - 1.0 / 3.0) <= 1e-6, {"sigma": sigma, "error": abs(sigma - 1.0 / 3.0)}


def _c2(ctx):
    eps_list = (0.1, 0.05, 0.025)
    slopes, etas = [], []
    for eps in eps_list:
        prof = solve_profile(ctx.pot, eps)
        slopes.append(float((prof.q[1] - prof.q[0]) / (prof.t[1] - prof.t[0])))
        etas.append(prof.eta)
    rel = [abs(s * eps**0.25 - 1.0) for s, eps in zip(slopes, eps_list)]
    ok = max(rel) <= 0.01 and all(a > b for a, b in zip(etas, etas[1:]))
    return ok, {"epsilon": list(eps_list), "initial_slope": slopes, "relative_error": rel, "eta": etas}


def _c3(ctx):
    mesh = ctx.mesh(DomainSpec("unit_disk", h=0.02))
    masses = (1e-2, 5e-3, 2.5e-3)
    rn, rd = [], []
    for m in masses:
        est = estimate_profile(mesh, m, "neumann")
        rn.append(est.I_M / euclidean_profile(m, True))
        rd.append(est.I_bar_M / euclidean_profile(m, False))
    ok = True
    for ratios in (rn, rd):
        dev = [abs(r - 1.0) for r in ratios]
        ok &= all(0.9 <= r <= 1.1 for r in ratios)
        ok &= all(b <= a + 1e-12 for a, b in zip(dev, dev[1:]))
    return ok, {"m": list(masses), "neumann_ratio": rn, "dirichlet_ratio": rd}


def _c4(ctx):
    mesh = ctx.mesh(DomainSpec("unit_disk", h=0.01))
    m = 0.05
    region = ball_region(mesh, (1.0, 0.0), m)
    limit = ctx.pot.sigma * region.relative_perimeter
    tension_limit = line_tension(ctx.pot) * region.relative_perimeter
    eps_list = (0.08, 0.04, 0.02)
    energies = []
    for eps in eps_list:
        u, _ = recovery_sequence(region, solve_profile(ctx.pot, eps), m)
        energies.append(energy(u, eps, ctx.pot))
    gaps = [e - limit for e in energies]
    decreasing = all(b < a for a, b in zip(gaps, gaps[1:]))
    final_small = abs(gaps[-1]) <= 0.1 * limit
    nonneg = gaps[-1] >= -0.1 * limit
    return decreasing and final_small and nonneg, {
        "epsilon": list(eps_list), "energy": energies, "sigma_times_perimeter": limit, "gap": gaps,
        "strictly_decreasing": decreasing, "final_gap_fraction": gaps[-1] / limit,
        "line_tension_times_perimeter": tension_limit,
        "gap_to_line_tension_fraction": [(e - tension_limit) / tension_limit for e in energies],
    }


def _c5(ctx):
    mesh = ctx.mesh(DomainSpec("unit_disk", h=0.02))
    m, eps = 0.01, 0.01
    prof = solve_profile(ctx.pot, eps)
    c_m = sublevel_threshold(mesh, ctx.pot, m, "neumann", gamma_hat=1.0)
    emissions = [photograph_neumann(mesh, ctx.pot, p, m, eps, prof).energy_at_emission
                 for p in sample_boundary(mesh, 16)]
    return max(emissions) <= c_m, {"c_m": c_m, "max_emission": max(emissions), "min_emission": min(emissions)}


def _c6(ctx):
    mesh = ctx.mesh(DomainSpec("unit_disk", h=0.05))
    cfg = SolveConfig(epsilon=0.3, m=mesh.area / 2, enforce_caps=False)
    rng = np.random.default_rng(0)
    noise = rng.standard_normal(mesh.n_nodes)
    noise -= (mesh.lumped_mass @ noise) / mesh.area
    u0 = ScalarField(mesh, 0.5 + 1e-3 * noise)
    rec = newton_refine(u0, cfg, ctx.pot, provenance="constant+noise")
    ctx.flows.append(("6", flow(u0, cfg, ctx.pot), mesh.area))
    spread = float(np.ptp(rec.field.values))
    dist = float(np.max(np.abs(rec.field.values - 0.5)))
    ok = rec.kkt_residual <= 1e-9 and abs(rec.lam) <= 1e-9 and dist <= 1e-9
    return ok, {"kkt_residual": rec.kkt_residual, "lambda": rec.lam, "max_deviation_from_half": dist,
                "spread": spread, "newton_residuals": rec.newton_residuals}


def _c7(ctx):
    mesh = ctx.mesh(DomainSpec("unit_disk", h=0.03))
    mu = neumann_spectrum(mesh, 30)
    u = ScalarField(mesh, np.full(mesh.n_nodes, 0.5))
    rows = []
    ok = True
    for eps in (1.0, 0.3, 0.15):
        cfg = SolveConfig(epsilon=eps, m=mesh.area / 2, enforce_caps=False)
        idx, gap, _ = morse_index(u, cfg, ctx.pot)
        oracle = int(np.sum(mu[1:] < eps**-2))
        rows.append({"epsilon": eps, "morse_index": idx, "oracle": oracle, "gap": gap})
        ok &= idx == oracle
    ok &= rows[0]["morse_index"] == 0 and rows[1]["morse_index"] >= 1
    return ok, {"rows": rows, "mu_1": float(mu[1])}


def _bundled(name):
    from .cli import load_config

    return load_config(name)


def _multiplicity(ctx, name):
    cfg = _bundled(name)
    mesh = ctx.mesh(cfg.domain)
    scfg = cfg.solve_config(mesh.area)
    records, failures = multistart(mesh, ctx.pot, scfg, return_failures=True)
    for r in records:
        if r.flow is not None:
            ctx.flows.append((name, r.flow, mesh.area))
    c_m = sublevel_threshold(mesh, ctx.pot, scfg.m, scfg.bc, scfg.gamma_hat, scfg.tau_slack)
    return mesh, scfg, records, failures, c_m


def _c8(ctx):
    mesh, cfg, records, failures, c_m = _multiplicity(ctx, "eccentric-annulus-neumann.ini")
    low = [r for r in records if r.seed_provenance != "constant" and r.energy <= c_m
           and r.morse_index == 0 and concentration_check(r, cfg)]
    const = [r for r in records if r.seed_provenance == "constant"]
    const_above = bool(const) and const[0].energy > c_m
    return len(low) >= 4 and const_above, {
        "c_m": c_m, "epsilon": cfg.epsilon, "m": cfg.m, "n_records": len(records), "n_low_energy_index0_concentrated": len(low),
        "constant_energy": const[0].energy if const else None, "constant_above_c_m": const_above,
        "failures": len(failures), "low_energy_part_passed": len(low) >= 4,
        "epsilon_needed_for_constant_above_c_m": (cfg.m**2 / mesh.area) / c_m,
    }


def _c9(ctx):
    out = {}
    ok = True
    for name, need in (("disk-dirichlet.ini", 1), ("annulus-dirichlet.ini", 2)):
        mesh, cfg, records, failures, c_m = _multiplicity(ctx, name)
        low = [r for r in records if r.energy <= c_m]
        zero_trace = all(np.all(r.field.values[mesh.boundary_nodes] == 0.0) for r in records)
        out[name] = {"n_low_energy": len(low), "need": need, "c_m": c_m, "zero_trace": zero_trace,
                     "failures": len(failures)}
        ok &= len(low) >= need and zero_trace
    return ok, out


def _c10(ctx):
    cfg_n = _bundled("disk-neumann.ini")
    mesh = ctx.mesh(cfg_n.domain)
    s = cfg_n.solve_config(mesh.area)
    prof = solve_profile(ctx.pot, s.epsilon)
    dn = []
    for p in sample_boundary(mesh, 16):
        ph = photograph_neumann(mesh, ctx.pot, p, s.m, s.epsilon, prof)
        dn.append(float(np.linalg.norm(compose_B(ph.field, "neumann").coords - p.coords)))
    cfg_d = _bundled("disk-dirichlet.ini")
    mesh_d = ctx.mesh(cfg_d.domain)
    sd = cfg_d.solve_config(mesh_d.area)
    prof_d = solve_profile(ctx.pot, sd.epsilon)
    rng = np.random.default_rng(sd.seed)
    pts = mesh_d.nodes[np.sort(rng.choice(mesh_d.interior_nodes, 16, replace=False))]
    dd = []
    for p in pts:
        ph = photograph_dirichlet(mesh_d, ctx.pot, p, sd.m, sd.epsilon, prof_d)
        dd.append(float(np.linalg.norm(compose_B(ph.field, "dirichlet").coords - p)))
    tol_n = 0.2 * mesh.diameter
    tol_d = max(0.2 * mesh_d.diameter, mesh_d.delta_M)
    return max(dn) <= tol_n and max(dd) <= tol_d, {
        "neumann_max": max(dn), "neumann_tol": tol_n, "dirichlet_max": max(dd), "dirichlet_tol": tol_d}


def gradient_fd_check(mesh, eps=0.1, seed=0):
    """Central-difference errors of the energy against ``⟨∇E, v⟩`` at ``t = 1e-3`` and ``1e-4``."""
    rng = np.random.default_rng(seed)
    u = ScalarField(mesh, rng.uniform(-0.2, 1.2, mesh.n_nodes))
    v = rng.standard_normal(mesh.n_nodes)
    g = gradient(u, eps) @ v
    errs = []
    for t in (1e-3, 1e-4):
        fd = (energy(u.with_values(u.values + t * v), eps) - energy(u.with_values(u.values - t * v), eps)) / (2 * t)
        errs.append(abs(fd - g))
    return errs, abs(g)


def _c11(ctx):
    if not ctx.flows:
        _c6(ctx)
    worst_drift = 0.0
    monotone = True
    for _, fr, area in ctx.flows:
        worst_drift = max(worst_drift, fr.max_mass_drift / area)
        monotone &= fr.monotone
    mesh = ctx.mesh(DomainSpec("unit_disk", h=0.05))
    errs, scale = gradient_fd_check(mesh)
    quadratic = errs[1] <= errs[0] / 50.0 or errs[1] <= 1e-9 * scale
    ok = worst_drift <= 1e-10 and monotone and quadratic
    return ok, {"flows": len(ctx.flows), "max_drift_over_area": worst_drift, "energy_monotone": monotone,
                "fd_errors": errs, "fd_ratio": errs[0] / errs[1] if errs[1] > 0 else math.inf}


CRITERIA = {
    1: ("surface tension", _c1),
    2: ("profile ODE slope and layer width", _c2),
    3: ("Euclidean isoperimetric asymptotics", _c3),
    4: ("recovery energy vs sigma * perimeter", _c4),
    5: ("photograph sublevel containment", _c5),
    6: ("Newton to the constant solution", _c6),
    7: ("Morse index vs spectral oracle", _c7),
    8: ("Neumann multiplicity on the eccentric annulus", _c8),
    9: ("Dirichlet multiplicity on disk and annulus", _c9),
    10: ("homotopy closeness of B after photography", _c10),
    11: ("mass conservation, monotone energy, gradient check", _c11),
}


def run_criterion(number: int, ctx: Context | None = None) -> CriterionResult:
    name, fn = CRITERIA[number]
    return _timed(number, name, fn, ctx if ctx is not None else Context())


def run_all(verbose: bool = False, numbers=None) -> list[CriterionResult]:
    ctx = Context()
    out = []
    for n in numbers or sorted(CRITERIA):
        res = run_criterion(n, ctx)
        if verbose:
            print(res.line(), flush=True)
        out.append(res)
    return out
