import json
import math

import numpy as np
import pytest

from acmass.construction import photograph_neumann
from acmass.energy import ScalarField
from acmass.errors import ConfigError, SingularKKT
from acmass.geometry_limits import sublevel_threshold
from acmass.mesh import sample_boundary
from acmass.potential import solve_profile
from acmass.solver import (
    SolveConfig,
    concentration_check,
    dedup,
    flow,
    morse_index,
    multistart,
    neumann_spectrum,
    newton_refine,
    with_overrides,
)


def half_field(mesh, noise=0.0, seed=0):
    v = np.full(mesh.n_nodes, 0.5)
    if noise:
        z = np.random.default_rng(seed).standard_normal(mesh.n_nodes)
        z -= (mesh.lumped_mass @ z) / mesh.area
        v = v + noise * z
    return ScalarField(mesh, v)


@pytest.fixture(scope="module")
def disk_bump(disk, pot):
    """Converged boundary bump on the coarse disk and the config that produced it."""
    cfg = SolveConfig(epsilon=0.02, m=0.05, enforce_caps=False)
    u0 = photograph_neumann(disk, pot, (1.0, 0.0), cfg.m, cfg.epsilon).field
    fr = flow(u0, cfg, pot)
    return cfg, newton_refine(fr.field, cfg, pot, provenance="east", flow_result=fr)


# configuration

def test_config_validation():
    with pytest.raises(ConfigError) as exc:
        SolveConfig(epsilon=-0.1, m=0.05).validate(math.pi)
    assert exc.value.field == "epsilon"
    with pytest.raises(ConfigError) as exc:
        SolveConfig(epsilon=0.001, m=4.0).validate(math.pi)
    assert exc.value.field == "m"
    with pytest.raises(ConfigError) as exc:
        SolveConfig(epsilon=0.05, m=0.05).validate(math.pi)
    assert exc.value.field == "epsilon"
    SolveConfig(epsilon=0.01, m=0.05).validate(math.pi)


# flow

def test_flow_constant_is_fixed_point(disk, pot):
    cfg = SolveConfig(epsilon=0.05, m=0.05, enforce_caps=False)
    u0 = ScalarField(disk, np.full(disk.n_nodes, cfg.m / disk.area))
    fr = flow(u0, cfg, pot)
    assert np.max(np.abs(fr.field.values - u0.values)) <= 1e-12


def test_flow_mass_drift_and_monotone(disk, pot):
    cfg = SolveConfig(epsilon=0.02, m=0.05, enforce_caps=False, max_steps=1000, dt=1e-5, stall_tol=1e-300)
    u0 = photograph_neumann(disk, pot, (0.0, 1.0), cfg.m, cfg.epsilon).field
    fr = flow(u0, cfg, pot)
    assert fr.steps == 1000
    assert fr.max_mass_drift <= 1e-10 * disk.area
    assert fr.monotone


def test_flow_dirichlet_keeps_zero_trace(disk, pot):
    cfg = SolveConfig(epsilon=0.05, m=0.1, bc="dirichlet", enforce_caps=False)
    r = np.linalg.norm(disk.nodes, axis=1)
    v = np.where(r < 0.3, 1.0, 0.0)
    v[disk.boundary_nodes] = 0.0
    u0 = ScalarField(disk, v * cfg.m / (disk.lumped_mass @ v), "dirichlet")
    fr = flow(u0, cfg, pot)
    assert np.all(fr.field.values[disk.boundary_nodes] == 0.0)
    assert fr.max_mass_drift <= 1e-10 * disk.area


# Newton

def test_newton_recovers_half(disk, pot):
    cfg = SolveConfig(epsilon=0.3, m=disk.area / 2, enforce_caps=False)
    rec = newton_refine(half_field(disk, 1e-3), cfg, pot)
    assert np.max(np.abs(rec.field.values - 0.5)) <= 1e-9
    assert abs(rec.lam) <= 1e-9
    assert rec.kkt_residual <= cfg.newton_tol


def test_newton_superlinear(disk_bump):
    cfg, rec = disk_bump
    res = rec.newton_residuals
    assert len(res) >= 3
    assert res[-1] / res[-2] <= 0.1
    assert rec.kkt_residual <= cfg.newton_tol
    assert rec.mass_error <= 1e-10 * rec.field.mesh.area


def test_record_contract(disk_bump):
    cfg, rec = disk_bump
    assert rec.morse_index == 0
    assert rec.energy >= 0
    d = rec.to_dict()
    for key in ("energy", "lambda", "kkt_residual", "morse_index", "gap", "barycenter", "projected_point",
                "seed_provenance"):
        assert key in d
    json.dumps(d)


@pytest.mark.xfail(strict=True, reason="on this mesh the bump is pinned to the grid and the rotational zero mode "
                                       "is lifted, so the concentric annulus gives a nondegenerate record")
def test_concentric_annulus_flagged_degenerate(annulus, pot):
    cfg = SolveConfig(epsilon=0.004, m=0.005)
    u0 = photograph_neumann(annulus, pot, (1.0, 0.0), cfg.m, cfg.epsilon).field
    fr = flow(u0, cfg, pot)
    try:
        rec = newton_refine(fr.field, cfg, pot)
    except SingularKKT:
        return
    assert not rec.nondegenerate


# Morse index

def test_morse_examples(disk, pot):
    u = half_field(disk)
    m = disk.area / 2
    assert morse_index(u, SolveConfig(epsilon=1.0, m=m, enforce_caps=False), pot)[0] == 0
    assert morse_index(u, SolveConfig(epsilon=0.3, m=m, enforce_caps=False), pot)[0] >= 1


@pytest.mark.parametrize("eps", [1.0, 0.3, 0.15])
def test_morse_matches_spectral_oracle(disk, pot, eps):
    mu = neumann_spectrum(disk, 30, lumped=True)
    expected = int(np.sum(mu[1:] < eps**-2))
    assert expected < 29
    cfg = SolveConfig(epsilon=eps, m=disk.area / 2, enforce_caps=False)
    assert morse_index(half_field(disk), cfg, pot)[0] == expected


def test_first_neumann_eigenvalue(disk_fine):
    mu = neumann_spectrum(disk_fine, 3)
    assert mu[0] == pytest.approx(0.0, abs=1e-8)
    assert mu[1] == pytest.approx(1.841183781**2, rel=5e-3)


# multistart, dedup and concentration

@pytest.fixture(scope="module")
def disk_multistart(disk, pot):
    cfg = SolveConfig(epsilon=0.02, m=0.05, n_seeds=6, enforce_caps=False)
    return cfg, multistart(disk, pot, cfg, return_failures=True)


def test_multistart_records(disk, pot, disk_multistart):
    cfg, (records, failures) = disk_multistart
    assert not failures
    c_m = sublevel_threshold(disk, pot, cfg.m, "neumann")
    consts = [r for r in records if r.seed_provenance == "constant"]
    assert len(consts) == 1
    assert consts[0].energy == pytest.approx(disk.area * pot.W(cfg.m / disk.area) / cfg.epsilon, rel=1e-12)
    bumps = [r for r in records if r.seed_provenance != "constant"]
    assert len(bumps) >= 2
    for r in bumps:
        assert r.energy <= c_m
        assert r.kkt_residual <= cfg.newton_tol
        assert r.mass_error <= 1e-10 * disk.area
        if r.nondegenerate:
            assert r.morse_index == 0


def test_constant_energy_above_threshold_for_small_eps(disk, pot):
    m = 0.05
    c_m = sublevel_threshold(disk, pot, m, "neumann")
    assert disk.area * pot.W(m / disk.area) / 0.001 > c_m


def test_multistart_dirichlet_disk(pot):
    from acmass.mesh import DomainSpec, build_domain

    mesh = build_domain(DomainSpec("unit_disk", h=0.05, delta_m=0.6))
    cfg = SolveConfig(epsilon=0.02, m=0.05, bc="dirichlet", n_seeds=4, enforce_caps=False)
    records = multistart(mesh, pot, cfg)
    assert len(records) >= 1
    for r in records:
        assert np.all(r.field.values[mesh.boundary_nodes] == 0.0)


def test_multistart_deterministic(disk, pot, disk_multistart):
    cfg, (records, _) = disk_multistart
    again = multistart(disk, pot, cfg)
    assert json.dumps([r.to_dict() for r in records]) == json.dumps([r.to_dict() for r in again])


def test_multistart_parallel_matches_serial(disk, pot, disk_multistart):
    cfg, (records, _) = disk_multistart
    par = multistart(disk, pot, cfg, jobs=2)
    assert json.dumps([r.to_dict() for r in records]) == json.dumps([r.to_dict() for r in par])


def test_multistart_eccentric_annulus(eccentric, pot):
    cfg = SolveConfig(epsilon=0.1 * math.sqrt(0.0057 / math.pi), m=0.0057, n_seeds=32)
    records = multistart(eccentric, pot, cfg, jobs=4)
    c_m = sublevel_threshold(eccentric, pot, cfg.m, "neumann")
    low = [r for r in records if r.seed_provenance != "constant" and r.energy <= c_m]
    assert len(low) >= 4


def test_dedup_examples(disk_bump, disk, pot):
    cfg, rec = disk_bump
    assert dedup([], cfg) == []
    assert len(dedup([rec, rec], cfg)) == 1
    u0 = photograph_neumann(disk, pot, (-1.0, 0.0), cfg.m, cfg.epsilon).field
    west = newton_refine(flow(u0, cfg, pot).field, cfg, pot, provenance="west")
    assert len(dedup([rec, west], cfg)) == 2


def test_concentration_examples(disk, pot):
    cfg = SolveConfig(epsilon=0.01, m=0.05, enforce_caps=False)
    prof = solve_profile(pot, cfg.epsilon)
    for p in sample_boundary(disk, 4):
        out = photograph_neumann(disk, pot, p, cfg.m, cfg.epsilon, prof)
        assert concentration_check(out.field, cfg)
    const = ScalarField(disk, np.full(disk.n_nodes, cfg.m / disk.area))
    assert not concentration_check(const, cfg, center=(1.0, 0.0))
    assert concentration_check(const, with_overrides(cfg, alpha=1.0), center=(1.0, 0.0))
