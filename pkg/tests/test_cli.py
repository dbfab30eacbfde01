import json
import subprocess
import sys
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from acmass.cli import CONFIG_DIR, config_to_ini, load_config, main, parse_config, render_field_svg
from acmass.construction import photograph_dirichlet
from acmass.energy import ScalarField
from acmass.errors import ConfigError
from acmass.mesh import DomainSpec, build_domain

SVG = "{http://www.w3.org/2000/svg}"


def run_cli(*args):
    return subprocess.run([sys.executable, "-m", "acmass", *args], capture_output=True, text=True)


def test_profile_reports_sigma(tmp_path):
    assert main(["profile", "--config", "disk-neumann.ini", "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["payload"]["sigma"] == pytest.approx(1 / 3, abs=1e-8)
    assert (tmp_path / "summary.csv").exists()
    assert (tmp_path / "metadata.json").exists()


def test_negative_epsilon_exit_code(tmp_path):
    text = (CONFIG_DIR / "disk-neumann.ini").read_text().replace("epsilon = cap", "epsilon = -0.1")
    bad = tmp_path / "bad.ini"
    bad.write_text(text)
    proc = run_cli("profile", "--config", str(bad), "--out", str(tmp_path / "o"))
    assert proc.returncode == 2
    assert "epsilon" in proc.stderr
    assert not (tmp_path / "o" / "report.json").exists()


def test_unknown_key_rejected():
    with pytest.raises(ConfigError):
        parse_config((CONFIG_DIR / "disk-neumann.ini").read_text() + "\n[extra]\nkey = 1\n")
    with pytest.raises(ConfigError) as exc:
        parse_config((CONFIG_DIR / "disk-neumann.ini").read_text().replace("seed = 0", "seed = 0\nbogus = 1"))
    assert exc.value.field == "solver.bogus"


@pytest.mark.parametrize("name", sorted(p.name for p in CONFIG_DIR.glob("*.ini")))
def test_config_round_trip(name):
    cfg = load_config(name)
    again = parse_config(config_to_ini(cfg.raw), name)
    assert again.raw == cfg.raw
    assert config_to_ini(again.raw) == config_to_ini(cfg.raw)


def test_report_is_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["photograph", "--config", "disk-dirichlet.ini", "--out", str(a)]) == 0
    assert main(["photograph", "--config", "disk-dirichlet.ini", "--out", str(b)]) == 0
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()
    assert (a / "summary.csv").read_bytes() == (b / "summary.csv").read_bytes()


def test_multiplicity_eccentric_annulus(tmp_path):
    assert main(["multiplicity", "--config", "eccentric-annulus-neumann.ini", "--out", str(tmp_path),
                 "--jobs", "4"]) == 0
    summary = json.loads((tmp_path / "report.json").read_text())["payload"]["summary"]
    assert summary["cat_target"] == 4
    assert summary["n_distinct"] >= 4
    assert summary["passed"]


def _polygons(path):
    root = ET.parse(path).getroot()
    group = root.find(f"{SVG}g[@id='field']")
    return group, group.findall(f"{SVG}polygon")


def test_svg_well_formed(tmp_path, disk):
    u = ScalarField(disk, np.linspace(0, 1, disk.n_nodes))
    group, polys = _polygons(render_field_svg(u, tmp_path / "f.svg", (0.1, 0.2), (1.0, 0.0)))
    assert len(polys) == len(disk.triangles) == int(group.get("data-triangles"))


def test_svg_constant_zero_is_uniform(tmp_path, disk):
    _, polys = _polygons(render_field_svg(ScalarField(disk, np.zeros(disk.n_nodes)), tmp_path / "z.svg"))
    assert len({p.get("fill") for p in polys}) == 1


def test_svg_dirichlet_boundary_triangles_at_zero(tmp_path, pot):
    mesh = build_domain(DomainSpec("unit_disk", h=0.05, delta_m=0.6))
    out = photograph_dirichlet(mesh, pot, (1.0, 0.0), 0.02, 0.02)
    zero_fill = _polygons(render_field_svg(ScalarField(mesh, np.zeros(mesh.n_nodes)), tmp_path / "z.svg"))[1][0].get("fill")
    _, polys = _polygons(render_field_svg(out.field, tmp_path / "d.svg"))
    on_boundary = np.zeros(mesh.n_nodes, bool)
    on_boundary[mesh.boundary_nodes] = True
    # triangles with all three corners on the boundary carry only zero values
    for tri, poly in zip(mesh.triangles, polys):
        if on_boundary[tri].all():
            assert poly.get("fill") == zero_fill
    # triangles touching the boundary away from the bump are at the zero color too
    far = np.linalg.norm(mesh.nodes[mesh.triangles].mean(axis=1) - out.source_point, axis=1) > 0.5
    touching = on_boundary[mesh.triangles].any(axis=1) & far
    assert touching.any()
    assert all(polys[i].get("fill") == zero_fill for i in np.flatnonzero(touching))
