"""Configuration-driven experiment runner.

Usage::

    acmass <subcommand> --config run.ini [--out DIR] [--seed N] [--jobs N] [--format json|csv]

Subcommands: profile, isoperimetric, photograph, gamma-check, solve,
multiplicity, check.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import io
import json
import math
import platform
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np
import scipy

from . import __version__
from .construction import compose_B, barycenter, photograph_dirichlet, photograph_neumann, recovery_sequence
from .energy import ScalarField, energy
from .errors import AcmassError, ConfigError, InvalidGeometry
from .geometry_limits import ball_region, estimate_profile, euclidean_profile, sublevel_threshold
from .mesh import DomainSpec, build_domain, sample_boundary
from .potential import PotentialSpec, check_assumptions, from_coefficients, line_tension, make_quartic, solve_profile
from .solver import SolveConfig, flow, multistart, newton_refine

SUBCOMMANDS = ("profile", "isoperimetric", "photograph", "gamma-check", "solve", "multiplicity", "check")
CONFIG_DIR = Path(__file__).with_name("configs")

_SOLVER_FIELDS = {f.name: f for f in dataclasses.fields(SolveConfig)}
_SOLVER_FIELDS.pop("epsilon")
_SOLVER_FIELDS.pop("m")
_SOLVER_FIELDS.pop("bc")


@dataclass
class ExperimentConfig:
    domain: DomainSpec
    potential: str = "quartic"
    coefficients: tuple | None = None
    mode: str = "neumann"
    m: float | None = None
    m_fraction: float | None = None
    epsilon: float | None = None
    epsilons: tuple = ()
    masses: tuple = ()
    n_centers: int = 64
    n_points: int = 16
    step_tol: float = 1e-6
    solver: dict = field(default_factory=dict)
    out: str = "out"
    formats: tuple = ("json", "csv")
    raw: dict = field(default_factory=dict)

    def make_potential(self) -> PotentialSpec:
        if self.potential == "quartic":
            return make_quartic()
        return from_coefficients(self.coefficients, name=self.potential)

    def mass(self, area: float) -> float:
        return self.m if self.m is not None else self.m_fraction * area

    def solve_config(self, area: float, seed: int | None = None) -> SolveConfig:
        m = self.mass(area)
        eps = self.epsilon
        kw = dict(self.solver)
        if seed is not None:
            kw["seed"] = seed
        probe = SolveConfig(epsilon=1.0, m=m, bc=self.mode, **kw)
        if eps is None:
            eps = probe.eps_cap
        cfg = dataclasses.replace(probe, epsilon=eps)
        try:
            return cfg.validate(area)
        except ConfigError as exc:
            section = "problem" if exc.field in ("m", "epsilon", "bc") else "solver"
            raise ConfigError(f"{section}.{exc.field}", str(exc).split(": ", 1)[-1]) from None

    def echo(self) -> dict:
        return {sec: dict(vals) for sec, vals in self.raw.items()}


def _fail(section, key, msg):
    raise ConfigError(f"{section}.{key}", msg)


def _float(section, key, text, positive=True):
    try:
        v = float(text)
    except ValueError:
        _fail(section, key, f"expected a number, got {text!r}")
    if not math.isfinite(v):
        _fail(section, key, "must be finite")
    if positive and not v > 0:
        _fail(section, key, f"must be positive, got {v}")
    return v


def _int(section, key, text):
    try:
        v = int(text)
    except ValueError:
        _fail(section, key, f"expected an integer, got {text!r}")
    if v < 1:
        _fail(section, key, f"must be at least 1, got {v}")
    return v


def _floats(section, key, text):
    return tuple(_float(section, key, t.strip()) for t in text.split(",") if t.strip())


def _bool(section, key, text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    _fail(section, key, f"expected a boolean, got {text!r}")


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    """Parse and validate an INI experiment configuration; errors name the offending ``section.key``."""
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError("syntax", str(exc).replace("\n", " ")) from None
    known = {
        "domain": {"kind", "r_out", "r_in", "offset", "width", "height", "h", "delta_m"},
        "potential": {"name", "coefficients"},
        "problem": {"mode", "m", "m_fraction", "epsilon", "epsilons", "masses", "n_centers", "n_points", "step_tol"},
        "solver": set(_SOLVER_FIELDS),
        "output": {"dir", "formats"},
    }
    for sec in cp.sections():
        if sec not in known:
            _fail(sec, "*", "unknown section")
        for key in cp[sec]:
            if key not in known[sec]:
                _fail(sec, key, "unknown key")
    if not cp.has_section("domain"):
        _fail("domain", "*", "section is required")

    d = cp["domain"]
    dkw = {"kind": d.get("kind", "unit_disk").strip()}
    for key in ("r_out", "r_in", "width", "height", "h", "delta_m"):
        if key in d:
            dkw[key] = _float("domain", key, d[key])
    if "offset" in d:
        dkw["offset"] = _float("domain", "offset", d["offset"], positive=False)
    spec = DomainSpec(**dkw)
    try:
        spec.validate()
    except InvalidGeometry as exc:
        msg = str(exc)
        key = "kind" if "kind" in msg else "h" if msg.startswith("h") else "r_in" if "hole" in msg else "geometry"
        raise ConfigError(f"domain.{key}", msg) from None

    cfg = ExperimentConfig(domain=spec)
    if cp.has_section("potential"):
        p = cp["potential"]
        cfg.potential = p.get("name", "quartic").strip()
        if "coefficients" in p:
            cfg.coefficients = _floats_signed("potential", "coefficients", p["coefficients"])
        if cfg.potential != "quartic" and cfg.coefficients is None:
            _fail("potential", "coefficients", f"required for potential {cfg.potential!r}")

    if cp.has_section("problem"):
        pr = cp["problem"]
        cfg.mode = pr.get("mode", "neumann").strip()
        if cfg.mode not in ("neumann", "dirichlet"):
            _fail("problem", "mode", f"expected neumann or dirichlet, got {cfg.mode!r}")
        if "m" in pr:
            cfg.m = _float("problem", "m", pr["m"])
        if "m_fraction" in pr:
            cfg.m_fraction = _float("problem", "m_fraction", pr["m_fraction"])
            if cfg.m_fraction >= 1:
                _fail("problem", "m_fraction", "must be below 1")
        if "epsilon" in pr and pr["epsilon"].strip().lower() != "cap":
            cfg.epsilon = _float("problem", "epsilon", pr["epsilon"])
        if "epsilons" in pr:
            cfg.epsilons = _floats("problem", "epsilons", pr["epsilons"])
        if "masses" in pr:
            cfg.masses = _floats("problem", "masses", pr["masses"])
        if "n_centers" in pr:
            cfg.n_centers = _int("problem", "n_centers", pr["n_centers"])
        if "n_points" in pr:
            cfg.n_points = _int("problem", "n_points", pr["n_points"])
        if "step_tol" in pr:
            cfg.step_tol = _float("problem", "step_tol", pr["step_tol"])
    if cfg.m is not None and cfg.m_fraction is not None:
        _fail("problem", "m", "give either m or m_fraction, not both")
    if cfg.m is None and cfg.m_fraction is None:
        cfg.m_fraction = 0.01
    area = spec.analytic_area
    if cfg.mass(area) >= area:
        _fail("problem", "m", f"must be below the domain area {area:.6g}")

    if cp.has_section("solver"):
        for key, text in cp["solver"].items():
            ftype = str(_SOLVER_FIELDS[key].type)
            if "bool" in ftype:
                cfg.solver[key] = _bool("solver", key, text)
            elif "int" in ftype and "float" not in ftype:
                cfg.solver[key] = _int("solver", key, text) if key != "seed" else int(text)
            else:
                cfg.solver[key] = _float("solver", key, text, positive=key not in ("tau_slack",))
    if cp.has_section("output"):
        o = cp["output"]
        cfg.out = o.get("dir", "out").strip()
        if "formats" in o:
            cfg.formats = tuple(t.strip() for t in o["formats"].split(",") if t.strip())
            bad = [t for t in cfg.formats if t not in ("json", "csv")]
            if bad:
                _fail("output", "formats", f"unknown formats {bad}")

    cfg.raw = {sec: dict(cp[sec]) for sec in cp.sections()}
    # every cap is checked before any computation
    cfg.solve_config(area)
    return cfg


def _floats_signed(section, key, text):
    return tuple(_float(section, key, t.strip(), positive=False) for t in text.split(",") if t.strip())


def config_to_ini(raw: dict) -> str:
    cp = configparser.ConfigParser(interpolation=None)
    for sec, vals in raw.items():
        cp[sec] = vals
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def load_config(path) -> ExperimentConfig:
    p = Path(path)
    if not p.exists() and (CONFIG_DIR / p.name).exists():
        p = CONFIG_DIR / p.name
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError("path", f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text, str(p))


# ---------------------------------------------------------------------------
# rendering


_STOPS = np.array([
    [0.267, 0.005, 0.329],
    [0.229, 0.322, 0.545],
    [0.128, 0.567, 0.551],
    [0.369, 0.789, 0.383],
    [0.993, 0.906, 0.144],
])


def _color(v: float) -> str:
    t = min(max(float(v), 0.0), 1.0) * (len(_STOPS) - 1)
    i = min(int(t), len(_STOPS) - 2)
    rgb = _STOPS[i] + (t - i) * (_STOPS[i + 1] - _STOPS[i])
    return "#" + "".join(f"{int(round(255 * c)):02x}" for c in rgb)


def render_field_svg(u: ScalarField, path, bary=None, projected=None, size: int = 480) -> Path:
    """Per-triangle fill of the mean nodal value on a fixed [0, 1] scale, boundary stroked."""
    mesh = u.mesh
    lo = mesh.nodes.min(axis=0)
    span = float(np.max(mesh.nodes.max(axis=0) - lo))
    pad = 10.0
    scale = (size - 2 * pad) / span

    def xy(p):
        return pad + (p[0] - lo[0]) * scale, size - pad - (p[1] - lo[1]) * scale

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">']
    out.append(f'<g id="field" stroke="none" data-triangles="{len(mesh.triangles)}">')
    vals = u.values[mesh.triangles].mean(axis=1)
    for tri, v in zip(mesh.triangles, vals):
        pts = " ".join("%.2f,%.2f" % xy(mesh.nodes[i]) for i in tri)
        col = _color(v)
        out.append(f'<polygon points="{pts}" fill="{col}" stroke="{col}" stroke-width="0.3"/>')
    out.append("</g>")
    out.append('<g id="boundary" fill="none" stroke="black" stroke-width="1">')
    for lp in mesh.boundary_loops:
        pts = " ".join("%.2f,%.2f" % xy(mesh.nodes[i]) for i in lp)
        out.append(f'<polygon points="{pts}"/>')
    out.append("</g>")
    for name, p, col in (("barycenter", bary, "white"), ("projected", projected, "red")):
        if p is not None:
            x, y = xy(p)
            out.append(f'<circle id="{escape(name)}" cx="{x:.2f}" cy="{y:.2f}" r="4" fill="{col}" stroke="black"/>')
    out.append("</svg>")
    path = Path(path)
    path.write_text("\n".join(out) + "\n")
    return path


def write_field_csv(u: ScalarField, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node", "value"])
        for i, v in enumerate(u.values):
            w.writerow([i, repr(float(v))])


# ---------------------------------------------------------------------------
# subcommands


def _rows_csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def cmd_profile(cfg, args, ctx):
    pot = cfg.make_potential()
    eps_list = cfg.epsilons or ((cfg.epsilon,) if cfg.epsilon else (0.1, 0.05, 0.025))
    rows = []
    for eps in eps_list:
        prof = ctx.stage(f"profile eps={eps:g}", solve_profile, pot, eps, cfg.step_tol)
        rows.append({"epsilon": eps, "eta": prof.eta, "sigma": pot.sigma, "initial_slope": float(np.diff(prof.q[:2])[0] / np.diff(prof.t[:2])[0])})
        ctx.write(f"fields/profile_eps{eps:g}.csv", "t,q\n" + "".join(f"{t!r},{q!r}\n" for t, q in zip(prof.t, prof.q)))
    return {"sigma": pot.sigma, "line_tension": line_tension(pot), "assumptions": check_assumptions(pot), "rows": rows}


def cmd_isoperimetric(cfg, args, ctx):
    mesh = ctx.mesh(cfg)
    masses = cfg.masses or (cfg.mass(mesh.area),)
    rows = []
    for m in masses:
        est = ctx.stage(f"profile m={m:g}", estimate_profile, mesh, m, cfg.mode, cfg.n_centers)
        rows.append({"m": m, "I_M": est.I_M, "I_bar_M": est.I_bar_M, "best_cx": est.best_center[0],
                     "best_cy": est.best_center[1], "euclid_half": euclidean_profile(m, True),
                     "euclid_full": euclidean_profile(m, False)})
    return {"rows": rows}


def cmd_photograph(cfg, args, ctx):
    mesh = ctx.mesh(cfg)
    pot = cfg.make_potential()
    scfg = cfg.solve_config(mesh.area, args.seed)
    prof = solve_profile(pot, scfg.epsilon, cfg.step_tol)
    c_m = sublevel_threshold(mesh, pot, scfg.m, cfg.mode, scfg.gamma_hat, scfg.tau_slack)
    if cfg.mode == "neumann":
        points = [p.coords for p in sample_boundary(mesh, cfg.n_points)]
    else:
        rng = np.random.default_rng(scfg.seed)
        idx = np.sort(rng.choice(mesh.interior_nodes, size=cfg.n_points, replace=False))
        points = [mesh.nodes[i] for i in idx]
    rows = []
    for k, p in enumerate(points):
        make = photograph_neumann if cfg.mode == "neumann" else photograph_dirichlet
        ph = make(mesh, pot, p, scfg.m, scfg.epsilon, prof)
        bary = barycenter(ph.field)
        proj = compose_B(ph.field, cfg.mode).coords
        rows.append({"point": k, "px": float(p[0]), "py": float(p[1]), "energy": ph.energy_at_emission,
                     "c_m": c_m, "below": bool(ph.energy_at_emission <= c_m), "mass": ph.field.mass,
                     "Bx": float(proj[0]), "By": float(proj[1]), "B_distance": float(np.linalg.norm(proj - p))})
        write_field_csv(ph.field, ctx.path(f"fields/photograph_{k:03d}.csv"))
        render_field_svg(ph.field, ctx.path(f"fields/photograph_{k:03d}.svg"), bary, proj)
    return {"epsilon": scfg.epsilon, "m": scfg.m, "c_m": c_m, "rows": rows}


def cmd_gamma_check(cfg, args, ctx):
    mesh = ctx.mesh(cfg)
    pot = cfg.make_potential()
    m = cfg.mass(mesh.area)
    p = sample_boundary(mesh, 1)[0].coords
    region = ball_region(mesh, p, m)
    rows = []
    for eps in cfg.epsilons or (0.08, 0.04, 0.02):
        prof = solve_profile(pot, eps, cfg.step_tol)
        u, params = recovery_sequence(region, prof, m)
        E = energy(u, eps, pot)
        l1 = float(mesh.lumped_mass @ np.abs(u.values - (np.linalg.norm(mesh.nodes - p, axis=1) < region.radius)))
        limit = pot.sigma * region.relative_perimeter
        rows.append({"epsilon": eps, "energy": E, "sigma_perimeter": limit, "gap": E - limit,
                     "line_tension_perimeter": line_tension(pot) * region.relative_perimeter,
                     "delta": params.delta, "l1_to_indicator": l1})
    return {"m": m, "center": [float(p[0]), float(p[1])], "relative_perimeter": region.relative_perimeter, "rows": rows}


def _record_rows(records):
    return [r.to_dict() for r in records]


def cmd_solve(cfg, args, ctx):
    mesh = ctx.mesh(cfg)
    pot = cfg.make_potential()
    scfg = cfg.solve_config(mesh.area, args.seed)
    prof = solve_profile(pot, scfg.epsilon, cfg.step_tol)
    if cfg.mode == "neumann":
        p = sample_boundary(mesh, 1)[0].coords
        u0 = photograph_neumann(mesh, pot, p, scfg.m, scfg.epsilon, prof).field
    else:
        p = np.zeros(2) if mesh.polygon.contains(np.zeros((1, 2)))[0] else mesh.nodes[mesh.interior_nodes[0]]
        u0 = photograph_dirichlet(mesh, pot, p, scfg.m, scfg.epsilon, prof).field
    fr = ctx.stage("flow", flow, u0, scfg, pot)
    rec = ctx.stage("newton", newton_refine, fr.field, scfg, pot, f"point[{p[0]:.4f},{p[1]:.4f}]", fr)
    write_field_csv(rec.field, ctx.path("fields/solution.csv"))
    render_field_svg(rec.field, ctx.path("fields/solution.svg"), rec.barycenter, rec.projected_point)
    return {"records": _record_rows([rec]), "flow_steps": fr.steps, "max_mass_drift": fr.max_mass_drift,
            "energy_monotone": fr.monotone}


def cat_target(mesh, mode: str) -> int:
    """Category of ``∂M`` (Neumann) or ``M`` (Dirichlet) for the supported planar domains."""
    n_loops = len(mesh.boundary_loops)
    return 2 * n_loops if mode == "neumann" else (1 if n_loops == 1 else 2)


def cmd_multiplicity(cfg, args, ctx):
    mesh = ctx.mesh(cfg)
    pot = cfg.make_potential()
    scfg = cfg.solve_config(mesh.area, args.seed)
    records, failures = ctx.stage("multistart", multistart, mesh, pot, scfg, args.jobs, True)
    c_m = sublevel_threshold(mesh, pot, scfg.m, cfg.mode, scfg.gamma_hat, scfg.tau_slack)
    low = [r for r in records if r.seed_provenance != "constant" and r.energy <= c_m]
    for k, r in enumerate(records):
        write_field_csv(r.field, ctx.path(f"fields/record_{k:03d}.csv"))
        render_field_svg(r.field, ctx.path(f"fields/record_{k:03d}.svg"), r.barycenter, r.projected_point)
    target = cat_target(mesh, cfg.mode)
    summary = {"n_distinct": len(low), "n_records": len(records), "c_m": c_m, "cat_target": target,
               "passed": len(low) >= target, "epsilon": scfg.epsilon, "m": scfg.m}
    return {"records": _record_rows(records), "failures": failures, "summary": summary}


def cmd_check(cfg, args, ctx):
    from .acceptance import run_all

    results = run_all(verbose=True)
    ctx.failed = any(not r.passed for r in results)
    return {"criteria": [r.to_dict() for r in results]}


COMMANDS = {
    "profile": cmd_profile,
    "isoperimetric": cmd_isoperimetric,
    "photograph": cmd_photograph,
    "gamma-check": cmd_gamma_check,
    "solve": cmd_solve,
    "multiplicity": cmd_multiplicity,
    "check": cmd_check,
}


class RunContext:
    def __init__(self, out: Path):
        self.out = out
        self.timings: dict[str, float] = {}
        self.failed = False
        self._mesh = None

    def path(self, rel: str) -> Path:
        p = self.out / rel
        p.parent.mkdir(parents=True, exist_ok=True)
        return p

    def write(self, rel: str, text: str) -> None:
        self.path(rel).write_text(text)

    def stage(self, name, fn, *a, **kw):
        t0 = time.perf_counter()
        try:
            return fn(*a, **kw)
        finally:
            self.timings[name] = round(time.perf_counter() - t0, 6)

    def mesh(self, cfg):
        if self._mesh is None:
            self._mesh = self.stage("mesh", build_domain, cfg.domain)
        return self._mesh


def _summary_rows(payload: dict) -> list[dict]:
    if "summary" in payload:
        return [payload["summary"]]
    if "criteria" in payload:
        return [{k: v for k, v in c.items() if k != "detail"} for c in payload["criteria"]]
    if "rows" in payload:
        return payload["rows"]
    if "records" in payload:
        return [{k: (json.dumps(v) if isinstance(v, list) else v) for k, v in r.items()} for r in payload["records"]]
    return []


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="acmass", description=__doc__.splitlines()[0])
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", help="INI experiment file (bundled names such as disk-neumann.ini also work)")
    ap.add_argument("--out", help="output directory (overrides [output] dir)")
    ap.add_argument("--seed", type=int, default=None, help="random seed for seed sampling")
    ap.add_argument("--jobs", type=int, default=1, help="worker processes for multistart seeds")
    ap.add_argument("--format", choices=("json", "csv"), default="json", help="format printed to stdout")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.config is None:
            if args.subcommand != "check":
                raise ConfigError("--config", "required for this subcommand")
            cfg = parse_config("[domain]\nkind = unit_disk\n")
        else:
            cfg = load_config(args.config)
        if args.jobs < 1:
            raise ConfigError("--jobs", "must be at least 1")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out = Path(args.out or cfg.out)
    ctx = RunContext(out)
    started = time.time()
    try:
        payload = COMMANDS[args.subcommand](cfg, args, ctx)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except AcmassError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    report = _jsonable({
        "subcommand": args.subcommand,
        "config": cfg.echo(),
        "seed": args.seed,
        "versions": {"acmass": __version__, "numpy": np.__version__, "scipy": scipy.__version__},
        "payload": payload,
    })
    text = json.dumps(report, indent=2, sort_keys=True)
    ctx.write("report.json", text + "\n")
    rows = _jsonable(_summary_rows(payload))
    ctx.write("summary.csv", _rows_csv(rows))
    ctx.write("metadata.json", json.dumps({
        "started": started, "finished": time.time(), "stages": ctx.timings,
        "python": platform.python_version(), "jobs": args.jobs,
    }, indent=2, sort_keys=True) + "\n")
    if args.subcommand != "check":
        print(text if args.format == "json" else _rows_csv(rows), end="" if args.format == "csv" else "\n")
    return 1 if ctx.failed else 0


if __name__ == "__main__":
    sys.exit(main())
