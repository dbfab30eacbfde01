"""Triangulated planar domains, P1 finite-element operators and boundary geometry."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.optimize import brentq
from scipy.spatial import Delaunay

from ._geometry import Circle, CircleDomain, PolygonDomain, point_segment_distance, triangle_disk_areas
from .errors import (
    AmbiguousProjection,
    EmptyRegion,
    FullRegion,
    InvalidGeometry,
    MassOutOfRange,
    MeshFailure,
)

KINDS = ("unit_disk", "annulus", "eccentric_annulus", "rectangle")


@dataclass(frozen=True)
class DomainSpec:
    """Geometric description of a domain.

    Annular kinds place the outer circle at the origin and the hole center at
    ``(offset, 0)``. Rectangles are centered at the origin.
    """

    kind: str = "unit_disk"
    r_out: float = 1.0
    r_in: float = 0.5
    offset: float = 0.0
    width: float = 1.0
    height: float = 1.0
    h: float = 0.05
    delta_m: float | None = None

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise InvalidGeometry(f"unknown domain kind {self.kind!r}")
        if self.h <= 0:
            raise InvalidGeometry("h must be positive")
        if self.kind in ("unit_disk", "annulus", "eccentric_annulus") and self.r_out <= 0:
            raise InvalidGeometry("r_out must be positive")
        if self.kind in ("annulus", "eccentric_annulus"):
            if self.r_in <= 0:
                raise InvalidGeometry("r_in must be positive")
            if self.r_in + abs(self.offset) >= self.r_out:
                raise InvalidGeometry(
                    f"hole (r_in={self.r_in}, offset={self.offset}) is not strictly inside r_out={self.r_out}"
                )
        if self.kind == "rectangle" and (self.width <= 0 or self.height <= 0):
            raise InvalidGeometry("rectangle sides must be positive")
        if self.h >= self.feature_size:
            raise InvalidGeometry(f"h={self.h} is not below the smallest feature {self.feature_size:.4g}")
        if self.delta_m is not None and self.delta_m <= 0:
            raise InvalidGeometry("delta_m must be positive")

    @property
    def feature_size(self) -> float:
        if self.kind == "unit_disk":
            return self.r_out
        if self.kind == "rectangle":
            return min(self.width, self.height)
        return min(self.r_in, self.r_out - self.r_in - abs(self.offset))

    @property
    def analytic_area(self) -> float:
        if self.kind == "rectangle":
            return self.width * self.height
        if self.kind == "unit_disk":
            return math.pi * self.r_out**2
        return math.pi * (self.r_out**2 - self.r_in**2)

    def shape(self):
        """Exact (non-discretized) description of the domain."""
        if self.kind == "rectangle":
            w, hh = self.width / 2, self.height / 2
            return PolygonDomain([np.array([[w, -hh], [w, hh], [-w, hh], [-w, -hh]])])
        circles = [Circle((0.0, 0.0), self.r_out, False)]
        if self.kind != "unit_disk":
            circles.append(Circle((self.offset, 0.0), self.r_in, True))
        return CircleDomain(circles)


@dataclass(frozen=True)
class BoundaryPoint:
    component: int
    s: float
    coords: np.ndarray
    normal: np.ndarray
    distance: float = 0.0


@dataclass(frozen=True)
class Ball:
    """Analytic region ``{|x - center| < radius}`` intersected with the domain."""

    center: tuple[float, float]
    radius: float


@dataclass(frozen=True, eq=False)
class DomainMesh:
    nodes: np.ndarray
    triangles: np.ndarray
    boundary_loops: tuple
    component: np.ndarray
    mass_matrix: sp.csr_matrix
    stiffness_matrix: sp.csr_matrix
    lumped_mass: np.ndarray
    triangle_areas: np.ndarray
    area: float
    boundary_curvature: np.ndarray
    boundary_normals: np.ndarray
    delta_M: float
    inj_estimate: float
    polygon: PolygonDomain
    shape: object
    spec: DomainSpec | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def boundary_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.component >= 0)

    @property
    def interior_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.component < 0)

    @property
    def h(self) -> float:
        """Mean edge length."""
        if "h" not in self._cache:
            t = self.triangles
            e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
            self._cache["h"] = float(np.mean(np.linalg.norm(self.nodes[e[:, 0]] - self.nodes[e[:, 1]], axis=1)))
        return self._cache["h"]

    @property
    def diameter(self) -> float:
        if "diam" not in self._cache:
            b = self.nodes[self.boundary_nodes]
            self._cache["diam"] = float(np.max(np.linalg.norm(b[:, None, :] - b[None, :, :], axis=2)))
        return self._cache["diam"]

    @property
    def boundary_segments(self) -> tuple[np.ndarray, np.ndarray]:
        """Start/end node indices of all oriented boundary edges, loop by loop."""
        a = np.concatenate([lp for lp in self.boundary_loops])
        b = np.concatenate([np.roll(lp, -1) for lp in self.boundary_loops])
        return a, b

    def loop_arclength(self, k: int) -> np.ndarray:
        key = ("arc", k)
        if key not in self._cache:
            xy = self.nodes[self.boundary_loops[k]]
            seg = np.linalg.norm(np.roll(xy, -1, axis=0) - xy, axis=1)
            self._cache[key] = np.concatenate([[0.0], np.cumsum(seg)])
        return self._cache[key]

    def loop_length(self, k: int) -> float:
        return float(self.loop_arclength(k)[-1])

    def distance_to_boundary(self, pts) -> np.ndarray:
        return self.polygon.distance_to_boundary(np.atleast_2d(pts))

    @classmethod
    def from_arrays(cls, nodes, triangles, spec: DomainSpec | None = None, delta_m: float | None = None):
        nodes = np.ascontiguousarray(nodes, dtype=float)
        triangles = np.ascontiguousarray(triangles, dtype=np.int64)
        p = nodes[triangles]
        signed = 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                        - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))
        if np.any(signed <= 0):
            raise MeshFailure(f"{int(np.sum(signed <= 0))} triangles have nonpositive signed area")
        used = np.zeros(len(nodes), dtype=bool)
        used[triangles.ravel()] = True
        if not used.all():
            raise MeshFailure("mesh has nodes not attached to any triangle")

        loops = _boundary_loops(nodes, triangles)
        component = np.full(len(nodes), -1, dtype=np.int64)
        for k, lp in enumerate(loops):
            component[lp] = k

        K, M = _assemble(nodes, triangles, signed)
        lumped = np.asarray(M.sum(axis=1)).ravel()
        curvature, normals = _boundary_curvature(nodes, loops)
        polygon = PolygonDomain([nodes[lp] for lp in loops])
        shape = spec.shape() if spec is not None else polygon
        if delta_m is None:
            if spec is not None and spec.delta_m is not None:
                delta_m = spec.delta_m
            else:
                feature = spec.feature_size if spec is not None else _measured_feature(nodes, loops, curvature)
                delta_m = 0.25 * feature
        inj = _injectivity_estimate(nodes, loops, curvature)
        for arr in (nodes, triangles, component, lumped, signed, curvature, normals):
            arr.setflags(write=False)
        return cls(
            nodes=nodes,
            triangles=triangles,
            boundary_loops=tuple(loops),
            component=component,
            mass_matrix=M,
            stiffness_matrix=K,
            lumped_mass=lumped,
            triangle_areas=signed,
            area=float(signed.sum()),
            boundary_curvature=curvature,
            boundary_normals=normals,
            delta_M=float(delta_m),
            inj_estimate=float(inj),
            polygon=polygon,
            shape=shape,
            spec=spec,
        )


def _boundary_loops(nodes, triangles) -> list[np.ndarray]:
    t = triangles
    edges = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    n = len(nodes)
    fwd = edges[:, 0] * n + edges[:, 1]
    rev = edges[:, 1] * n + edges[:, 0]
    if len(np.unique(fwd)) != len(fwd):
        raise MeshFailure("non-manifold triangulation (repeated oriented edge)")
    bnd = edges[~np.isin(fwd, rev)]
    if len(bnd) == 0:
        raise MeshFailure("triangulation has no boundary")
    nxt = {}
    for i, j in bnd:
        if i in nxt:
            raise MeshFailure(f"boundary node {i} has two outgoing boundary edges")
        nxt[int(i)] = int(j)
    loops = []
    remaining = set(nxt)
    while remaining:
        start = min(remaining)
        loop = [start]
        cur = nxt[start]
        while cur != start:
            if cur not in remaining:
                raise MeshFailure("boundary edges do not form closed loops")
            loop.append(cur)
            cur = nxt[cur]
        remaining -= set(loop)
        loop = np.array(loop, dtype=np.int64)
        xy = nodes[loop]
        # deterministic start: rightmost node, lowest y on ties
        first = np.lexsort((xy[:, 1], -xy[:, 0]))[0]
        loops.append(np.roll(loop, -first))

    def signed_area(lp):
        xy = nodes[lp]
        nx = np.roll(xy, -1, axis=0)
        return 0.5 * np.sum(xy[:, 0] * nx[:, 1] - xy[:, 1] * nx[:, 0])

    loops.sort(key=lambda lp: -signed_area(lp))
    if signed_area(loops[0]) <= 0:
        raise MeshFailure("outer boundary loop is not counter-clockwise")
    return loops


def _assemble(nodes, triangles, areas):
    p = nodes[triangles]
    # gradients of the barycentric basis functions, times 2*area
    gx = np.stack([p[:, 1, 1] - p[:, 2, 1], p[:, 2, 1] - p[:, 0, 1], p[:, 0, 1] - p[:, 1, 1]], axis=1)
    gy = np.stack([p[:, 2, 0] - p[:, 1, 0], p[:, 0, 0] - p[:, 2, 0], p[:, 1, 0] - p[:, 0, 0]], axis=1)
    ke = (gx[:, :, None] * gx[:, None, :] + gy[:, :, None] * gy[:, None, :]) / (4.0 * areas[:, None, None])
    me = areas[:, None, None] / 12.0 * (np.ones((3, 3)) + np.eye(3))[None]
    rows = np.repeat(triangles, 3, axis=1).ravel()
    cols = np.tile(triangles, (1, 3)).ravel()
    n = len(nodes)
    K = sp.coo_matrix((ke.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    M = sp.coo_matrix((me.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    K.sum_duplicates()
    M.sum_duplicates()
    return K, M


def _boundary_curvature(nodes, loops):
    n = len(nodes)
    curvature = np.full(n, np.nan)
    normals = np.zeros((n, 2))
    for lp in loops:
        xy = nodes[lp]
        prev = np.roll(xy, 1, axis=0)
        nxt = np.roll(xy, -1, axis=0)
        a = xy - prev
        b = nxt - xy
        cross = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
        la = np.linalg.norm(a, axis=1)
        lb = np.linalg.norm(b, axis=1)
        lc = np.linalg.norm(nxt - prev, axis=1)
        # circumscribed circle through three consecutive nodes; positive when
        # the boundary bends toward the inner normal
        curvature[lp] = 2.0 * cross / (la * lb * lc)
        na = np.stack([-a[:, 1], a[:, 0]], axis=1) / la[:, None]
        nb = np.stack([-b[:, 1], b[:, 0]], axis=1) / lb[:, None]
        nn = na + nb
        normals[lp] = nn / np.linalg.norm(nn, axis=1)[:, None]
    return curvature, normals


def _measured_feature(nodes, loops, curvature):
    kmax = np.nanmax(np.abs(curvature))
    feature = 1.0 / kmax if kmax > 0 else np.inf
    gap = _component_gap(nodes, loops)
    feature = min(feature, gap)
    if not np.isfinite(feature):
        feature = float(np.ptp(nodes, axis=0).min())
    return feature


def _component_gap(nodes, loops):
    gap = np.inf
    for i, li in enumerate(loops):
        for j, lj in enumerate(loops):
            if j <= i:
                continue
            d = point_segment_distance(nodes[li], nodes[lj], nodes[np.roll(lj, -1)])
            gap = min(gap, float(d.min()))
    return gap


def _injectivity_estimate(nodes, loops, curvature):
    kpos = np.nanmax(np.clip(curvature, 0.0, None))
    focal = 1.0 / kpos if kpos > 0 else np.inf
    est = min(focal, 0.5 * _component_gap(nodes, loops))
    if not np.isfinite(est):
        est = 0.5 * float(np.ptp(nodes, axis=0).min())
    return est


def _circle_nodes(center, radius, h, clockwise=False):
    n = max(8, int(math.ceil(2 * math.pi * radius / h)))
    theta = 2 * math.pi * np.arange(n) / n
    if clockwise:
        theta = -theta
    return np.column_stack([center[0] + radius * np.cos(theta), center[1] + radius * np.sin(theta)])


def _rectangle_nodes(width, height, h):
    w, hh = width / 2, height / 2
    corners = [(-w, -hh), (w, -hh), (w, hh), (-w, hh)]
    pts = []
    for k in range(4):
        a = np.array(corners[k])
        b = np.array(corners[(k + 1) % 4])
        n = max(2, int(math.ceil(np.linalg.norm(b - a) / h)))
        t = np.arange(n) / n
        pts.append(a[None, :] + t[:, None] * (b - a)[None, :])
    return np.vstack(pts)


def _hex_lattice(xmin, xmax, ymin, ymax, h):
    dy = h * math.sqrt(3) / 2
    ys = np.arange(ymin, ymax + dy, dy)
    rows = []
    for j, y in enumerate(ys):
        shift = 0.5 * h if j % 2 else 0.0
        xs = np.arange(xmin + shift, xmax + h, h)
        rows.append(np.column_stack([xs, np.full_like(xs, y)]))
    return np.vstack(rows)


def build_domain(spec: DomainSpec, smoothing: int = 3) -> DomainMesh:
    """Triangulate ``spec`` with target edge length ``spec.h``.

    Boundary nodes are equally spaced on each boundary curve (the first node
    of each circle sits at angle 0), interior nodes come from a hexagonal
    lattice kept at least ``0.7 h`` away from the boundary and relaxed by a
    few Laplacian sweeps.
    """
    spec.validate()
    h = spec.h
    shape = spec.shape()
    if spec.kind == "rectangle":
        boundary = [_rectangle_nodes(spec.width, spec.height, h)]
        half = np.array([spec.width, spec.height]) / 2
        box = (-half[0], half[0], -half[1], half[1])
    else:
        boundary = [_circle_nodes((0.0, 0.0), spec.r_out, h)]
        if spec.kind != "unit_disk":
            boundary.append(_circle_nodes((spec.offset, 0.0), spec.r_in, h, clockwise=True))
        box = (-spec.r_out, spec.r_out, -spec.r_out, spec.r_out)
    bnd = np.vstack(boundary)
    lattice = _hex_lattice(*box, h)
    # jitter-free lattice aligned at the origin; offset by a fixed irrational
    # fraction so no lattice row coincides with a symmetry axis
    lattice = lattice + np.array([0.1234567 * h, 0.0765432 * h])
    keep = shape.contains(lattice) & (shape.distance_to_boundary(lattice) > 0.7 * h)
    interior = lattice[keep]
    nb = len(bnd)
    pts = np.vstack([bnd, interior])

    tris = _delaunay_inside(pts, shape)
    for _ in range(smoothing):
        pts = _laplace_smooth(pts, tris, nb, shape, h)
        tris = _delaunay_inside(pts, shape)

    mesh = DomainMesh.from_arrays(pts, tris, spec=spec)
    _check_conforming(mesh, [len(b) for b in boundary])
    return mesh


def _delaunay_inside(pts, shape):
    tri = Delaunay(pts).simplices
    cent = pts[tri].mean(axis=1)
    tri = tri[shape.contains(cent)]
    p = pts[tri]
    signed = 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                    - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))
    flip = signed < 0
    tri[flip] = tri[flip][:, [0, 2, 1]]
    tri = tri[np.abs(signed) > 1e-14]
    return tri


def _laplace_smooth(pts, tris, nb, shape, h):
    n = len(pts)
    e = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
    A = sp.coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(n, n)).tocsr()
    A = ((A + A.T) > 0).astype(float)
    deg = np.asarray(A.sum(axis=1)).ravel()
    avg = (A @ pts) / np.maximum(deg, 1)[:, None]
    new = pts.copy()
    cand = avg[nb:]
    ok = shape.contains(cand) & (shape.distance_to_boundary(cand) > 0.45 * h)
    new[nb:][ok] = cand[ok]
    return new


def _check_conforming(mesh: DomainMesh, counts):
    if len(mesh.boundary_loops) != len(counts):
        raise MeshFailure(
            f"triangulation has {len(mesh.boundary_loops)} boundary loops, expected {len(counts)}"
        )
    start = 0
    for k, c in enumerate(counts):
        if sorted(mesh.boundary_loops[k]) != list(range(start, start + c)) and \
           set(mesh.boundary_loops[k]) != set(range(start, start + c)):
            raise MeshFailure("boundary loop does not follow the generated boundary nodes")
        start += c


# ---------------------------------------------------------------------------
# distance and projection


def _arc_distance(nodes, center, radius, arcs):
    rel = nodes - np.asarray(center)
    rho = np.hypot(rel[:, 0], rel[:, 1])
    phi = np.arctan2(rel[:, 1], rel[:, 0])
    out = np.full(len(nodes), np.inf)
    for a0, a1 in arcs:
        if a1 - a0 >= 2 * math.pi - 1e-15:
            return np.abs(rho - radius)
        on_arc = np.mod(phi - a0, 2 * math.pi) <= (a1 - a0)
        d = np.where(on_arc | (rho == 0.0), np.abs(rho - radius), np.inf)
        for ang in (a0, a1):
            e = np.array([center[0] + radius * math.cos(ang), center[1] + radius * math.sin(ang)])
            d = np.minimum(d, np.linalg.norm(nodes - e, axis=1))
        out = np.minimum(out, d)
    return out


def _level_segments(mesh: DomainMesh, values: np.ndarray, level: float = 0.5):
    t = mesh.triangles
    f = values[t]
    above = f >= level
    mixed = np.flatnonzero(above.any(axis=1) & ~above.all(axis=1))
    segs_a, segs_b = [], []
    for tri_i in mixed:
        pts = []
        for i, j in ((0, 1), (1, 2), (2, 0)):
            if above[tri_i, i] != above[tri_i, j]:
                fi, fj = f[tri_i, i], f[tri_i, j]
                s = (level - fi) / (fj - fi)
                pi_, pj = mesh.nodes[t[tri_i, i]], mesh.nodes[t[tri_i, j]]
                pts.append(pi_ + s * (pj - pi_))
        segs_a.append(pts[0])
        segs_b.append(pts[1])
    return np.array(segs_a).reshape(-1, 2), np.array(segs_b).reshape(-1, 2)


def signed_distance_to_complement(mesh: DomainMesh, region) -> np.ndarray:
    """Nodal values of the signed distance ``d_{M \\ Ω}``.

    Positive inside ``Ω``, negative outside, magnitude the distance to the
    interface ``∂Ω ∩ int(M)``. ``region`` is either a :class:`Ball` or a
    nodal array whose ``>= 0.5`` superlevel set is ``Ω``.
    """
    if isinstance(region, Ball):
        c = np.asarray(region.center, dtype=float)
        arcs = mesh.polygon.arc_intervals(c, region.radius)
        if not arcs:
            if mesh.polygon.disk_area(c, region.radius) >= 0.5 * mesh.area:
                raise FullRegion("ball covers the whole domain")
            raise EmptyRegion("ball does not meet the domain interior")
        dist = _arc_distance(mesh.nodes, c, region.radius, arcs)
        inside = np.linalg.norm(mesh.nodes - c, axis=1) < region.radius
    else:
        values = np.asarray(region, dtype=float)
        inside = values >= 0.5
        if not inside.any():
            raise EmptyRegion("indicator is empty")
        if inside.all():
            raise FullRegion("indicator covers every node")
        a, b = _level_segments(mesh, values)
        dist = point_segment_distance(mesh.nodes, a, b)
    return np.where(inside, dist, -dist)


def _snap_to_shape(mesh: DomainMesh, k: int, pt: np.ndarray, normal: np.ndarray, toward=None):
    """Exact nearest point on the circle of boundary component ``k``.

    Uses the direction of ``toward`` (the query point) when given, else that
    of the polyline point ``pt``. Non-circular domains return ``pt`` unchanged.
    """
    shape = mesh.shape
    if not isinstance(shape, CircleDomain) or k >= len(shape.circles):
        return pt, normal
    circ = shape.circles[k]
    rel = (pt if toward is None else toward) - np.asarray(circ.center)
    if not np.any(rel):
        rel = pt - np.asarray(circ.center)
    rho = float(np.hypot(rel[0], rel[1]))
    if rho == 0.0:
        return pt, normal
    unit = rel / rho
    return np.asarray(circ.center) + circ.radius * unit, (unit if circ.hole else -unit)


def project_to_boundary(mesh: DomainMesh, point, mode: str = "boundary", strict: bool = False,
                        tol: float | None = None) -> BoundaryPoint:
    """Nearest-point projection onto ``∂M`` (``mode="boundary"``) or onto ``M`` (``"domain"``).

    The minimizing polyline segment is found by brute force; on circular
    domains its foot is then moved radially onto the exact circle.
    """
    q = np.asarray(point, dtype=float)
    if mode == "domain" and mesh.polygon.contains(q[None])[0]:
        return BoundaryPoint(-1, float("nan"), q.copy(), np.zeros(2), 0.0)
    if mode not in ("boundary", "domain"):
        raise ValueError(f"unknown projection mode {mode!r}")
    if tol is None:
        tol = 1e-9 * mesh.diameter
    ia, ib = mesh.boundary_segments
    a, b = mesh.nodes[ia], mesh.nodes[ib]
    d = b - a
    dd = np.einsum("ij,ij->i", d, d)
    t = np.clip(np.einsum("ij,ij->i", q - a, d) / dd, 0.0, 1.0)
    foot = a + t[:, None] * d
    dist = np.linalg.norm(foot - q, axis=1)
    dmin = dist.min()
    cand = np.flatnonzero(dist <= dmin + tol)
    comp = mesh.component[ia]
    seglen = np.sqrt(dd)
    # arclength of each foot point within its loop
    offsets = []
    for k in range(len(mesh.boundary_loops)):
        offsets.append(mesh.loop_arclength(k)[:-1])
    s_start = np.concatenate(offsets)
    s = s_start + t * seglen
    order = sorted(cand, key=lambda i: (comp[i], s[i]))
    if strict:
        pts = foot[order]
        spread = np.max(np.linalg.norm(pts - pts[0], axis=1))
        if spread > max(tol, 1e-9):
            raise AmbiguousProjection(
                f"{len(order)} boundary points within {tol:.2e} of the minimal distance {dmin:.6g}"
            )
    i = order[0]
    if 0.0 < t[i] < 1.0:
        n = np.array([-d[i, 1], d[i, 0]]) / seglen[i]
    else:
        n = mesh.boundary_normals[ia[i] if t[i] == 0.0 else ib[i]].copy()
    s_i = float(s[i])
    k = int(comp[i])
    if s_i >= mesh.loop_length(k):
        s_i -= mesh.loop_length(k)
    pt, n = _snap_to_shape(mesh, k, foot[i].copy(), n, toward=q)
    return BoundaryPoint(k, s_i, pt, n, float(np.linalg.norm(pt - q)))


def boundary_point_at(mesh: DomainMesh, component: int, s: float) -> BoundaryPoint:
    """Point of boundary loop ``component`` at arclength ``s`` (taken modulo the loop length)."""
    loop = mesh.boundary_loops[component]
    arc = mesh.loop_arclength(component)
    s = float(s) % arc[-1]
    j = int(np.searchsorted(arc, s, side="right") - 1)
    j = min(j, len(loop) - 1)
    a = mesh.nodes[loop[j]]
    b = mesh.nodes[loop[(j + 1) % len(loop)]]
    seg = arc[j + 1] - arc[j]
    t = (s - arc[j]) / seg
    if t == 0.0:
        n = mesh.boundary_normals[loop[j]].copy()
    else:
        n = np.array([-(b - a)[1], (b - a)[0]]) / seg
    pt, n = _snap_to_shape(mesh, component, a + t * (b - a), n)
    return BoundaryPoint(component, s, pt, n, 0.0)


def sample_boundary(mesh: DomainMesh, n: int, min_per_loop: int = 1) -> list[BoundaryPoint]:
    """``n`` boundary points spread over all loops proportionally to their lengths."""
    lengths = np.array([mesh.loop_length(k) for k in range(len(mesh.boundary_loops))])
    counts = np.maximum(min_per_loop, np.floor(n * lengths / lengths.sum()).astype(int))
    while counts.sum() < n:
        counts[np.argmax(n * lengths / lengths.sum() - counts)] += 1
    while counts.sum() > n and counts.max() > min_per_loop:
        counts[np.argmax(counts)] -= 1
    out = []
    for k, c in enumerate(counts):
        for j in range(c):
            out.append(boundary_point_at(mesh, k, lengths[k] * j / c))
    return out


def ball_indicator(mesh: DomainMesh, center, target_mass: float):
    """Per-triangle volume fractions of ``B(center, r) ∩ M`` and the radius ``r``.

    ``r`` solves ``vol(B(center, r) ∩ M) = target_mass`` on the polygonal mesh
    domain, with the clipped area computed exactly.
    """
    if not 0.0 < target_mass < mesh.area:
        raise MassOutOfRange(f"target mass {target_mass} outside (0, {mesh.area})")
    c = np.asarray(center, dtype=float)
    rmax = float(np.max(np.linalg.norm(mesh.nodes - c, axis=1))) * 1.001
    f = lambda r: mesh.polygon.disk_area(c, r) - target_mass  # noqa: E731
    r = brentq(f, 0.0, rmax, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=300)
    tri_xy = mesh.nodes[mesh.triangles]
    near = np.min(np.linalg.norm(tri_xy - c, axis=2), axis=1) < r + 2 * np.max(np.ptp(tri_xy, axis=1))
    frac = np.zeros(len(mesh.triangles))
    frac[near] = triangle_disk_areas(tri_xy[near], c, r) / mesh.triangle_areas[near]
    vol = float(frac @ mesh.triangle_areas)
    if abs(vol - target_mass) > 1e-8 * mesh.area:
        raise MassOutOfRange(f"clipped ball volume {vol} misses target {target_mass}")
    return frac, float(r)


# ---------------------------------------------------------------------------
# plain-text mesh exchange


def write_mesh(mesh: DomainMesh, path) -> None:
    """Write ``# nodes N`` / ``x y boundary_flag component_id`` lines, then ``# triangles T`` / ``i j k``."""
    path = Path(path)
    with path.open("w") as fh:
        fh.write(f"# nodes {mesh.n_nodes}\n")
        for (x, y), c in zip(mesh.nodes, mesh.component):
            fh.write(f"{float(x)!r} {float(y)!r} {int(c >= 0)} {int(c)}\n")
        fh.write(f"# triangles {len(mesh.triangles)}\n")
        for i, j, k in mesh.triangles:
            fh.write(f"{i} {j} {k}\n")


def read_mesh(path, spec: DomainSpec | None = None, delta_m: float | None = None) -> DomainMesh:
    nodes, tris = [], []
    target = None
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            target = nodes if "nodes" in line else tris
            continue
        parts = line.split()
        if target is nodes:
            nodes.append((float(parts[0]), float(parts[1])))
        else:
            tris.append(tuple(int(v) for v in parts[:3]))
    return DomainMesh.from_arrays(np.array(nodes), np.array(tris), spec=spec, delta_m=delta_m)
