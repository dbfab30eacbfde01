"""Exact planar geometry of disks clipped against circular or polygonal domains.

Two domain descriptions share one interface:

* ``CircleDomain``: an outer disk minus any number of disjoint hole disks.
* ``PolygonDomain``: closed polyline loops, the domain lying to the left of
  every oriented edge (outer loop counter-clockwise, holes clockwise).

Every method works with a query disk ``(center, radius)`` and returns exact
areas and lengths for the described shape (no quadrature).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi


def _cross(ax, ay, bx, by):
    return ax * by - ay * bx


def segment_disk_params(a: np.ndarray, b: np.ndarray, r: float):
    """Clipped parameters ``(t_in, t_out)`` of segments ``a + t (b - a)``.

    ``a`` and ``b`` are ``(k, 2)`` arrays relative to the disk center. The
    portion of each segment inside the disk is ``[t_in, t_out]``; when the
    segment misses the disk both values are 1.
    """
    d = b - a
    qa = np.einsum("ij,ij->i", d, d)
    qb = 2.0 * np.einsum("ij,ij->i", a, d)
    qc = np.einsum("ij,ij->i", a, a) - r * r
    disc = qb * qb - 4.0 * qa * qc
    hit = (disc > 0.0) & (qa > 0.0)
    sq = np.sqrt(np.where(hit, disc, 0.0))
    safe = np.where(qa > 0.0, qa, 1.0)
    t0 = np.where(hit, (-qb - sq) / (2.0 * safe), 1.0)
    t1 = np.where(hit, (-qb + sq) / (2.0 * safe), 1.0)
    return np.clip(t0, 0.0, 1.0), np.clip(t1, 0.0, 1.0)


def edge_disk_area(a: np.ndarray, b: np.ndarray, r: float) -> np.ndarray:
    """Signed area of ``disk(0, r) ∩ triangle(0, a, b)`` for each row."""
    t0, t1 = segment_disk_params(a, b, r)
    d = b - a
    # clipped endpoints are copied exactly; a rounded copy of a vertex lying
    # at the center would otherwise give the sectors a spurious angle
    p1 = np.where((t0 == 0.0)[:, None], a, np.where((t0 == 1.0)[:, None], b, a + t0[:, None] * d))
    p2 = np.where((t1 == 0.0)[:, None], a, np.where((t1 == 1.0)[:, None], b, a + t1[:, None] * d))

    def sector(p, q):
        cr = _cross(p[:, 0], p[:, 1], q[:, 0], q[:, 1])
        dt = np.einsum("ij,ij->i", p, q)
        return 0.5 * r * r * np.arctan2(cr, dt)

    inside = 0.5 * _cross(p1[:, 0], p1[:, 1], p2[:, 0], p2[:, 1])
    return sector(a, p1) + inside + sector(p2, b)


def triangle_disk_areas(tri_xy: np.ndarray, center, r: float) -> np.ndarray:
    """Area of ``disk(center, r)`` inside each triangle of a ``(T, 3, 2)`` array."""
    rel = tri_xy - np.asarray(center, dtype=float)
    total = np.zeros(rel.shape[0])
    for i in range(3):
        total += edge_disk_area(rel[:, i], rel[:, (i + 1) % 3], r)
    return np.abs(total)


def lens_area(r: float, big_r: float, d: float) -> float:
    """Area of the intersection of two disks with radii ``r``, ``big_r`` at distance ``d``."""
    if d >= r + big_r:
        return 0.0
    if d <= abs(big_r - r):
        return math.pi * min(r, big_r) ** 2
    c1 = np.clip((d * d + r * r - big_r * big_r) / (2.0 * d * r), -1.0, 1.0)
    c2 = np.clip((d * d + big_r * big_r - r * r) / (2.0 * d * big_r), -1.0, 1.0)
    a1 = math.acos(c1)
    a2 = math.acos(c2)
    return (
        r * r * (a1 - math.sin(2 * a1) / 2.0)
        + big_r * big_r * (a2 - math.sin(2 * a2) / 2.0)
    )


def _merge_arcs(angles: list[float], inside_mid) -> list[tuple[float, float]]:
    """Split the circle at ``angles`` and keep arcs whose midpoint is inside."""
    if not angles:
        return [(0.0, TWO_PI)] if inside_mid(math.pi) else []
    cuts = sorted(a % TWO_PI for a in angles)
    arcs = []
    for i, a0 in enumerate(cuts):
        a1 = cuts[i + 1] if i + 1 < len(cuts) else cuts[0] + TWO_PI
        if a1 - a0 <= 1e-15:
            continue
        if inside_mid(0.5 * (a0 + a1)):
            arcs.append((a0, a1))
    return arcs


@dataclass(frozen=True)
class Circle:
    center: tuple[float, float]
    radius: float
    hole: bool


class CircleDomain:
    """Outer disk minus hole disks, with closed-form clipping."""

    def __init__(self, circles: list[Circle]):
        self.circles = list(circles)
        self.outer = [c for c in circles if not c.hole]
        self.holes = [c for c in circles if c.hole]
        if len(self.outer) != 1:
            raise ValueError("CircleDomain needs exactly one outer circle")

    @property
    def area(self) -> float:
        return math.pi * (self.outer[0].radius ** 2 - sum(h.radius**2 for h in self.holes))

    def contains(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        o = self.outer[0]
        inside = np.hypot(pts[:, 0] - o.center[0], pts[:, 1] - o.center[1]) < o.radius
        for h in self.holes:
            inside &= np.hypot(pts[:, 0] - h.center[0], pts[:, 1] - h.center[1]) > h.radius
        return inside

    def distance_to_boundary(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        dist = np.full(len(pts), np.inf)
        for c in self.circles:
            rho = np.hypot(pts[:, 0] - c.center[0], pts[:, 1] - c.center[1])
            dist = np.minimum(dist, np.abs(rho - c.radius))
        return dist

    def disk_area(self, center, r: float) -> float:
        cx, cy = center
        o = self.outer[0]
        area = lens_area(r, o.radius, math.hypot(cx - o.center[0], cy - o.center[1]))
        for h in self.holes:
            area -= lens_area(r, h.radius, math.hypot(cx - h.center[0], cy - h.center[1]))
        return max(area, 0.0)

    def arc_intervals(self, center, r: float) -> list[tuple[float, float]]:
        cx, cy = center
        cuts = []
        for c in self.circles:
            dx, dy = c.center[0] - cx, c.center[1] - cy
            d = math.hypot(dx, dy)
            if d == 0.0 or d >= r + c.radius or d <= abs(r - c.radius):
                continue
            base = math.atan2(dy, dx)
            half = math.acos(np.clip((r * r + d * d - c.radius**2) / (2 * r * d), -1.0, 1.0))
            cuts += [base - half, base + half]

        def inside_mid(theta):
            p = [[cx + r * math.cos(theta), cy + r * math.sin(theta)]]
            return bool(self.contains(p)[0])

        return _merge_arcs(cuts, inside_mid)

    def arc_length_inside(self, center, r: float) -> float:
        return r * sum(b - a for a, b in self.arc_intervals(center, r))

    def boundary_samples(self, n: int) -> np.ndarray:
        """``n`` points on the boundary circles, spread proportionally to their lengths."""
        lengths = np.array([c.radius for c in self.circles])
        counts = np.maximum(1, np.round(n * lengths / lengths.sum()).astype(int))
        pts = []
        for c, k in zip(self.circles, counts):
            theta = 2 * math.pi * np.arange(k) / k
            pts.append(np.column_stack([c.center[0] + c.radius * np.cos(theta),
                                        c.center[1] + c.radius * np.sin(theta)]))
        return np.vstack(pts)

    def boundary_length_in_disk(self, center, r: float) -> float:
        cx, cy = center
        total = 0.0
        for c in self.circles:
            d = math.hypot(c.center[0] - cx, c.center[1] - cy)
            if d >= r + c.radius:
                continue
            if d + c.radius <= r:
                total += TWO_PI * c.radius
                continue
            if d + r <= c.radius:
                continue
            cos_psi = (c.radius**2 + d * d - r * r) / (2 * c.radius * d)
            total += 2.0 * c.radius * math.acos(np.clip(cos_psi, -1.0, 1.0))
        return total


class PolygonDomain:
    """Domain bounded by closed polyline loops (interior to the left of edges)."""

    def __init__(self, loops: list[np.ndarray]):
        self.loops = [np.asarray(lp, dtype=float) for lp in loops]
        self.a = np.vstack(self.loops)
        self.b = np.vstack([np.roll(lp, -1, axis=0) for lp in self.loops])

    @property
    def area(self) -> float:
        return float(0.5 * np.sum(_cross(self.a[:, 0], self.a[:, 1], self.b[:, 0], self.b[:, 1])))

    def contains(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        inside = np.zeros(len(pts), dtype=bool)
        ax, ay = self.a[:, 0], self.a[:, 1]
        bx, by = self.b[:, 0], self.b[:, 1]
        for start in range(0, len(pts), 2048):
            px = pts[start:start + 2048, 0:1]
            py = pts[start:start + 2048, 1:2]
            straddle = (ay > py) != (by > py)
            with np.errstate(divide="ignore", invalid="ignore"):
                xint = ax + (py - ay) * (bx - ax) / (by - ay)
            crossings = np.sum(straddle & (px < xint), axis=1)
            inside[start:start + 2048] = crossings % 2 == 1
        return inside

    def distance_to_boundary(self, pts) -> np.ndarray:
        return point_segment_distance(np.atleast_2d(pts), self.a, self.b)

    def disk_area(self, center, r: float) -> float:
        c = np.asarray(center, dtype=float)
        return float(max(np.sum(edge_disk_area(self.a - c, self.b - c, r)), 0.0))

    def arc_intervals(self, center, r: float) -> list[tuple[float, float]]:
        c = np.asarray(center, dtype=float)
        a = self.a - c
        d = self.b - self.a
        qa = np.einsum("ij,ij->i", d, d)
        qb = 2.0 * np.einsum("ij,ij->i", a, d)
        qc = np.einsum("ij,ij->i", a, a) - r * r
        disc = qb * qb - 4.0 * qa * qc
        ok = disc >= 0.0
        sq = np.sqrt(np.where(ok, disc, 0.0))
        cuts = []
        for sign in (-1.0, 1.0):
            t = (-qb + sign * sq) / (2.0 * qa)
            sel = ok & (t >= 0.0) & (t < 1.0)
            p = a[sel] + t[sel, None] * d[sel]
            cuts += list(np.arctan2(p[:, 1], p[:, 0]))

        def inside_mid(theta):
            p = [[c[0] + r * math.cos(theta), c[1] + r * math.sin(theta)]]
            return bool(self.contains(p)[0])

        return _merge_arcs(cuts, inside_mid)

    def arc_length_inside(self, center, r: float) -> float:
        return r * sum(b - a for a, b in self.arc_intervals(center, r))

    def boundary_samples(self, n: int) -> np.ndarray:
        seg = np.linalg.norm(self.b - self.a, axis=1)
        cum = np.concatenate([[0.0], np.cumsum(seg)])
        s = cum[-1] * np.arange(n) / n
        j = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(seg) - 1)
        t = (s - cum[j]) / seg[j]
        return self.a[j] + t[:, None] * (self.b[j] - self.a[j])

    def boundary_length_in_disk(self, center, r: float) -> float:
        c = np.asarray(center, dtype=float)
        t0, t1 = segment_disk_params(self.a - c, self.b - c, r)
        return float(np.sum((t1 - t0) * np.linalg.norm(self.b - self.a, axis=1)))


def point_segment_distance(pts: np.ndarray, a: np.ndarray, b: np.ndarray, chunk: int = 4096):
    """Brute-force distance from each point to the nearest of the segments ``a[i]-b[i]``."""
    pts = np.asarray(pts, dtype=float)
    out = np.full(len(pts), np.inf)
    if len(a) == 0:
        return out
    d = b - a
    dd = np.einsum("ij,ij->i", d, d)
    dd = np.where(dd > 0.0, dd, 1.0)
    # keep the (points x segments) block near 4M entries
    step = max(1, min(chunk, 4_000_000 // max(len(a), 1)))
    for start in range(0, len(pts), step):
        p = pts[start:start + step]
        rx = p[:, 0:1] - a[None, :, 0]
        ry = p[:, 1:2] - a[None, :, 1]
        t = np.clip((rx * d[None, :, 0] + ry * d[None, :, 1]) / dd[None, :], 0.0, 1.0)
        ex = rx - t * d[None, :, 0]
        ey = ry - t * d[None, :, 1]
        out[start:start + step] = np.sqrt(np.min(ex * ex + ey * ey, axis=1))
    return out
