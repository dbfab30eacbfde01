import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from acmass.errors import AmbiguousProjection, EmptyRegion, FullRegion, InvalidGeometry, MassOutOfRange
from acmass.mesh import (
    Ball,
    DomainSpec,
    ball_indicator,
    boundary_point_at,
    build_domain,
    project_to_boundary,
    read_mesh,
    sample_boundary,
    signed_distance_to_complement,
    write_mesh,
)


def test_disk_area(disk):
    assert abs(disk.area - math.pi) <= 0.01 * math.pi


def test_annulus_area(annulus):
    assert abs(annulus.area - 0.75 * math.pi) <= 0.01 * 0.75 * math.pi


def test_inverted_annulus_rejected():
    with pytest.raises(InvalidGeometry):
        build_domain(DomainSpec("annulus", r_in=1.0, r_out=0.5))


def test_hole_touching_outer_circle_rejected():
    with pytest.raises(InvalidGeometry):
        build_domain(DomainSpec("eccentric_annulus", r_in=0.5, offset=0.5))


def test_triangles_positive(disk, eccentric):
    for mesh in (disk, eccentric):
        assert np.all(mesh.triangle_areas > 0)


def test_stiffness_rows_sum_to_zero(eccentric):
    rows = np.asarray(eccentric.stiffness_matrix.sum(axis=1)).ravel()
    assert np.max(np.abs(rows)) <= 1e-12


def test_mass_matrix_partition_of_unity(eccentric):
    one = np.ones(eccentric.n_nodes)
    assert abs(one @ (eccentric.mass_matrix @ one) - eccentric.area) <= 1e-10 * eccentric.area
    assert abs(eccentric.lumped_mass.sum() - eccentric.area) <= 1e-10 * eccentric.area


def test_linear_field_energy_is_area(disk, annulus):
    for mesh in (disk, annulus):
        x = mesh.nodes[:, 0]
        assert abs(x @ (mesh.stiffness_matrix @ x) - mesh.area) <= 1e-8 * mesh.area


def test_area_converges_quadratically():
    errs = [abs(build_domain(DomainSpec("unit_disk", h=h)).area - math.pi) for h in (0.08, 0.04)]
    assert errs[1] < errs[0] / 3


def test_boundary_loops_closed_and_simple(eccentric):
    assert len(eccentric.boundary_loops) == 2
    for lp in eccentric.boundary_loops:
        assert len(set(lp.tolist())) == len(lp)
        xy = eccentric.nodes[lp]
        seg = np.linalg.norm(np.roll(xy, -1, axis=0) - xy, axis=1)
        assert seg.max() < 3 * eccentric.h


def test_boundary_curvature_matches_circles(eccentric):
    k = eccentric.boundary_curvature
    outer, inner = eccentric.boundary_loops
    h = eccentric.h
    assert np.max(np.abs(k[outer] - 1.0)) <= 5 * h
    assert np.max(np.abs(k[inner] + 1.0 / 0.4)) <= 5 * h / 0.4
    assert np.all(np.isnan(k[eccentric.interior_nodes]))


def test_signed_distance_ball(disk):
    c, r = (0.1, -0.2), 0.3
    d = signed_distance_to_complement(disk, Ball(c, r))
    dist = np.linalg.norm(disk.nodes - np.array(c), axis=1)
    i_center = int(np.argmin(dist))
    assert d[i_center] == pytest.approx(r - dist[i_center], abs=1e-12)
    far = np.flatnonzero(np.abs(dist - 2 * r) < 0.02)
    assert np.allclose(d[far], r - dist[far], atol=1e-12)


def test_signed_distance_half_disk_on_straight_edge(rect):
    p = np.array([0.0, -0.5])
    r = 0.3
    d = signed_distance_to_complement(rect, Ball(tuple(p), r))
    i = int(np.argmin(np.linalg.norm(rect.nodes - p, axis=1)))
    assert d[i] == pytest.approx(r - np.linalg.norm(rect.nodes[i] - p), abs=1e-12)


def test_signed_distance_from_indicator(disk):
    values = (np.linalg.norm(disk.nodes, axis=1) < 0.5).astype(float)
    d = signed_distance_to_complement(disk, values)
    assert d[np.argmin(np.linalg.norm(disk.nodes, axis=1))] == pytest.approx(0.5, abs=disk.h)


def test_signed_distance_errors(disk):
    with pytest.raises(EmptyRegion):
        signed_distance_to_complement(disk, np.zeros(disk.n_nodes))
    with pytest.raises(FullRegion):
        signed_distance_to_complement(disk, np.ones(disk.n_nodes))
    with pytest.raises(EmptyRegion):
        signed_distance_to_complement(disk, Ball((5.0, 5.0), 0.1))


def test_projection_examples(disk, annulus):
    # the polygon chords sit inside the circle, so the foot is within h^2 of (1, 0)
    assert np.linalg.norm(project_to_boundary(disk, (0.5, 0.0)).coords - (1.0, 0.0)) <= disk.h**2
    q = project_to_boundary(annulus, (0.6, 0.0))
    assert q.component == 1
    assert np.allclose(q.coords, (0.5, 0.0), atol=1e-12)
    with pytest.raises(AmbiguousProjection):
        project_to_boundary(disk, (0.0, 0.0), strict=True, tol=0.01)


def test_projection_unit_normal(disk):
    q = project_to_boundary(disk, (0.3, 0.4))
    assert np.linalg.norm(q.normal) == pytest.approx(1.0)
    assert q.normal @ q.coords < 0  # inner normal points toward the center


@settings(max_examples=40, deadline=None)
@given(s=st.floats(0.0, 1.0), comp=st.integers(0, 1))
def test_projection_idempotent(annulus, s, comp):
    p = boundary_point_at(annulus, comp, s * annulus.loop_length(comp))
    q = project_to_boundary(annulus, p.coords)
    assert np.linalg.norm(q.coords - p.coords) <= 1e-12
    assert q.distance <= 1e-12


def test_boundary_points_on_polyline(eccentric):
    for p in sample_boundary(eccentric, 20):
        assert eccentric.distance_to_boundary(p.coords)[0] <= eccentric.h**2
        assert np.linalg.norm(p.normal) == pytest.approx(1.0)


def test_ball_indicator_interior(disk):
    m = 0.05
    frac, r = ball_indicator(disk, (0.0, 0.0), m)
    assert r == pytest.approx(math.sqrt(m / math.pi), abs=1e-6)
    assert abs(frac @ disk.triangle_areas - m) <= 1e-8 * disk.area


def test_ball_indicator_straight_edge(rect):
    m = 0.05
    _, r = ball_indicator(rect, (0.0, -0.5), m)
    assert r == pytest.approx(math.sqrt(2 * m / math.pi), rel=1e-9)


def test_ball_indicator_whole_area(disk):
    with pytest.raises(MassOutOfRange):
        ball_indicator(disk, (0.0, 0.0), disk.area)


def test_mesh_roundtrip(tmp_path, disk):
    path = tmp_path / "disk.txt"
    write_mesh(disk, path)
    back = read_mesh(path)
    assert np.array_equal(back.nodes, disk.nodes)
    assert np.array_equal(back.triangles, disk.triangles)
    assert np.array_equal(back.component, disk.component)
