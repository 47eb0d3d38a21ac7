import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st
from scipy.spatial.distance import cdist

from multigrasp.errors import DegenerateInput, NonpositiveDimension
from multigrasp.geometry import (GEOM_TOL, convex_hull, export_obj, gjk_distance, hull_distance,
                                 hull_pair_extremal_distances, point_rectangle_projection,
                                 point_segment_distance, sample_count, sample_cylinder_axis,
                                 segment_segment_distance, signed_distance)

from oracles import hull_distance_bruteforce

coord = st.floats(-50, 50, allow_nan=False, allow_infinity=False)
clouds = st.integers(0, 2**32 - 1).map(
    lambda s: np.random.default_rng(s).normal(size=(np.random.default_rng(s).integers(4, 40), 3)) * 10)


@settings(max_examples=80, deadline=None)
@given(clouds)
def test_hull_contains_its_points(pts):
    h = convex_hull(pts)
    assert h.dim == 3
    for p in pts:
        assert signed_distance(h, p) <= 1e-7


@settings(max_examples=60, deadline=None)
@given(clouds, clouds, st.tuples(coord, coord, coord))
def test_distance_is_symmetric(a, b, shift):
    b = b + np.array(shift)
    A, B = convex_hull(a), convex_hull(b)
    assert hull_distance(A, B) == pytest.approx(hull_distance(B, A), abs=1e-7)


@settings(max_examples=60, deadline=None)
@given(clouds, clouds, st.floats(60, 200))
def test_extremal_distances_sandwich_centroids(a, b, gap):
    A, B = convex_hull(a), convex_hull(b + np.array([gap, 0, 0]))
    dmin, dmax = hull_pair_extremal_distances(A, B)
    assume(dmin > 0)
    dc = float(np.linalg.norm(A.centroid - B.centroid))
    assert dmin <= dc <= dmax


@settings(max_examples=30, deadline=None)
@given(clouds, clouds, st.tuples(coord, coord, coord))
def test_gjk_matches_separating_axis_oracle(a, b, shift):
    b = b + 2 * np.array(shift)
    d = gjk_distance(a, b)[0]
    ref = hull_distance_bruteforce(a, b, n_dirs=20_000)
    assert d == pytest.approx(ref, abs=1e-6)


def test_gjk_witness_points_realise_the_distance():
    rng = np.random.default_rng(5)
    a = rng.normal(size=(30, 3))
    b = rng.normal(size=(30, 3)) + [8, 1, 0]
    d, pa, pb = gjk_distance(a, b)
    assert np.linalg.norm(pa - pb) == pytest.approx(d, abs=1e-9)
    assert signed_distance(convex_hull(a), pa) <= 1e-7
    assert signed_distance(convex_hull(b), pb) <= 1e-7


def test_signed_distance_is_negative_depth_inside():
    cube = np.array([[x, y, z] for x in (0, 2) for y in (0, 2) for z in (0, 2)], float)
    h = convex_hull(cube)
    assert signed_distance(h, [1, 1, 1]) == pytest.approx(-1.0)
    assert signed_distance(h, [3, 1, 1]) == pytest.approx(1.0)
    assert signed_distance(h, [3, 3, 1]) == pytest.approx(math.sqrt(2))
    assert h.volume == pytest.approx(8.0)


def test_degenerate_inputs_are_flagged():
    square = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0], [0.5, 0.5, 0]], float)
    h = convex_hull(square)
    assert h.degenerate and h.dim == 2 and len(h.vertices) == 4
    assert signed_distance(h, [0.5, 0.5, 2]) == pytest.approx(2.0)
    line = convex_hull([[0, 0, 0], [1, 1, 1], [2, 2, 2]])
    assert line.dim == 1
    assert convex_hull([[1, 2, 3]] * 4).dim == 0
    with pytest.raises(DegenerateInput):
        convex_hull(square, strict=True)
    with pytest.raises(DegenerateInput):
        convex_hull(np.zeros((0, 3)))


def test_extremal_max_is_vertex_pair_max():
    rng = np.random.default_rng(8)
    a, b = rng.normal(size=(20, 3)), rng.normal(size=(25, 3)) + 5
    A, B = convex_hull(a), convex_hull(b)
    assert hull_pair_extremal_distances(A, B)[1] == pytest.approx(cdist(a, b).max())


@settings(max_examples=200, deadline=None)
@given(st.tuples(coord, coord, coord), st.tuples(coord, coord, coord),
       st.tuples(coord, coord, coord), st.tuples(coord, coord, coord))
def test_segment_distance_matches_dense_sampling(p1, q1, p2, q2):
    p1, q1, p2, q2 = map(np.array, (p1, q1, p2, q2))
    d = segment_segment_distance(p1, q1, p2, q2)
    s = np.linspace(0, 1, 401)[:, None]
    dense = point_segment_distance(p1 + s * (q1 - p1), p2, q2).min()
    assert d <= dense + GEOM_TOL
    step = max(np.linalg.norm(q1 - p1), 1e-12) / 400
    assert dense - d <= step + 1e-9


def test_point_segment_distance_broadcasts():
    a, b = np.zeros(3), np.array([10.0, 0, 0])
    pts = np.array([[5, 3, 0], [-4, 0, 3], [12, 0, 0]], float)
    np.testing.assert_allclose(point_segment_distance(pts, a, b), [3, 5, 2])


def test_rectangle_projection():
    e = np.eye(3)
    x, y, off, d = point_rectangle_projection([4, 1, 3], np.zeros(3), e[0], e[1], 2, 2)
    assert (x, y, off) == (4, 1, 3)
    assert d == pytest.approx(math.hypot(2, 3))


@pytest.mark.parametrize("h,r,n", [(10, 5, 3), (40, 5, 8), (41, 5, 9), (1, 5, 3)])
def test_sample_count(h, r, n):
    assert sample_count(h, r) == n


def test_sampling_rejects_nonpositive_dimensions():
    with pytest.raises(NonpositiveDimension):
        sample_count(0, 5)
    with pytest.raises(NonpositiveDimension):
        sample_cylinder_axis(10, -1)


@settings(max_examples=60, deadline=None)
@given(st.floats(5, 200), st.floats(1, 30), st.tuples(coord, coord, coord))
def test_sampling_refinement_stays_within_one_spacing(h, r, p):
    coarse = sample_cylinder_axis(h, r)
    fine = sample_cylinder_axis(h, r / 2)
    p = np.array(p)
    dc = np.linalg.norm(coarse.points - p, axis=1).min()
    df = np.linalg.norm(fine.points - p, axis=1).min()
    assert abs(dc - df) < coarse.spacing
    np.testing.assert_allclose(coarse.points[[0, -1], 2], [-h / 2, h / 2])


def test_obj_export(tmp_path):
    h = convex_hull(np.random.default_rng(0).normal(size=(30, 3)))
    text = export_obj(h, tmp_path / "h.obj", "blob").read_text().splitlines()
    assert text[0] == "o blob"
    assert sum(t.startswith("v ") for t in text) == len(h.vertices)
    assert sum(t.startswith("f ") for t in text) == len(h.faces)
    # outward winding: face normals agree with the stored plane normals
    tri = h.vertices[h.faces]
    w = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    assert np.all(np.einsum("ij,ij->i", w, h.normals) > 0)
