import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from multigrasp.contact import (ContactFrame, ContactParam, check_bounds, closure_gap,
                                closure_residual,
                                contact_position, force_closure_feasible, friction_cone,
                                primitive_wrenches, pyramid_edges)
from multigrasp.errors import OutOfBounds
from multigrasp.kinematics import link_endpoints
from multigrasp.geometry import point_segment_distance

from oracles import two_contact_closure

seeds = st.integers(0, 2**32 - 1)


def unit(v):
    v = np.asarray(v, float)
    return v / np.linalg.norm(v)


def frame(p, n, rng):
    n = unit(n)
    t1 = unit(np.cross(n, rng.normal(size=3)))
    return ContactFrame(np.asarray(p, float), n, t1, np.cross(n, t1))


def sphere_pair(rng, r, spread):
    """Two inward-facing contacts on a sphere, the second near the antipode."""
    u1 = unit(rng.normal(size=3))
    axis = unit(np.cross(u1, rng.normal(size=3)))
    ang = math.pi - rng.uniform(0, spread)
    u2 = math.cos(ang) * u1 + math.sin(ang) * np.cross(axis, u1)
    o = rng.uniform(-50, 50, 3)
    return o, frame(o + r * u1, -u1, rng), frame(o + r * u2, -u2, rng)


def wrenches(frames, o, mu, nf):
    return primitive_wrenches(frames, o, [friction_cone(mu, nf, f) for f in frames])


def oracle(frames, mu, nf):
    f1, f2 = frames
    return two_contact_closure(f1.position, (f1.tangent1, f1.normal, f1.tangent2),
                               f2.position, (f2.tangent1, f2.normal, f2.tangent2), mu, nf)


def test_pyramid_edges_are_unit_with_fixed_half_angle():
    for mu in (0.2, 0.5, 0.8):
        for nf in (3, 4, 8):
            E = pyramid_edges(mu, nf)
            np.testing.assert_allclose(np.linalg.norm(E, axis=0), 1.0)
            np.testing.assert_allclose(np.arccos(E[1]), math.atan(mu), atol=1e-12)
    with pytest.raises(ValueError):
        pyramid_edges(0.5, 2)
    with pytest.raises(ValueError):
        pyramid_edges(-0.1, 3)


@settings(max_examples=100, deadline=None)
@given(seeds, st.sampled_from([0.2, 0.5, 0.8]), st.sampled_from([3, 4, 8]))
def test_cone_combinations_stay_inside_coulomb_cone(seed, mu, nf):
    rng = np.random.default_rng(seed)
    fr = frame(np.zeros(3), rng.normal(size=3), rng)
    cone = friction_cone(mu, nf, fr)
    c = rng.dirichlet(np.ones(nf))
    f = c @ cone.edges
    ang = math.acos(min(1.0, f @ fr.normal / np.linalg.norm(f)))
    assert ang <= math.atan(mu) + 1e-9


@settings(max_examples=100, deadline=None)
@given(seeds, st.sampled_from([0.2, 0.5, 0.8]), st.sampled_from([3, 4, 8]))
def test_witness_satisfies_closure(seed, mu, nf):
    rng = np.random.default_rng(seed)
    o, f1, f2 = sphere_pair(rng, rng.uniform(5, 40), 0.6)
    W = wrenches([f1, f2], o, mu, nf)
    ok, c = force_closure_feasible(W)
    assert ok == oracle([f1, f2], mu, nf)
    if ok:
        assert closure_residual(W, c) <= 1e-8
    else:
        assert c is None


@settings(max_examples=60, deadline=None)
@given(seeds, st.floats(0.01, 100), st.sampled_from([0.2, 0.5, 0.8]))
def test_feasibility_invariant_under_scaling_and_rotation(seed, k, mu):
    rng = np.random.default_rng(seed)
    o, f1, f2 = sphere_pair(rng, rng.uniform(5, 40), 0.8)
    base = force_closure_feasible(wrenches([f1, f2], o, mu, 4))[0]
    Q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    moved = [ContactFrame(Q @ (o + k * (f.position - o)), Q @ f.normal, Q @ f.tangent1,
                          Q @ f.tangent2) for f in (f1, f2)]
    assert force_closure_feasible(wrenches(moved, Q @ o, mu, 4))[0] == base


@settings(max_examples=100, deadline=None)
@given(seeds, st.sampled_from([0.2, 0.5, 0.8]), st.sampled_from([3, 4, 8]))
def test_closure_gap_vanishes_exactly_on_closure(seed, mu, nf):
    rng = np.random.default_rng(seed)
    o, f1, f2 = sphere_pair(rng, rng.uniform(5, 40), 0.6)
    W = wrenches([f1, f2], o, mu, nf)
    gap = closure_gap(W)
    assert (gap <= 1e-9) == oracle([f1, f2], mu, nf)
    # a minimum over convex combinations, so no particular combination beats it
    assert gap <= closure_residual(W, rng.dirichlet(np.ones(len(W)))) + 1e-12


def test_closure_gap_of_simple_sets():
    assert closure_gap(np.eye(6)[:1]) == pytest.approx(1.0)
    assert closure_gap(np.vstack([np.eye(6)[:1], -np.eye(6)[:1]])) == pytest.approx(0.0, abs=1e-12)
    assert closure_gap(np.vstack([np.eye(6)[:1], -2 * np.eye(6)[1:2]])) == pytest.approx(2 / 3)


def test_single_contact_never_closes():
    rng = np.random.default_rng(0)
    fr = frame([0, 0, 10.0], [0, 0, -1.0], rng)
    assert not force_closure_feasible(wrenches([fr], np.zeros(3), 0.8, 8))[0]


def test_closure_residual_flags_bad_coefficients():
    W = np.vstack([np.eye(6), -np.eye(6)])
    good = np.full(12, 1 / 12)
    assert closure_residual(W, good) == pytest.approx(0.0, abs=1e-15)
    assert closure_residual(W, good * 2) == pytest.approx(1.0)
    bad = good.copy()
    bad[0] = -0.1
    assert closure_residual(W, bad) >= 0.1


def test_phalanx_contact_lies_on_link_surface(human):
    q = np.random.default_rng(4).uniform(human.lower, human.upper)
    lid = human.link_id("F2L3")
    a, b = link_endpoints(human, q, lid)
    for alpha, phi in [(0.0, 0.0), (0.5, 1.0), (1.0, -3.0), (0.3, math.pi)]:
        f = contact_position(human, q, ContactParam(lid, alpha=alpha, phi=phi))
        assert float(point_segment_distance(f.position, a, b)) == pytest.approx(5.0)
        axis_point = a + alpha * (b - a)
        np.testing.assert_allclose(f.position - 5.0 * f.normal, axis_point, atol=1e-12)
        np.testing.assert_allclose(f.rotation.T @ f.rotation, np.eye(3), atol=1e-12)
        assert np.linalg.det(f.rotation) == pytest.approx(1.0)


def test_palmar_side_is_phi_zero(human):
    q = human.rest_configuration()
    f = contact_position(human, q, ContactParam(human.link_id("F3L4"), alpha=0.5, phi=0.0))
    assert f.normal[2] == pytest.approx(1.0)


def test_palm_contact_is_on_inner_face(human):
    f = contact_position(human, human.rest_configuration(), ContactParam(0, ux=10, uy=-5))
    np.testing.assert_allclose(f.position, [10, -5, 5])
    np.testing.assert_allclose(f.normal, [0, 0, 1])


def test_contact_bounds(human):
    lid = human.link_id("F1L4")
    for cp in (ContactParam(lid, alpha=1.2), ContactParam(lid, alpha=-0.1),
               ContactParam(lid, phi=4.0), ContactParam(0, ux=31), ContactParam(0, uy=-30)):
        with pytest.raises(OutOfBounds):
            check_bounds(human, cp)
    check_bounds(human, ContactParam(lid, alpha=1.0, phi=math.pi))
    check_bounds(human, ContactParam(0, ux=30, uy=29))
