import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smflow import sphere
from smflow.errors import AntipodalError, ConjugatePointError, DegenerateGeodesicError

coord = st.floats(-1.0, 1.0, allow_nan=False)
vec3 = st.tuples(coord, coord, coord).map(np.array)
unit = vec3.filter(lambda v: np.linalg.norm(v) > 0.2).map(sphere.point)


def close_pair(draw_p, v, d):
    return sphere.exp_map(draw_p, d * sphere.point(sphere.project(draw_p, v)))


@st.composite
def point_pairs(draw, dmax=2.5):
    p = draw(unit)
    v = draw(vec3.filter(lambda w: np.linalg.norm(np.cross(w, p)) > 0.2))
    d = draw(st.floats(1e-3, dmax))
    return p, close_pair(p, v, d)


@st.composite
def tangent_at(draw, p):
    return sphere.project(p, draw(vec3))


EX, EY, EZ = np.eye(3)


def test_distance_known_values():
    q = np.array([math.cos(0.3), math.sin(0.3), 0.0])
    assert sphere.distance(EX, q) == pytest.approx(0.3, abs=1e-15)
    assert sphere.distance(EX, EY) == pytest.approx(math.pi / 2, abs=1e-15)
    tiny = np.array([math.cos(1e-10), math.sin(1e-10), 0.0])
    assert sphere.distance(EX, tiny) == pytest.approx(1e-10, rel=1e-12)


def test_delta0_for_unit_sphere():
    assert sphere.UNIT_SPHERE.delta0 == 0.25
    assert sphere.GeometryConstants(K0=0.01, i0=0.4).delta0 == pytest.approx(0.2)


@settings(max_examples=60, deadline=None)
@given(point_pairs())
def test_exp_log_round_trip(pq):
    p, q = pq
    v = sphere.log_map(p, q)
    assert abs(sphere.inner(p, v)) < 1e-12
    assert np.allclose(sphere.exp_map(p, v), q, atol=1e-12)
    assert sphere.norm(v) == pytest.approx(sphere.distance(p, q), abs=1e-12)


def test_log_antipodal_raises():
    with pytest.raises(AntipodalError):
        sphere.log_map(EZ, -EZ)
    with pytest.raises(AntipodalError):
        sphere.parallel_transport(EZ, -EZ, EX)


@settings(max_examples=60, deadline=None)
@given(point_pairs(), st.data())
def test_transport_is_isometric_and_complex_linear(pq, data):
    p, q = pq
    X = data.draw(tangent_at(q))
    PX = sphere.parallel_transport(p, q, X)
    assert abs(sphere.inner(p, PX)) < 1e-12
    assert sphere.norm(PX) == pytest.approx(sphere.norm(X), abs=1e-12)
    JX = sphere.complex_structure(q, X)
    assert np.allclose(sphere.parallel_transport(p, q, JX), sphere.complex_structure(p, PX), atol=1e-12)
    # the geodesic direction is carried to minus the reverse direction
    assert np.allclose(sphere.parallel_transport(p, q, sphere.log_map(q, p)), -sphere.log_map(p, q), atol=1e-12)
    assert np.allclose(sphere.transport_matrix(p, q) @ X, PX, atol=1e-14)


def test_curvature_convention():
    rng = np.random.default_rng(0)
    p = sphere.random_points(rng, 50)
    X, Y, Z = (sphere.random_tangents(rng, p) for _ in range(3))
    assert np.allclose(sphere.sectional_curvature(p, X, Y), 1.0)
    assert np.allclose(sphere.sectional_curvature(p, X, Y, sign=-1.0), -1.0)
    # on S^2, R(X, Y) = -<p, X x Y> J
    expect = -sphere.inner(p, np.cross(X, Y))[:, None] * sphere.complex_structure(p, Z)
    assert np.allclose(sphere.curvature(p, X, Y, Z), expect)
    M = sphere.curvature_operator(X, Y)
    assert np.allclose(np.einsum("nab,nb->na", M, Z), sphere.curvature(p, X, Y, Z))
    assert sphere.estimate_curvature_bound(rng) == pytest.approx(1.0)


def test_geodesic_endpoints_and_speed():
    rng = np.random.default_rng(1)
    p = sphere.random_points(rng, 20)
    q = sphere.exp_map(p, sphere.random_tangents(rng, p, 0.7))
    g = sphere.geodesic(p, q)
    assert np.allclose(g(np.array([0.0]))[0], p, atol=1e-15)
    assert np.allclose(g(np.array([1.0]))[0], q, atol=1e-12)
    s = np.linspace(0, 1, 7)
    assert np.allclose(sphere.norm(g.velocity(s)), g.length, atol=1e-14)
    mid = g(np.array([0.5]))[0]
    assert np.allclose(sphere.norm(mid - p), sphere.norm(mid - q), atol=1e-12)


def test_degenerate_geodesic():
    g = sphere.geodesic(EZ, EZ)
    assert g.degenerate
    assert np.all(g.velocity(np.linspace(0, 1, 3)) == 0)
    with pytest.raises(DegenerateGeodesicError):
        sphere.jacobi_bvp(g, EX, EX, 5)


def test_jacobi_quarter_circle_oracle():
    # normal data 1 -> 0 along a quarter circle: alpha(s) = cos(pi s / 2)
    g = sphere.geodesic(EX, EY)
    W, dW = sphere.jacobi_eval(g, EZ, np.zeros(3), np.array([0.0, 0.5, 1.0]))
    assert np.allclose(W[1], [0, 0, math.sqrt(0.5)], atol=1e-15)
    assert np.allclose(W[2], 0, atol=1e-15)
    assert np.allclose(dW[0], [0, 0, 0], atol=1e-15)
    assert np.allclose(dW[2], [0, 0, -math.pi / 2], atol=1e-15)


def test_jacobi_conjugate_points_raise():
    g = sphere.Geodesic(EX, -EX, np.array(math.pi), EY)
    with pytest.raises(ConjugatePointError):
        sphere.jacobi_eval(g, EZ, EZ, np.array([0.5]))


def test_jacobi_matches_shooting_and_solves_equation():
    rng = np.random.default_rng(2)
    p = sphere.random_points(rng, 4)
    q = sphere.exp_map(p, sphere.random_tangents(rng, p, 1.2))
    g = sphere.geodesic(p, q)
    X1, X2 = sphere.random_tangents(rng, p), sphere.random_tangents(rng, q)
    f = sphere.jacobi_bvp(g, X1, X2, 65)
    assert np.max(np.abs(sphere.inner(f.values, g(f.s)))) < 1e-12
    assert np.max(np.abs(sphere.inner(f.derivatives, g(f.s)))) < 1e-12
    assert sphere.jacobi_residual(f) < 1e-6
    assert sphere.jacobi_residual(f, sign=-1.0) > 1e-2
    for i in range(4):
        gi = sphere.geodesic(p[i], q[i])
        assert np.allclose(sphere.jacobi_shooting(gi, X1[i], X2[i], f.s), f.values[:, i], atol=1e-9)


def transport_pair_dist(L):
    """Pseudo-distance of the Jacobi field joining a unit normal vector to its transport."""
    return L / math.cos(L / 2) * math.sqrt(0.5 - math.sin(L) / (2 * L))


def test_pseudo_distances_on_transport_pair():
    L = 0.25
    g = sphere.geodesic(EX, np.array([math.cos(L), math.sin(L), 0.0]))
    X2 = sphere.parallel_transport(g.end, EX, EZ)
    assert sphere.pseudo_dist_transport(EX, EZ, g.end, X2) == pytest.approx(0.0, abs=1e-15)
    assert sphere.pseudo_dist_jacobi(EX, EZ, g.end, X2) == pytest.approx(transport_pair_dist(L), rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(unit, st.data())
def test_pseudo_distances_agree_at_coincident_bases(p, data):
    X1, X2 = data.draw(tangent_at(p)), data.draw(tangent_at(p))
    expect = sphere.norm(X1 - X2)
    assert sphere.pseudo_dist_jacobi(p, X1, p, X2) == expect
    assert sphere.pseudo_dist_transport(p, X1, p, X2) == pytest.approx(expect, abs=1e-15)


def _d2(p, q):
    return sphere.distance(p, q) ** 2


def test_grad_d2_matches_finite_differences():
    rng = np.random.default_rng(3)
    p = sphere.random_points(rng, 30)
    q = sphere.exp_map(p, sphere.random_tangents(rng, p, 0.5))
    X1, X2 = sphere.random_tangents(rng, p), sphere.random_tangents(rng, q)
    tau = 1e-5
    fd = (_d2(sphere.exp_map(p, tau * X1), sphere.exp_map(q, tau * X2))
          - _d2(sphere.exp_map(p, -tau * X1), sphere.exp_map(q, -tau * X2))) / (2 * tau)
    assert np.allclose(fd / 2, sphere.grad_d2(p, q, X1, X2), atol=1e-8)


def test_hessian_d2_symmetry_limit_and_fd():
    rng = np.random.default_rng(4)
    p = sphere.random_points(rng, 30)
    q = sphere.exp_map(p, sphere.random_tangents(rng, p, 0.5))
    X1, X2, Y1, Y2 = (sphere.random_tangents(rng, b) for b in (p, q, p, q))
    h = sphere.hessian_d2(p, q, X1, X2, Y1, Y2)
    assert np.allclose(h, sphere.hessian_d2(p, q, Y1, Y2, X1, X2), atol=1e-14)

    tau = 1e-3

    def f(a, b):
        return _d2(sphere.exp_map(p, a * X1 + b * Y1), sphere.exp_map(q, a * X2 + b * Y2))

    fd = (f(tau, tau) - f(tau, -tau) - f(-tau, tau) + f(-tau, -tau)) / (8 * tau * tau)
    assert np.allclose(fd, h, atol=1e-5)
    assert np.allclose(sphere.hessian_d2(p, p, X1, Y1, X1, Y1), sphere.norm(Y1 - X1) ** 2)
