"""Closed-form Riemannian geometry of the unit sphere S^2 in R^3.

Points are unit 3-vectors and tangent vectors at ``p`` are 3-vectors
orthogonal to ``p``.  Every function broadcasts over leading axes, so the
same code serves single points and whole grids of points; the last axis
always has length 3.

Geodesics are parameterized on ``[0, 1]`` with constant speed equal to
their length.  The curvature convention is

    R(X, Y) Z = <Y, Z> X - <X, Z> Y,

so that sectional curvature is +1 and the Jacobi equation
``W'' + R(W, g') g' = 0`` has oscillating normal solutions.  Every function
that touches curvature takes a ``sign`` argument (default
``CURVATURE_SIGN``) so the convention can be flipped for diagnostics.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .errors import AntipodalError, ConjugatePointError, DegenerateGeodesicError

CURVATURE_SIGN = 1.0
COINCIDENT_TOL = 1e-9
ANTIPODAL_TOL = 1e-9


def inner(a, b):
    return np.sum(np.asarray(a) * np.asarray(b), axis=-1)


def norm(a):
    return np.sqrt(inner(a, a))


def point(coords) -> np.ndarray:
    """Return ``coords`` renormalized onto the sphere."""
    coords = np.asarray(coords, dtype=float)
    return coords / norm(coords)[..., None]


def project(p, v) -> np.ndarray:
    """Orthogonal projection of the ambient vector ``v`` onto ``T_p S^2``."""
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    return v - inner(p, v)[..., None] * p


tangent = project


def distance(p, q):
    """Great-circle distance.

    Equal to ``arccos(<p, q>)`` but evaluated with ``atan2`` so that small
    distances keep full relative precision.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    return np.arctan2(norm(np.cross(p, q)), inner(p, q))


def exp_map(p, v) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    r = norm(v)
    safe = np.where(r > 0, r, 1.0)
    out = np.cos(r)[..., None] * p + (np.sin(r) / safe)[..., None] * v
    return np.where((r > 0)[..., None], out, p)


def _check_not_antipodal(d):
    if np.any(d >= np.pi - ANTIPODAL_TOL):
        raise AntipodalError(f"points at distance {np.max(d):.17g} have no unique geodesic")


def _unit_direction(p, q):
    """Unit tangent at ``p`` pointing to ``q`` (zero where p == q)."""
    w = project(p, q - p)
    r = norm(w)
    safe = np.where(r > 0, r, 1.0)
    return np.where((r > 0)[..., None], w / safe[..., None], 0.0)


def log_map(p, q) -> np.ndarray:
    """Inverse of :func:`exp_map`; raises :class:`AntipodalError` near ``-p``."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    d = distance(p, q)
    _check_not_antipodal(d)
    return d[..., None] * _unit_direction(p, q)


def parallel_transport(p, q, X) -> np.ndarray:
    """Transport ``X`` in ``T_q`` to ``T_p`` along the minimizing geodesic.

    The transport is the rotation about ``q x p`` taking ``q`` to ``p``;
    written without the rotation angle it is
    ``X - <p, X> / (1 + <p, q>) * (p + q)``.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    X = np.asarray(X, dtype=float)
    _check_not_antipodal(distance(p, q))
    coef = inner(p, X) / (1.0 + inner(p, q))
    return X - coef[..., None] * (p + q)


def transport_matrix(p, q) -> np.ndarray:
    """Matrix of :func:`parallel_transport` ``T_q -> T_p`` acting on ambient vectors."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    _check_not_antipodal(distance(p, q))
    eye = np.broadcast_to(np.eye(3), p.shape[:-1] + (3, 3))
    return eye - (p + q)[..., :, None] * p[..., None, :] / (1.0 + inner(p, q))[..., None, None]


def complex_structure(p, v) -> np.ndarray:
    """``J(p) v = p x v``: rotation by +90 degrees in ``T_p``."""
    return np.cross(p, v)


def curvature(p, X, Y, Z, sign=None) -> np.ndarray:
    """Riemann tensor ``R(X, Y) Z`` of the unit sphere."""
    sign = CURVATURE_SIGN if sign is None else sign
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    return sign * (inner(Y, Z)[..., None] * X - inner(X, Z)[..., None] * Y)


def curvature_operator(X, Y, sign=None) -> np.ndarray:
    """3x3 matrix of ``Z -> R(X, Y) Z`` (restricted to the tangent plane)."""
    sign = CURVATURE_SIGN if sign is None else sign
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    return sign * (X[..., :, None] * Y[..., None, :] - Y[..., :, None] * X[..., None, :])


def sectional_curvature(p, X, Y, sign=None):
    num = inner(curvature(p, X, Y, Y, sign), X)
    den = inner(X, X) * inner(Y, Y) - inner(X, Y) ** 2
    return num / den


def random_points(rng, size) -> np.ndarray:
    shape = (size,) if np.isscalar(size) else tuple(size)
    return point(rng.standard_normal(shape + (3,)))


def random_tangents(rng, p, scale=1.0) -> np.ndarray:
    p = np.asarray(p)
    return scale * project(p, rng.standard_normal(p.shape))


@dataclass(frozen=True)
class GeometryConstants:
    """Curvature bound, injectivity radius and the closeness radius."""

    K0: float = 1.0
    i0: float = np.pi

    @property
    def delta0(self) -> float:
        return min(self.i0 / 2.0, 1.0 / (4.0 * np.sqrt(self.K0)))


UNIT_SPHERE = GeometryConstants()


def estimate_curvature_bound(rng, n_samples=256, sign=None) -> float:
    """Largest sampled sectional curvature; the K0 the curvature map actually implies."""
    p = random_points(rng, n_samples)
    X = random_tangents(rng, p)
    Y = random_tangents(rng, p)
    return float(np.max(sectional_curvature(p, X, Y, sign)))


def _batch_s(s, batch_ndim):
    s = np.asarray(s, dtype=float)
    return s.reshape(s.shape + (1,) * batch_ndim)


@dataclass(frozen=True)
class Geodesic:
    """Minimizing great-circle arcs ``[0, 1] -> S^2`` (batched over leading axes).

    ``unit_tangent`` is the unit velocity at ``start`` (zero for coincident
    endpoints) and ``normal = start x unit_tangent`` is the parallel unit
    normal field of the arc.
    """

    start: np.ndarray
    end: np.ndarray
    length: np.ndarray
    unit_tangent: np.ndarray

    @property
    def normal(self) -> np.ndarray:
        return np.cross(self.start, self.unit_tangent)

    @property
    def degenerate(self) -> np.ndarray:
        return self.length < COINCIDENT_TOL

    @property
    def batch_ndim(self) -> int:
        return np.ndim(self.length)

    def __call__(self, s) -> np.ndarray:
        ls = _batch_s(s, self.batch_ndim) * self.length
        return np.cos(ls)[..., None] * self.start + np.sin(ls)[..., None] * self.unit_tangent

    def unit_tangent_at(self, s) -> np.ndarray:
        ls = _batch_s(s, self.batch_ndim) * self.length
        return -np.sin(ls)[..., None] * self.start + np.cos(ls)[..., None] * self.unit_tangent

    def velocity(self, s) -> np.ndarray:
        return self.length[..., None] * self.unit_tangent_at(s)


def geodesic(p, q) -> Geodesic:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    d = distance(p, q)
    _check_not_antipodal(d)
    e = _unit_direction(p, q)
    e = np.where((d < COINCIDENT_TOL)[..., None], 0.0, e)
    return Geodesic(p, q, d, e)


@dataclass(frozen=True)
class JacobiField:
    """Samples of a Jacobi field and its covariant s-derivative along ``geodesic``.

    ``values`` and ``derivatives`` have shape ``(len(s),) + batch + (3,)``.
    """

    geodesic: Geodesic
    s: np.ndarray
    values: np.ndarray
    derivatives: np.ndarray


def jacobi_eval(g: Geodesic, X1, X2, s):
    """Closed-form Jacobi field with ``W(0) = X1``, ``W(1) = X2``, evaluated at ``s``.

    The tangential part is linear in ``s``; the normal part solves
    ``a'' + L^2 a = 0``.  Coincident endpoints fall back to the ``L -> 0``
    limit ``W = (1 - s) X1 + s X2``.  Returns ``(values, derivatives)``.
    """
    X1 = np.asarray(X1, dtype=float)
    X2 = np.asarray(X2, dtype=float)
    L = g.length
    deg = g.degenerate
    sinL = np.sin(L)
    if np.any(~deg & (np.abs(sinL) < 1e-9)):
        raise ConjugatePointError("endpoints are conjugate along the geodesic")
    e, n = g.unit_tangent, g.normal
    T1 = g.unit_tangent_at(np.array([1.0]))[0]
    b0, b1 = inner(X1, e), inner(X2, T1)
    a0, a1 = inner(X1, n), inner(X2, n)
    c = (a1 - a0 * np.cos(L)) / np.where(deg, 1.0, sinL)

    sb = _batch_s(s, g.batch_ndim)
    ls = sb * L
    T = g.unit_tangent_at(s)
    beta = b0 + (b1 - b0) * sb
    alpha = a0 * np.cos(ls) + c * np.sin(ls)
    dalpha = L * (-a0 * np.sin(ls) + c * np.cos(ls))
    values = beta[..., None] * T + alpha[..., None] * n
    derivs = (b1 - b0)[..., None] * T + dalpha[..., None] * n

    flat_vals = (1.0 - sb)[..., None] * X1 + sb[..., None] * X2
    flat_ders = np.broadcast_to(X2 - X1, derivs.shape)
    values = np.where(deg[..., None], flat_vals, values)
    derivs = np.where(deg[..., None], flat_ders, derivs)
    return values, derivs


def jacobi_bvp(g: Geodesic, X1, X2, n_samples: int) -> JacobiField:
    """Jacobi field along ``g`` with boundary values ``X1`` (at start), ``X2`` (at end)."""
    if n_samples < 2:
        raise ValueError("n_samples must be >= 2")
    if np.any(g.degenerate):
        raise DegenerateGeodesicError("geodesic length below 1e-9; use the coincident convention")
    s = np.linspace(0.0, 1.0, n_samples)
    values, derivs = jacobi_eval(g, X1, X2, s)
    return JacobiField(g, s, values, derivs)


def jacobi_residual(field: JacobiField, sign=None) -> float:
    """Sup-norm of ``W'' + R(W, g') g'`` at interior samples.

    The second covariant derivative is the tangent projection of a
    fourth-order central difference of the sampled covariant derivative
    (uniform samples, the two outermost samples on each side are skipped).
    """
    g, s = field.geodesic, field.s
    if len(s) < 5:
        raise ValueError("need at least 5 samples")
    ds = s[1] - s[0]
    D = field.derivatives
    pts = g(s)[2:-2]
    vel = g.velocity(s)[2:-2]
    diff = (-D[4:] + 8 * D[3:-1] - 8 * D[1:-3] + D[:-4]) / (12 * ds)
    res = project(pts, diff) + curvature(pts, field.values[2:-2], vel, vel, sign)
    return float(np.max(norm(res)))


def jacobi_shooting(g: Geodesic, X1, X2, s, sign=None, rtol=1e-12, atol=1e-13):
    """Independent Jacobi solve by linear shooting (single geodesic).

    Integrates ``w'' = -K(s) w`` in the parallel orthonormal frame
    (unit tangent, normal), with ``K_ab = <R(E_a, g') g', E_b>`` taken from
    :func:`curvature`, and picks the initial slope that hits ``X2``.
    """
    s = np.asarray(s, dtype=float)
    n = g.normal

    def frame(t):
        return np.stack([g.unit_tangent_at(np.atleast_1d(t))[0], n])

    def rhs(t, y):
        E = frame(t)
        pt = g(np.atleast_1d(t))[0]
        v = g.velocity(np.atleast_1d(t))[0]
        K = np.array([[inner(curvature(pt, E[a], v, v, sign), E[b]) for b in range(2)]
                      for a in range(2)])
        w = y[:2, :]
        return np.concatenate([y[2:, :], -K.T @ w]).ravel()

    def integrate(y0):
        sol = solve_ivp(lambda t, y: rhs(t, y.reshape(4, -1)), (0.0, 1.0), y0.ravel(),
                        method="DOP853", rtol=rtol, atol=atol, dense_output=True)
        return sol

    E0, E1 = frame(0.0), frame(1.0)
    w0 = E0 @ X1
    w1 = E1 @ X2
    # fundamental solutions: columns = (w0 data, slope e_1, slope e_2)
    y0 = np.zeros((4, 3))
    y0[:2, 0] = w0
    y0[2, 1] = 1.0
    y0[3, 2] = 1.0
    sol = integrate(y0)
    end = sol.y[:, -1].reshape(4, 3)
    slope = np.linalg.solve(end[:2, 1:], w1 - end[:2, 0])
    ys = sol.sol(s).reshape(4, 3, -1)
    w = ys[:2, 0, :] + np.einsum("ajk,j->ak", ys[:2, 1:, :], slope)
    frames = np.stack([g.unit_tangent_at(s), np.broadcast_to(n, (len(s), 3))], axis=1)
    return np.einsum("ak,kad->kd", w, frames)


def _gauss_legendre01(n_quad):
    x, w = np.polynomial.legendre.leggauss(n_quad)
    return 0.5 * (x + 1.0), 0.5 * w


def pseudo_dist_transport(p1, X1, p2, X2):
    """``|P X2 - X1|`` with ``P: T_{p2} -> T_{p1}`` the geodesic transport."""
    return norm(parallel_transport(p1, p2, X2) - np.asarray(X1))


def pseudo_dist_jacobi(p1, X1, p2, X2, n_quad: int = 16):
    """L2 norm of the covariant s-derivative of the Jacobi field joining X1 to X2.

    At coincident bases (distance < 1e-9) this is ``|X1 - X2|``.
    """
    g = geodesic(p1, p2)
    s, w = _gauss_legendre01(n_quad)
    _, ders = jacobi_eval(g, X1, X2, s)
    val = np.sqrt(np.einsum("k,k...->...", w, inner(ders, ders)))
    return np.where(g.degenerate, norm(np.asarray(X1) - np.asarray(X2)), val)


def grad_d2(p, q, X1, X2):
    """Half the derivative of ``d^2`` on ``S^2 x S^2`` in the direction ``(X1, X2)``.

    Equals ``<g'(0), P X2 - X1>`` for the geodesic ``g`` from ``p`` to ``q``.
    """
    v = log_map(p, q)
    return inner(v, parallel_transport(p, q, X2) - np.asarray(X1))


def hessian_d2(p, q, X1, X2, Y1, Y2, n_quad: int = 16, sign=None):
    """Half the covariant Hessian of ``d^2`` on ``S^2 x S^2``.

    Evaluated from the second variation formula with Jacobi fields ``Xb``,
    ``Yb`` along the geodesic and unit tangent ``T``::

        dd(X) dd(Y) + int <Xb'perp, Yb'perp> - d^2 int <R(T, Xb perp) Yb perp, T>

    where ``dd(X) = <T(0), P X2 - X1>``.  Coincident points use the limit
    ``<X2 - X1, Y2 - Y1>``.
    """
    X1, X2, Y1, Y2 = (np.asarray(a, dtype=float) for a in (X1, X2, Y1, Y2))
    g = geodesic(p, q)
    d = g.length
    T0 = g.unit_tangent
    first = (inner(T0, parallel_transport(p, q, X2) - X1)
             * inner(T0, parallel_transport(p, q, Y2) - Y1))

    s, w = _gauss_legendre01(n_quad)
    xv, xd = jacobi_eval(g, X1, X2, s)
    yv, yd = jacobi_eval(g, Y1, Y2, s)
    T = g.unit_tangent_at(s)
    pts = g(s)

    def perp(v):
        return v - inner(v, T)[..., None] * T

    grad_term = np.einsum("k,k...->...", w, inner(perp(xd), perp(yd)))
    curv = inner(curvature(pts, T, perp(xv), perp(yv), sign), T)
    curv_term = np.einsum("k,k...->...", w, curv)
    val = first + grad_term - d ** 2 * curv_term
    return np.where(g.degenerate, inner(X2 - X1, Y2 - Y1), val)
