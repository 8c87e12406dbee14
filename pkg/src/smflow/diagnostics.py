"""Energy-method diagnostics comparing two nearby maps ``u1``, ``u2``.

The two maps are joined node by node by minimizing geodesics
``U(s, x)``, ``s in [0, 1]``.  Parallel transport along them identifies
``u2*TS^2`` with ``u1*TS^2`` and gives the comparison quantities

    Q1 = int d(u1, u2)^2,     Q2 = int |P grad u2 - grad u1|^2,

the connection difference ``B_i`` of the two pull-back connections (a
curvature integral along ``U``), the difference of the two covariant
Laplacians, and the growth constant of ``Q1 + Q2``.

Degenerate nodes (``u1 = u2``) are branched on explicitly: the distance is
not differentiable there, so nothing ever divides by it.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import sphere
from .errors import ClosenessError, DegenerateDataError, GridMismatchError
from .fields import (
    Grid,
    MapField,
    TangentField,
    check_same_grid,
    covariant_derivative,
    covariant_gradient,
    covariant_laplacian,
    integrate_scalar,
)


def _maps(u1: MapField, u2: MapField):
    try:
        check_same_grid(u1.grid, u2.grid)
    except GridMismatchError:
        raise
    return u1.values, u2.values


def closeness_guard(u1: MapField, u2: MapField) -> float:
    """Largest pointwise distance; compare against ``GeometryConstants.delta0``."""
    a, b = _maps(u1, u2)
    return float(np.max(sphere.distance(a, b)))


def simpson_weights(n: int) -> np.ndarray:
    if n < 3 or n % 2 == 0:
        raise ValueError("Simpson needs an odd number >= 3 of samples")
    w = np.ones(n)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w / (3.0 * (n - 1))


@dataclass(frozen=True)
class GeodesicHomotopy:
    """Per-node geodesics ``U(s, x)`` from ``u1(x)`` to ``u2(x)`` sampled at ``s``.

    ``U`` and ``dU`` (the s-velocity, of length ``d(u1, u2)``) have shape
    ``(len(s),) + grid.shape + (3,)``.
    """

    grid: Grid
    u1: np.ndarray = field(repr=False)
    u2: np.ndarray = field(repr=False)
    s: np.ndarray = field(repr=False)
    geodesic: sphere.Geodesic = field(repr=False)
    U: np.ndarray = field(repr=False)
    dU: np.ndarray = field(repr=False)

    @property
    def dist(self) -> np.ndarray:
        return self.geodesic.length

    def map1(self) -> MapField:
        return MapField(self.grid, self.u1, renormalize=False)

    def map2(self) -> MapField:
        return MapField(self.grid, self.u2, renormalize=False)

    def geodesic_for(self, shape) -> sphere.Geodesic:
        """The node geodesics broadcast against a leading direction axis."""
        g = self.geodesic
        bc = lambda a: np.broadcast_to(a, shape)
        return sphere.Geodesic(bc(g.start), bc(g.end), np.broadcast_to(g.length, shape[:-1]),
                               bc(g.unit_tangent))


def build_homotopy(u1: MapField, u2: MapField, s_samples: int = 9,
                   constants: sphere.GeometryConstants = sphere.UNIT_SPHERE) -> GeodesicHomotopy:
    a, b = _maps(u1, u2)
    simpson_weights(s_samples)
    d = sphere.distance(a, b)
    worst = np.unravel_index(np.argmax(d), d.shape)
    if d[worst] >= constants.delta0:
        raise ClosenessError(tuple(int(i) for i in worst), float(d[worst]), constants.delta0)
    g = sphere.geodesic(a, b)
    s = np.linspace(0.0, 1.0, s_samples)
    U = g(s)
    U[0], U[-1] = a, b
    return GeodesicHomotopy(u1.grid, a, b, s, g, U, g.velocity(s))


def _transport_back(H: GeodesicHomotopy, comps: np.ndarray) -> np.ndarray:
    """``P`` on raw components; nodes with bit-identical endpoints are passed through untouched."""
    same = np.all(H.u1 == H.u2, axis=-1)[..., None]
    return np.where(same, comps, sphere.parallel_transport(H.u1, H.u2, comps))


def morphism_apply(H: GeodesicHomotopy, F: TangentField) -> TangentField:
    """Transport a section of ``u2*TS^2 (x) T*M`` to ``u1*TS^2 (x) T*M``, direction by direction."""
    if not np.array_equal(F.base, H.u2):
        raise ValueError("tangent field is not based on u2 of the homotopy")
    return TangentField(H.grid, H.u1, _transport_back(H, F.components), project=False)


def q1(u1: MapField, u2: MapField) -> float:
    a, b = _maps(u1, u2)
    return integrate_scalar(sphere.distance(a, b) ** 2, u1.grid)


def psi(H: GeodesicHomotopy) -> np.ndarray:
    """``P grad u2 - grad u1`` as a section of ``u1*TS^2 (x) T*M``."""
    phi1 = covariant_gradient(H.map1()).components
    phi2 = covariant_gradient(H.map2()).components
    return _transport_back(H, phi2) - phi1


def q2(H: GeodesicHomotopy) -> float:
    return integrate_scalar(np.sum(psi(H) ** 2, axis=(0, -1)), H.grid)


def tangent_frame(p) -> tuple:
    """Orthonormal tangent basis at each point (the axis least aligned with ``p`` seeds it)."""
    axes = np.eye(3)[np.argmin(np.abs(p), axis=-1)]
    e1 = sphere.point(sphere.project(p, axes))
    return e1, np.cross(p, e1)


def q2_frame(H: GeodesicHomotopy) -> float:
    """Q2 from frame components: a frame at u1 transported to u2 along each geodesic."""
    f1 = tangent_frame(H.u1)
    f2 = [sphere.parallel_transport(H.u2, H.u1, f) for f in f1]
    g1 = covariant_gradient(H.map1()).components
    g2 = covariant_gradient(H.map2()).components
    tot = np.zeros(H.grid.shape)
    for a in range(2):
        tot += np.sum((sphere.inner(g2, f2[a]) - sphere.inner(g1, f1[a])) ** 2, axis=0)
    return integrate_scalar(tot, H.grid)


# ---------------------------------------------------------------------------
# Q1 rate identity

def hessian_rate_integrand(u1: np.ndarray, u2: np.ndarray, grid: Grid, n_quad: int = 16, sign=None):
    """Pointwise ``-sum_k Hess d^2((du1_k, du2_k), (J du1_k, J du2_k))`` (full, not halved)."""
    g1 = covariant_gradient(MapField(grid, u1, renormalize=False)).components
    g2 = covariant_gradient(MapField(grid, u2, renormalize=False)).components
    p = np.broadcast_to(u1, g1.shape)
    q = np.broadcast_to(u2, g2.shape)
    J1 = sphere.complex_structure(p, g1)
    J2 = sphere.complex_structure(q, g2)
    half = sphere.hessian_d2(p, q, g1, g2, J1, J2, n_quad=n_quad, sign=sign)
    return -2.0 * np.sum(half, axis=0)


def gradient_bound_factor(u1: np.ndarray, u2: np.ndarray, grid: Grid) -> float:
    """``sup_x sum_k (|du1_k| + |du2_k|)^2``: turns the Hessian constant into the Q1 constant."""
    g1 = covariant_gradient(MapField(grid, u1, renormalize=False)).components
    g2 = covariant_gradient(MapField(grid, u2, renormalize=False)).components
    return float(np.max(np.sum((sphere.norm(g1) + sphere.norm(g2)) ** 2, axis=0)))


@dataclass(frozen=True)
class RateCheck:
    t: float
    lhs: float
    rhs: float
    q1: float
    q2: float
    c_q1: float
    bound: float

    @property
    def consistency(self) -> float:
        return abs(self.lhs - self.rhs)

    @property
    def violation(self) -> float:
        return max(0.0, 0.5 * self.lhs - self.bound)


def q1_rate_check(traj1, traj2, t: float, c_hessian: float, n_quad: int = 16, sign=None) -> RateCheck:
    """Compare ``dQ1/dt`` with ``-int Hess d^2(X, Y)`` and the bound ``Q2 + C Q1``.

    ``lhs`` is a centered difference of Q1 between stored snapshots, ``rhs``
    the integrated Hessian term with ``X = (du1, du2)``, ``Y = (J du1, J du2)``.
    The constant ``C = c_hessian * sup sum_k (|du1_k| + |du2_k|)^2`` follows
    from the Hessian bound with the measured ``c_hessian``.
    """
    a, b, c = traj1.centered(t)
    if traj2.centered(t) != (a, b, c) or not np.allclose(traj1.times[a:c + 1], traj2.times[a:c + 1]):
        raise ValueError("trajectories are not sampled at the same times")
    grid = traj1.grid
    check_same_grid(grid, traj2.grid)

    def Q1(i):
        return integrate_scalar(sphere.distance(traj1.snapshots[i], traj2.snapshots[i]) ** 2, grid)

    dt = traj1.times[c] - traj1.times[b]
    lhs = (Q1(c) - Q1(a)) / (2 * dt)
    u1, u2 = traj1.snapshots[b], traj2.snapshots[b]
    rhs = integrate_scalar(hessian_rate_integrand(u1, u2, grid, n_quad, sign), grid)
    H = build_homotopy(MapField(grid, u1, renormalize=False), MapField(grid, u2, renormalize=False), 3)
    q1v, q2v = Q1(b), q2(H)
    c_q1 = c_hessian * gradient_bound_factor(u1, u2, grid)
    return RateCheck(traj1.times[b], lhs, rhs, q1v, q2v, c_q1, q2v + c_q1 * q1v)


# ---------------------------------------------------------------------------
# connection difference

@dataclass(frozen=True)
class ConnectionDifference:
    """``B_i = P nabla_{2,i} P^{-1} - nabla_{1,i}`` per node and direction.

    ``matrices`` has shape ``(m,) + grid.shape + (3, 3)`` and acts on ambient
    vectors; only its restriction to ``T_{u1}`` is meaningful.
    """

    grid: Grid
    base: np.ndarray = field(repr=False)
    matrices: np.ndarray = field(repr=False)
    sup_jacobi: np.ndarray = field(repr=False)
    dist: np.ndarray = field(repr=False)

    def apply(self, X) -> np.ndarray:
        return np.einsum("...ab,...b->...a", self.matrices, X)

    def tangent_matrices(self) -> np.ndarray:
        """2x2 matrices in the frame :func:`tangent_frame` at each base point."""
        e = tangent_frame(self.base)
        cols = [self.apply(np.broadcast_to(f, self.matrices.shape[:-1])) for f in e]
        return np.stack([np.stack([sphere.inner(f, c) for c in cols], -1) for f in e], -2)

    def operator_norm(self) -> np.ndarray:
        return np.linalg.norm(self.tangent_matrices(), ord=2, axis=(-2, -1))

    def skew_defect(self) -> float:
        M = self.tangent_matrices()
        return float(np.max(np.abs(M + np.swapaxes(M, -1, -2))))

    def bound_violations(self, curvature_bound: float, rtol: float = 1e-9) -> int:
        """Nodes where ``|B_i| > K0 d sup_s |nabla_i U|``."""
        rhs = curvature_bound * self.dist * self.sup_jacobi
        return int(np.sum(self.operator_norm() > rhs + rtol * np.abs(rhs) + 1e-15))


def _jacobi_along(H: GeodesicHomotopy, phi1: np.ndarray, phi2: np.ndarray):
    """``nabla_i U`` and its s-derivative at every s-sample: shape ``(S, m) + grid + (3,)``."""
    g = H.geodesic_for(phi1.shape)
    W, dW = sphere.jacobi_eval(g, phi1, phi2, H.s)
    W[0], W[-1] = phi1, phi2
    return W, dW


def _transported_integral(H: GeodesicHomotopy, ops: np.ndarray) -> np.ndarray:
    """``int_0^1 P_{0<-s} ops(s) P_{s<-0} ds`` by Simpson; ``ops`` is ``(S, m) + grid + (3, 3)``."""
    to0 = sphere.transport_matrix(H.u1[None], H.U)
    from0 = sphere.transport_matrix(H.U, H.u1[None])
    M = to0[:, None] @ ops @ from0[:, None]
    return np.einsum("s,s...->...", simpson_weights(len(H.s)), M)


def connection_difference(H: GeodesicHomotopy, sign=None) -> ConnectionDifference:
    """``B_i = int_0^1 R(dU/ds, nabla_i U) ds`` with each integrand carried back to ``s = 0``."""
    phi1 = covariant_gradient(H.map1()).components
    phi2 = covariant_gradient(H.map2()).components
    W, _ = _jacobi_along(H, phi1, phi2)
    dU = np.broadcast_to(H.dU[:, None], W.shape)
    B = _transported_integral(H, sphere.curvature_operator(dU, W, sign))
    B = np.where(H.geodesic.degenerate[None, ..., None, None], 0.0, B)
    sup_w = np.max(sphere.norm(W), axis=0)
    return ConnectionDifference(H.grid, H.u1, B, sup_w, H.dist)


def connection_difference_direct(H: GeodesicHomotopy) -> np.ndarray:
    """Measured ``(P nabla_2 P^{-1} - nabla_1) X`` on the sections ``X = Pi_{u1}(e_a)``.

    Returns shape ``(m, 3) + grid.shape + (3,)``: direction, section, node.
    Compare with ``ConnectionDifference.apply`` on the same sections.
    """
    grid = H.grid
    out = []
    for k in range(grid.dim):
        per = []
        for a in range(3):
            X = sphere.project(H.u1, np.eye(3)[a])
            X2 = sphere.parallel_transport(H.u2, H.u1, X)
            d2 = sphere.parallel_transport(H.u1, H.u2, covariant_derivative(X2, H.u2, grid, k))
            per.append(d2 - covariant_derivative(X, H.u1, grid, k))
        out.append(np.stack(per))
    return np.stack(out)


def coordinate_sections(H: GeodesicHomotopy) -> np.ndarray:
    return np.stack([sphere.project(H.u1, np.eye(3)[a]) for a in range(3)])


# ---------------------------------------------------------------------------
# Laplacian difference

def laplacian_difference(H: GeodesicHomotopy, phi2: TangentField, sign=None):
    """``(Lap_2 - Lap_1)`` acting on ``phi2``, seen on ``u1*TS^2``, evaluated two ways.

    ``direct = P(Lap_2 phi2) - Lap_1(P phi2)`` from the two discrete covariant
    Laplacians; ``via_B = sum_k (nabla_{2,k} B_k) + 2 B_k nabla_{2,k} - B_k^2``
    with ``nabla_{2,k} B_k`` obtained by Simpson quadrature of the
    x-differentiated curvature integrand (the ``nabla R`` term is zero on S^2).
    Returns ``(direct, via_B)`` as tangent fields over ``u1``.
    """
    grid = H.grid
    xi = morphism_apply(H, phi2).components
    lap2 = covariant_laplacian(phi2).components
    lap1 = covariant_laplacian(TangentField(grid, H.u1, xi)).components
    direct = sphere.parallel_transport(H.u1, H.u2, lap2) - lap1

    phi1 = covariant_gradient(H.map1()).components
    grad2 = covariant_gradient(H.map2()).components
    W, dW = _jacobi_along(H, phi1, grad2)
    dU = np.broadcast_to(H.dU[:, None], W.shape)
    B = connection_difference(H, sign).matrices

    via = np.zeros_like(xi)
    for k in range(grid.dim):
        dxW = np.stack([covariant_derivative(W[j, k], H.U[j], grid, k) for j in range(len(H.s))])
        ops = sphere.curvature_operator(dW[:, k], W[:, k], sign) + sphere.curvature_operator(dU[:, k], dxW, sign)
        D = _transported_integral(H, ops[:, None])[0]
        D = np.where(H.geodesic.degenerate[..., None, None], 0.0, D)
        Bk = B[k]
        for i in range(xi.shape[0]):
            nab = sphere.parallel_transport(H.u1, H.u2, covariant_derivative(phi2.components[i], H.u2, grid, k))
            via[i] += (np.einsum("...ab,...b->...a", D, xi[i])
                       + 2 * np.einsum("...ab,...b->...a", Bk, nab)
                       - np.einsum("...ab,...b->...a", Bk @ Bk, xi[i]))
    return TangentField(grid, H.u1, direct), TangentField(grid, H.u1, via)


def l2_norm(F: TangentField) -> float:
    return math.sqrt(integrate_scalar(F.norm2(), F.grid))


# ---------------------------------------------------------------------------
# Jacobi estimates

@dataclass(frozen=True)
class JacobiEstimate:
    first_order_ratio: float
    second_order_ratio: float


def _safe_ratio(num, den):
    """``num / den`` with ``0 / 0 -> 0``."""
    den = np.asarray(den, dtype=float)
    out = np.zeros(np.broadcast(num, den).shape)
    np.divide(num, den, out=out, where=den > 0)
    return out


def jacobi_estimate_check(H: GeodesicHomotopy) -> JacobiEstimate:
    """Largest ratios ``sup_s |nabla_i U| / (|phi1_i| + |phi2_i|)`` and the second-order analogue."""
    grid = H.grid
    phi1 = covariant_gradient(H.map1()).components
    phi2 = covariant_gradient(H.map2()).components
    W, _ = _jacobi_along(H, phi1, phi2)
    n1, n2 = sphere.norm(phi1), sphere.norm(phi2)
    first = _safe_ratio(np.max(sphere.norm(W), axis=0), n1 + n2)

    second = 0.0
    for i in range(grid.dim):
        for j in range(grid.dim):
            dd = np.stack([covariant_derivative(W[s, j], H.U[s], grid, i) for s in range(len(H.s))])
            h1 = sphere.norm(covariant_derivative(phi1[j], H.u1, grid, i))
            h2 = sphere.norm(covariant_derivative(phi2[j], H.u2, grid, i))
            den = h1 + h2 + (n1[i] + n2[i]) * (n1[j] + n2[j])
            second = max(second, float(np.max(_safe_ratio(np.max(sphere.norm(dd), axis=0), den))))
    return JacobiEstimate(float(np.max(first)), second)


# ---------------------------------------------------------------------------
# reports and Gronwall fitting

@dataclass
class DiagnosticsReport:
    """Time series of a two-run comparison plus fitted constants."""

    times: list = field(default_factory=list)
    Q1: list = field(default_factory=list)
    Q2: list = field(default_factory=list)
    dQ1_lhs: list = field(default_factory=list)
    dQ1_rhs: list = field(default_factory=list)
    bound: list = field(default_factory=list)
    gronwall_C: float | None = None
    constants: dict = field(default_factory=dict)
    residuals: dict = field(default_factory=dict)
    violations: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.validate()

    def validate(self):
        n = len(self.times)
        for name in ("Q1", "Q2", "dQ1_lhs", "dQ1_rhs", "bound"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"series {name} has length {len(getattr(self, name))}, expected {n}")
        if any(v < 0 for v in self.Q1 + self.Q2):
            raise ValueError("Q1 and Q2 must be non-negative")

    @property
    def Q(self) -> np.ndarray:
        return np.asarray(self.Q1) + np.asarray(self.Q2)

    def bound_slack(self) -> list:
        """``bound - dQ1/dt / 2`` (NaN where the rate is unavailable)."""
        return [b - 0.5 * l for b, l in zip(self.bound, self.dQ1_lhs)]

    CSV_COLUMNS = ("t", "Q1", "Q2", "dQ1_lhs", "dQ1_rhs", "bound_slack")

    def to_json(self) -> dict:
        return {
            "schema": "smflow.diagnostics/1",
            "metadata": self.metadata,
            "gronwall_C": self.gronwall_C,
            "constants": self.constants,
            "residuals": self.residuals,
            "violations": self.violations,
            "series": {
                "t": list(self.times), "Q1": list(self.Q1), "Q2": list(self.Q2),
                "dQ1_lhs": list(self.dQ1_lhs), "dQ1_rhs": list(self.dQ1_rhs), "bound": list(self.bound),
            },
        }

    @classmethod
    def from_json(cls, doc: dict) -> "DiagnosticsReport":
        s = doc["series"]
        return cls(times=s["t"], Q1=s["Q1"], Q2=s["Q2"], dQ1_lhs=s["dQ1_lhs"], dQ1_rhs=s["dQ1_rhs"],
                   bound=s["bound"], gronwall_C=doc.get("gronwall_C"), constants=doc.get("constants", {}),
                   residuals=doc.get("residuals", {}), violations=doc.get("violations", {}),
                   metadata=doc.get("metadata", {}))

    def write(self, json_path, csv_path=None) -> None:
        with open(json_path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2, allow_nan=True)
        if csv_path is not None:
            with open(csv_path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(self.CSV_COLUMNS)
                for row in zip(self.times, self.Q1, self.Q2, self.dQ1_lhs, self.dQ1_rhs, self.bound_slack()):
                    w.writerow([f"{v:.17g}" for v in row])


@dataclass(frozen=True)
class GronwallRates:
    """Growth rates of ``Q = Q1 + Q2`` on the fit window.

    ``lsq`` is half the least-squares slope of ``log Q``; ``envelope`` is the
    largest sampled ``(dQ/dt) / (2 Q)``.  The fitted constant is the larger of
    the two, so it bounds the sampled rate pointwise.
    """

    lsq: float
    envelope: float
    window: tuple

    @property
    def C(self) -> float:
        return max(self.lsq, self.envelope)


def gronwall_rates(report: DiagnosticsReport, window=(0.1, 1.0)) -> GronwallRates:
    t = np.asarray(report.times, dtype=float)
    Q = report.Q
    if len(t) < 3:
        raise DegenerateDataError("need at least three sampled times")
    T = t[-1]
    lo, hi = window[0] * T, window[1] * T
    sel = (t >= lo - 1e-12 * T) & (t <= hi + 1e-12 * T)
    if np.sum(sel) < 2:
        raise DegenerateDataError("fit window holds fewer than two samples")
    if not np.all(Q[sel] > np.finfo(float).tiny):
        raise DegenerateDataError("Q1 + Q2 vanishes on the fit window; use the twin-run check instead")
    slope = np.polyfit(t[sel], np.log(Q[sel]), 1)[0]
    rate = np.gradient(Q, t, edge_order=2) / (2 * Q)
    return GronwallRates(float(slope / 2), float(np.max(rate[sel])), (float(lo), float(hi)))


def gronwall_fit(report: DiagnosticsReport, window=(0.1, 1.0)) -> float:
    return gronwall_rates(report, window).C


def gronwall_excess(report: DiagnosticsReport, C: float) -> float:
    """``max_t Q(t) / (Q(0) exp(2 C t))``; at most ``1`` when the bound holds exactly."""
    t = np.asarray(report.times, dtype=float)
    Q = report.Q
    return float(np.max(Q / (Q[0] * np.exp(2 * C * t))))


def compare_runs(traj1, traj2, c_hessian: float, constants: sphere.GeometryConstants = sphere.UNIT_SPHERE,
                 n_quad: int = 16, sign=None) -> DiagnosticsReport:
    """Q series, Q1-rate columns and Gronwall constant for two trajectories sampled alike.

    If the runs leave the closeness radius the series are truncated at the
    last valid sample and ``metadata["escape"]`` records where and when.
    """
    grid = traj1.grid
    check_same_grid(grid, traj2.grid)
    if len(traj1.times) != len(traj2.times) or not np.allclose(traj1.times, traj2.times):
        raise ValueError("trajectories are not sampled at the same times")
    rep = DiagnosticsReport(metadata={"grid": grid.to_dict()})
    snaps = []
    for t, a, b in zip(traj1.times, traj1.snapshots, traj2.snapshots):
        A = MapField(grid, a, renormalize=False)
        B = MapField(grid, b, renormalize=False)
        try:
            H = build_homotopy(A, B, 3, constants)
        except ClosenessError as exc:
            rep.metadata["escape"] = {"t": t, "node": list(exc.node), "distance": exc.dist,
                                      "delta0": exc.delta0}
            break
        rep.times.append(t)
        rep.Q1.append(q1(A, B))
        rep.Q2.append(q2(H))
        snaps.append((a, b))

    n = len(rep.times)
    consistency = []
    for i in range(n):
        a, b = snaps[i]
        c_q1 = c_hessian * gradient_bound_factor(a, b, grid)
        rep.bound.append(rep.Q2[i] + c_q1 * rep.Q1[i])
        if 0 < i < n - 1 and math.isclose(rep.times[i + 1] - rep.times[i], rep.times[i] - rep.times[i - 1],
                                          rel_tol=1e-9):
            lhs = (rep.Q1[i + 1] - rep.Q1[i - 1]) / (rep.times[i + 1] - rep.times[i - 1])
            rhs = integrate_scalar(hessian_rate_integrand(a, b, grid, n_quad, sign), grid)
            consistency.append(abs(lhs - rhs))
        else:
            lhs = rhs = float("nan")
        rep.dQ1_lhs.append(lhs)
        rep.dQ1_rhs.append(rhs)

    tol = max(consistency, default=0.0)
    slack = np.asarray(rep.bound_slack())
    rep.residuals["q1_rate_consistency"] = tol
    rep.violations["q1_inequality"] = int(np.sum(slack[np.isfinite(slack)] < -0.5 * tol))
    rep.constants["c_hessian"] = c_hessian

    Q = rep.Q
    if n and np.all(Q == 0):
        rep.metadata["gronwall"] = "not applicable: Q1 = Q2 = 0 at every sampled time"
    else:
        try:
            rates = gronwall_rates(rep)
        except DegenerateDataError as exc:
            rep.metadata["gronwall"] = f"not applicable: {exc}"
        else:
            rep.gronwall_C = rates.C
            rep.constants.update(gronwall_lsq=rates.lsq, gronwall_envelope=rates.envelope,
                                 gronwall_window=list(rates.window))
            rep.residuals["gronwall_excess"] = gronwall_excess(rep, rates.C)
            t = np.asarray(rep.times)
            dQ = np.gradient(Q, t, edge_order=2)
            sel = t >= rates.window[0] - 1e-12
            rep.residuals["gronwall_pointwise_max"] = float(np.max(0.5 * dQ[sel] - rates.C * Q[sel]))
    return rep
