"""Built-in verification checks, grouped into suites.

Every check returns a :class:`Check` carrying the measured value, the bound
it is compared against and the verdict.  ``sign`` is forwarded to every
curvature evaluation; ``sign=-1`` flips the convention and is meant to make
the curvature-sensitive checks fail.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from . import diagnostics as D
from . import flow, initial, lemmas, sphere
from .fields import Grid, MapField, TangentField, covariant_gradient


@dataclass(frozen=True)
class Check:
    name: str
    suite: str
    value: float
    bound: float
    relation: str
    passed: bool

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return f"{self.suite:<11} {self.name:<34} {self.value:>12.5g} {self.relation} {self.bound:<10.4g} {verdict}"

    def to_dict(self) -> dict:
        return asdict(self)


def _check(name, suite, value, bound, relation):
    value = float(value)
    ok = {
        "<=": value <= bound,
        ">=": value >= bound,
        "==": value == bound,
    }[relation]
    return Check(name, suite, value, float(bound), relation, bool(ok and math.isfinite(value)))


def observed_order(errors, ratio: float = 2.0) -> float:
    """Order from the last two entries of an error sequence under refinement by ``ratio``."""
    a, b = errors[-2], errors[-1]
    if b == 0:
        return math.inf
    return math.log(a / b) / math.log(ratio)


# ---------------------------------------------------------------------------
# suites

def distance_checks(seed=0, sign=None):
    c1 = lemmas.fit_pseudo_distance_constant(seed, 10_000)
    c2 = lemmas.fit_pseudo_distance_constant(seed + 1, 20_000)
    rng = np.random.default_rng([seed, 31])
    p = sphere.random_points(rng, 1000)
    X1, X2 = sphere.random_tangents(rng, p), sphere.random_tangents(rng, p)
    gap = np.max(np.abs(sphere.pseudo_dist_jacobi(p, X1, p, X2) - sphere.norm(X1 - X2)))
    return [
        _check("pseudo_distance_C_stability", "distance", abs(c2 / c1 - 1), 0.10, "<="),
        _check("pseudo_distance_coincident_gap", "distance", gap, 0.0, "=="),
    ]


def _d2(p, q):
    return sphere.distance(p, q) ** 2


def hessian_checks(seed=0, sign=None):
    rng = np.random.default_rng([seed, 32])
    s = lemmas.sample_pairs(rng, 200)
    g = sphere.grad_d2(s.p, s.q, s.X1, s.X2)
    errs = []
    for tau in (1e-2, 5e-3, 2.5e-3):
        fd = (_d2(sphere.exp_map(s.p, tau * s.X1), sphere.exp_map(s.q, tau * s.X2))
              - _d2(sphere.exp_map(s.p, -tau * s.X1), sphere.exp_map(s.q, -tau * s.X2))) / (2 * tau)
        errs.append(np.max(np.abs(fd - 2 * g)))

    # mixed second difference of d^2 along geodesic variations in X and Y
    tau = 1e-3
    h = sphere.hessian_d2(s.p, s.q, s.X1, s.X2, s.Y1, s.Y2, sign=sign)

    def f(a, b):
        return _d2(sphere.exp_map(s.p, a * s.X1 + b * s.Y1), sphere.exp_map(s.q, a * s.X2 + b * s.Y2))

    fd2 = (f(tau, tau) - f(tau, -tau) - f(-tau, tau) + f(-tau, -tau)) / (4 * tau * tau)
    herr = np.max(np.abs(0.5 * fd2 - h))

    C = lemmas.fit_hessian_constant(seed, sign=sign)
    bad = lemmas.hessian_bound_violations(C, seed + 1, sign=sign)
    return [
        _check("grad_d2_fd_order", "hessian", observed_order(errs), 1.9, ">="),
        _check("hessian_d2_fd_error", "hessian", herr, 1e-4, "<="),
        _check("hessian_bound_violations", "hessian", bad, 0, "=="),
    ]


def jacobi_checks(seed=0, sign=None):
    rng = np.random.default_rng([seed, 33])
    n = 100
    p = sphere.random_points(rng, n)
    L = rng.uniform(0.05, 2.5, n)
    e = sphere.point(sphere.project(p, rng.standard_normal((n, 3))))
    g = sphere.geodesic(p, sphere.exp_map(p, L[:, None] * e))
    X1 = sphere.random_tangents(rng, g.start)
    X2 = sphere.random_tangents(rng, g.end)
    s = np.linspace(0.0, 1.0, 33)
    W, _ = sphere.jacobi_eval(g, X1, X2, s)
    worst = 0.0
    for i in range(n):
        gi = sphere.geodesic(g.start[i], g.end[i])
        Ws = sphere.jacobi_shooting(gi, X1[i], X2[i], s, sign=sign)
        worst = max(worst, float(np.max(np.abs(Ws - W[:, i]))))
    field = sphere.jacobi_bvp(g, X1, X2, 129)
    res = sphere.jacobi_residual(field, sign)

    grid = Grid.uniform(1, 64)
    ratio = 0.0
    for u1 in (initial.winding(grid), initial.magnon(grid), initial.smooth_random(grid, seed)):
        for eps in (1e-3, 0.1, 0.24):
            H = D.build_homotopy(u1, initial.perturb(u1, eps, seed))
            ratio = max(ratio, D.jacobi_estimate_check(H).first_order_ratio)
    return [
        _check("jacobi_closed_form_vs_shooting", "jacobi", worst, 1e-8, "<="),
        _check("jacobi_equation_residual", "jacobi", res, 1e-6, "<="),
        _check("jacobi_first_order_ratio", "jacobi", ratio, 1.2, "<="),
    ]


def octant_holonomy(sign=None) -> tuple:
    """Signed rotation of a vector carried around the octant triangle, and the predicted ``K * area``."""
    ex, ey, ez = np.eye(3)
    X = ey.copy()
    for a, b in ((ey, ex), (ez, ey), (ex, ez)):
        X = sphere.parallel_transport(a, b, X)
    angle = math.atan2(sphere.inner(ex, np.cross(ey, X)), sphere.inner(ey, X))
    K = sphere.estimate_curvature_bound(np.random.default_rng(34), 64, sign)
    return angle, K * math.pi / 2


def holonomy_checks(seed=0, sign=None):
    angle, predicted = octant_holonomy(sign)
    return [_check("octant_holonomy_error", "holonomy", abs(angle - predicted), 1e-12, "<=")]


def _magnon_residual(n, sign):
    grid = Grid.uniform(1, n)
    cfg = flow.IntegratorConfig.for_grid(grid)
    stride = 4
    traj = flow.evolve(initial.magnon(grid), 2 * stride * cfg.dt, cfg, stride=stride)
    return flow.derivative_flow_residual(traj, traj.times[1], sign)


def flow_checks(seed=0, sign=None):
    errs = [_magnon_residual(n, sign) for n in (32, 64, 128)]
    grid = Grid.uniform(2, 16)
    cfg = flow.IntegratorConfig.for_grid(grid)
    traj = flow.evolve(initial.constant(grid), 2 * cfg.dt, cfg)
    const = flow.derivative_flow_residual(traj, traj.times[1], sign)
    return [
        _check("derivative_flow_residual_order", "flow", observed_order(errs), 1.9, ">="),
        _check("derivative_flow_residual_constant", "flow", const, 0.0, "=="),
    ]


def _winding_pair(n, eps, seed, s_samples=9):
    grid = Grid.uniform(1, n)
    u1 = initial.winding(grid)
    return D.build_homotopy(u1, initial.perturb(u1, eps, seed), s_samples)


def connection_mismatch(H, sign=None) -> float:
    """Largest gap between the curvature-integral ``B`` and the measured connection difference."""
    cd = D.connection_difference(H, sign)
    quad = np.einsum("k...ab,c...b->kc...a", cd.matrices, D.coordinate_sections(H))
    return float(np.max(np.abs(D.connection_difference_direct(H) - quad)))


def connection_checks(seed=0, sign=None):
    K = sphere.estimate_curvature_bound(np.random.default_rng([seed, 35]), 256, sign)
    bad = 0
    skew = 0.0
    for u1 in (initial.winding(Grid.uniform(1, 64)), initial.smooth_random(Grid.uniform(2, 16), seed)):
        for eps in (1e-3, 0.1, 0.24):
            cd = D.connection_difference(D.build_homotopy(u1, initial.perturb(u1, eps, seed)), sign)
            bad += cd.bound_violations(K)
            skew = max(skew, cd.skew_defect())

    mism = [connection_mismatch(_winding_pair(n, 1e-3, seed), sign) for n in (32, 64, 128)]

    epss = np.array([1e-2, 1e-3, 1e-4])
    norms = [np.max(D.connection_difference(_winding_pair(128, e, seed), sign).operator_norm()) for e in epss]
    slope = np.polyfit(np.log(epss), np.log(norms), 1)[0]

    vals = [np.max(D.connection_difference(_winding_pair(64, 0.2, seed, S), sign).operator_norm())
            for S in (3, 5, 9, 17)]
    simpson = observed_order(np.abs(np.diff(vals)))
    return [
        _check("connection_bound_violations", "connection", bad, 0, "=="),
        _check("connection_skew_defect", "connection", skew, 1e-12, "<="),
        _check("connection_vs_measured_order", "connection", observed_order(mism), 1.9, ">="),
        _check("connection_eps_order_deviation", "connection", abs(slope - 1.0), 0.1, "<="),
        _check("connection_simpson_order", "connection", simpson, 3.5, ">="),
    ]


def laplacian_gap(n, eps=1e-3, seed=0, sign=None) -> float:
    H = _winding_pair(n, eps, seed)
    direct, via = D.laplacian_difference(H, covariant_gradient(H.map2()), sign)
    return D.l2_norm(TangentField(H.grid, H.u1, direct.components - via.components))


def laplacian_checks(seed=0, sign=None):
    errs = [laplacian_gap(n, 1e-3, seed, sign) for n in (32, 64, 128)]
    return [_check("laplacian_dual_order", "laplacian", observed_order(errs), 0.9, ">=")]


SUITES = {
    "distance": distance_checks,
    "hessian": hessian_checks,
    "jacobi": jacobi_checks,
    "holonomy": holonomy_checks,
    "flow": flow_checks,
    "connection": connection_checks,
    "laplacian": laplacian_checks,
}


def run_checks(suite: str | None = None, seed: int = 0, sign=None) -> list:
    if suite is not None and suite not in SUITES:
        raise KeyError(f"unknown suite {suite!r}; choose from {sorted(SUITES)}")
    names = [suite] if suite else list(SUITES)
    out = []
    for name in names:
        out.extend(SUITES[name](seed, sign))
    return out
