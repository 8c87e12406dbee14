"""Sampled constants for the pseudo-distance and distance-Hessian estimates.

Both estimates have the shape ``|lhs| <= main term + C * d * (...)``.  The
largest ratios sit on the thin set where ``P X2`` is close to ``X1``, which
uniform sampling almost never visits, so the samplers mix three kinds of
pairs in equal parts: exact transports, transports perturbed by at most
``d^2 |X1|``, and independent vectors.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import sphere

HEADROOM = 1.1


@dataclass(frozen=True)
class PairSample:
    p: np.ndarray
    q: np.ndarray
    d: np.ndarray
    X1: np.ndarray
    X2: np.ndarray
    Y1: np.ndarray
    Y2: np.ndarray


def _disk(rng, p):
    """Uniform samples in the unit disk of each tangent plane."""
    v = sphere.project(p, rng.standard_normal(p.shape))
    r = np.sqrt(rng.uniform(0.0, 1.0, p.shape[:-1]))
    return v * (r / sphere.norm(v))[..., None]


def _pair(rng, p, q, d, kind):
    X1 = _disk(rng, p)
    eta = _disk(rng, p) * (d ** 2)[:, None] * (kind == 1)[:, None]
    near = sphere.parallel_transport(q, p, X1 + eta)
    return X1, np.where((kind < 2)[:, None], near, _disk(rng, q))


def sample_pairs(rng, n: int, dmax: float = 0.25) -> PairSample:
    """``n`` base pairs with ``d(p, q) ~ U(0, dmax)`` and two tangent pairs on each."""
    p = sphere.random_points(rng, n)
    d = rng.uniform(0.0, dmax, n)
    e = sphere.point(sphere.project(p, rng.standard_normal((n, 3))))
    q = sphere.exp_map(p, d[:, None] * e)
    kind = np.arange(n) % 3
    X1, X2 = _pair(rng, p, q, d, kind)
    Y1, Y2 = _pair(rng, p, q, d, rng.permutation(kind))
    return PairSample(p, q, sphere.distance(p, q), X1, X2, Y1, Y2)


def _ratio(num, den):
    out = np.zeros(np.shape(num))
    np.divide(num, den, out=out, where=den > 0)
    return out


def pseudo_distance_ratios(s: PairSample, n_quad: int = 16) -> np.ndarray:
    """``|d0 - d_J| / ((|X1| + |X2|) d)`` per sample."""
    d0 = sphere.pseudo_dist_transport(s.p, s.X1, s.q, s.X2)
    dj = sphere.pseudo_dist_jacobi(s.p, s.X1, s.q, s.X2, n_quad)
    return _ratio(np.abs(d0 - dj), (sphere.norm(s.X1) + sphere.norm(s.X2)) * s.d)


def hessian_excess_ratios(s: PairSample, n_quad: int = 16, sign=None) -> np.ndarray:
    """``(|Hess| - |P X2 - X1| |P Y2 - Y1|) / (d^2 (|X1|+|X2|)(|Y1|+|Y2|))`` per sample."""
    h = sphere.hessian_d2(s.p, s.q, s.X1, s.X2, s.Y1, s.Y2, n_quad, sign)
    main = (sphere.pseudo_dist_transport(s.p, s.X1, s.q, s.X2)
            * sphere.pseudo_dist_transport(s.p, s.Y1, s.q, s.Y2))
    den = s.d ** 2 * (sphere.norm(s.X1) + sphere.norm(s.X2)) * (sphere.norm(s.Y1) + sphere.norm(s.Y2))
    return _ratio(np.abs(h) - main, den)


def fit_pseudo_distance_constant(seed: int = 0, n: int = 10_000) -> float:
    return float(np.max(pseudo_distance_ratios(sample_pairs(np.random.default_rng([seed, 21]), n))))


def fit_hessian_constant(seed: int = 0, n: int = 10_000, sign=None) -> float:
    """Sampled sup of the Hessian excess ratio times :data:`HEADROOM`."""
    s = sample_pairs(np.random.default_rng([seed, 22]), n)
    return HEADROOM * float(np.max(hessian_excess_ratios(s, sign=sign)))


def hessian_bound_violations(C: float, seed: int = 1, n: int = 10_000, sign=None) -> int:
    """Count of fresh samples exceeding the Hessian bound with constant ``C``."""
    s = sample_pairs(np.random.default_rng([seed, 23]), n)
    return int(np.sum(hessian_excess_ratios(s, sign=sign) > C))
