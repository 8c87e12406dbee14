"""Initial-condition families and seeded perturbation directions."""
from __future__ import annotations

import numpy as np

from . import sphere
from .fields import Grid, MapField


def _wavenumber(grid: Grid, k: int, axis: int = 0) -> float:
    return 2 * np.pi * k / grid.length[axis]


def constant(grid: Grid, direction=(0.0, 0.0, 1.0)) -> MapField:
    vals = np.broadcast_to(sphere.point(direction), grid.shape + (3,))
    return MapField(grid, vals.copy())


def winding(grid: Grid, k: int = 1) -> MapField:
    """Equator map ``x -> (cos kx, sin kx, 0)`` along the first axis (harmonic)."""
    phase = _wavenumber(grid, k) * grid.coords()[0]
    vals = np.stack([np.cos(phase), np.sin(phase), np.zeros_like(phase)], axis=-1)
    return MapField(grid, vals)


def magnon_frequency(grid: Grid, k: int, theta0: float) -> float:
    return _wavenumber(grid, k) ** 2 * np.cos(theta0)


def magnon(grid: Grid, k: int = 1, theta0: float = np.pi / 3, t: float = 0.0) -> MapField:
    """Exact precessing spiral ``(sin a cos(kx - wt), sin a sin(kx - wt), cos a)``, ``w = k^2 cos a``."""
    phase = _wavenumber(grid, k) * grid.coords()[0] - magnon_frequency(grid, k, theta0) * t
    st, ct = np.sin(theta0), np.cos(theta0)
    vals = np.stack([st * np.cos(phase), st * np.sin(phase), ct * np.ones_like(phase)], axis=-1)
    return MapField(grid, vals)


def band_limited(grid: Grid, rng, modes: int = 3) -> np.ndarray:
    """Random smooth ambient 3-vector field with Fourier modes ``|k_i| <= modes``.

    The coefficients depend only on ``rng`` and ``modes``, not on the grid
    resolution, so refined grids sample the same continuous field.
    """
    x = grid.coords()
    out = np.zeros(grid.shape + (3,))
    ks = [np.arange(-modes, modes + 1)] * grid.dim
    for kvec in np.stack(np.meshgrid(*ks, indexing="ij"), -1).reshape(-1, grid.dim):
        amp = 1.0 / (1.0 + float(np.sum(kvec ** 2)))
        a, b = rng.standard_normal(3), rng.standard_normal(3)
        phase = sum(_wavenumber(grid, int(kk), ax) * x[ax] for ax, kk in enumerate(kvec))
        out += amp * (np.cos(phase)[..., None] * a + np.sin(phase)[..., None] * b)
    return out / np.sqrt(len(ks[0]) ** grid.dim)


def smooth_random(grid: Grid, seed: int, amplitude: float = 0.5, base: MapField | None = None) -> MapField:
    """``exp_base(amplitude * band-limited tangent noise)``; base defaults to the north pole."""
    base = constant(grid) if base is None else base
    noise = band_limited(grid, np.random.default_rng([seed, 7]))
    return MapField(grid, sphere.exp_map(base.values, amplitude * sphere.project(base.values, noise)))


def perturbation_direction(u: MapField, seed: int, min_ratio: float = 0.1, tries: int = 32) -> np.ndarray:
    """Pointwise unit, band-limited tangent field along ``u`` derived from ``seed``.

    Draws ``A + noise/2`` with ``A`` a random unit vector, projects onto the
    tangent planes of ``u`` and normalizes.  Draws whose projection comes
    within ``min_ratio`` (relative to its rms) of zero are rejected and the
    next sub-seed is tried.
    """
    for attempt in range(tries):
        rng = np.random.default_rng([seed, 11, attempt])
        a = sphere.point(rng.standard_normal(3)) + 0.5 * band_limited(u.grid, rng)
        v = sphere.project(u.values, a)
        r = sphere.norm(v)
        if r.min() >= min_ratio * np.sqrt(np.mean(r ** 2)):
            return v / r[..., None]
    raise ValueError(f"no non-vanishing perturbation direction found for seed {seed}")


def perturb(u: MapField, eps: float, seed: int) -> MapField:
    """``exp_u(eps V)``: every node moves by exactly ``eps`` along a geodesic."""
    V = perturbation_direction(u, seed)
    return MapField(u.grid, sphere.exp_map(u.values, eps * V))


FAMILIES = {
    "constant": lambda grid, p: constant(grid),
    "winding": lambda grid, p: winding(grid, int(p.get("k", 1))),
    "magnon": lambda grid, p: magnon(grid, int(p.get("k", 1)), float(p.get("theta0", np.pi / 3))),
    "random": lambda grid, p: smooth_random(grid, int(p.get("seed", 0)), float(p.get("amplitude", 0.5))),
}


def make(name: str, grid: Grid, params: dict | None = None) -> MapField:
    if name not in FAMILIES:
        raise KeyError(f"unknown initial condition {name!r}; choose from {sorted(FAMILIES)}")
    return FAMILIES[name](grid, params or {})
