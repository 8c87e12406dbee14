"""Discrete maps from flat tori into S^2 and covariant finite differences.

A map on an ``n_1 x ... x n_m`` periodic grid is stored as an array of shape
``(n_1, ..., n_m, 3)``.  Sections of ``u*TS^2 (x) T*M`` (one tangent vector per
node and per spatial direction) carry the direction index first:
``(m, n_1, ..., n_m, 3)``.

All stencils are second-order central differences with periodic wrap-around.
Covariant derivatives are tangent projections of central differences of
neighbours that have first been parallel transported to the centre node.
"""
from __future__ import annotations

import csv
import hashlib
from dataclasses import InitVar, dataclass, field
from pathlib import Path

import numpy as np

from . import sphere
from .errors import GridMismatchError

MIN_NODES = 8


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on the flat torus ``R^m / (L_1 Z x ... x L_m Z)``."""

    n: tuple
    length: tuple = None

    def __post_init__(self):
        n = tuple(int(k) for k in np.atleast_1d(self.n))
        if len(n) not in (1, 2):
            raise ValueError("only 1D and 2D tori are supported")
        if any(k < MIN_NODES for k in n):
            raise ValueError(f"need at least {MIN_NODES} nodes per axis, got {n}")
        length = self.length
        if length is None:
            length = (2 * np.pi,) * len(n)
        length = tuple(float(v) for v in np.broadcast_to(np.atleast_1d(length), (len(n),)))
        if any(v <= 0 for v in length):
            raise ValueError("period must be positive")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "length", length)

    @classmethod
    def uniform(cls, dim: int, n: int, length: float = 2 * np.pi) -> "Grid":
        return cls((n,) * dim, (length,) * dim)

    @property
    def dim(self) -> int:
        return len(self.n)

    @property
    def shape(self) -> tuple:
        return self.n

    @property
    def spacing(self) -> tuple:
        return tuple(L / k for L, k in zip(self.length, self.n))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def coords(self) -> list:
        """Node coordinates, one array of grid shape per axis (``ij`` indexing)."""
        axes = [np.arange(k) * h for k, h in zip(self.n, self.spacing)]
        return list(np.meshgrid(*axes, indexing="ij"))

    def to_dict(self) -> dict:
        return {"dim": self.dim, "n": list(self.n), "length": list(self.length)}


@dataclass(frozen=True)
class MapField:
    """A discrete map ``u: T^m -> S^2``.

    Values are renormalized on construction unless ``renormalize=False``
    (used when reloading snapshots that must stay bit-exact).
    """

    grid: Grid
    values: np.ndarray = field(repr=False)
    renormalize: InitVar[bool] = True

    def __post_init__(self, renormalize):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.shape + (3,):
            raise ValueError(f"values have shape {v.shape}, expected {self.grid.shape + (3,)}")
        object.__setattr__(self, "values", sphere.point(v) if renormalize else v)


@dataclass(frozen=True)
class TangentField:
    """A section of ``u*TS^2 (x) T*M``: ``components[i]`` is the i-th direction.

    Components are projected onto the tangent planes unless ``project=False``
    (for data that is tangent by construction and must stay bit-exact).
    """

    grid: Grid
    base: np.ndarray = field(repr=False)
    components: np.ndarray = field(repr=False)
    project: InitVar[bool] = True

    def __post_init__(self, project):
        c = np.asarray(self.components, dtype=float)
        if c.shape[1:] != self.grid.shape + (3,):
            raise ValueError(f"components have shape {c.shape}")
        object.__setattr__(self, "components", sphere.project(self.base, c) if project else c)

    def norm2(self) -> np.ndarray:
        """Pointwise ``sum_i |F_i|^2``."""
        return np.sum(self.components ** 2, axis=(0, -1))


def check_same_grid(*grids):
    first = grids[0]
    for g in grids[1:]:
        if g != first:
            raise GridMismatchError(f"grids differ: {first} vs {g}")


def shift(a, axis: int, k: int) -> np.ndarray:
    """Value at node ``x + k e_axis`` (periodic); the spatial axes lead ``a``."""
    return np.roll(a, -k, axis=axis)


def _central(a, grid: Grid, axis: int):
    return (shift(a, axis, 1) - shift(a, axis, -1)) / (2 * grid.spacing[axis])


def ambient_laplacian(values, grid: Grid) -> np.ndarray:
    """Componentwise 3-point (1D) or 5-point (2D) periodic Laplacian."""
    out = np.zeros_like(values)
    for k, h in enumerate(grid.spacing):
        out += (shift(values, k, 1) - 2 * values + shift(values, k, -1)) / h ** 2
    return out


def covariant_gradient(u: MapField) -> TangentField:
    v = u.values
    comps = np.stack([sphere.project(v, _central(v, u.grid, k)) for k in range(u.grid.dim)])
    return TangentField(u.grid, v, comps)


def tension(u: MapField) -> np.ndarray:
    """Tension field ``Pi_{T_u}(Lap_h u)``, one tangent vector per node."""
    return sphere.project(u.values, ambient_laplacian(u.values, u.grid))


def covariant_derivative(F, base, grid: Grid, axis: int) -> np.ndarray:
    """``nabla_axis F`` for a section ``F`` (grid shape + (3,)) of ``base*TS^2``."""
    h = grid.spacing[axis]
    fwd = sphere.parallel_transport(base, shift(base, axis, 1), shift(F, axis, 1))
    bwd = sphere.parallel_transport(base, shift(base, axis, -1), shift(F, axis, -1))
    return sphere.project(base, (fwd - bwd) / (2 * h))


def covariant_laplacian(F: TangentField) -> TangentField:
    """``sum_k nabla_k nabla_k`` applied to each direction component of ``F``."""
    out = np.zeros_like(F.components)
    for i in range(F.components.shape[0]):
        for k in range(F.grid.dim):
            first = covariant_derivative(F.components[i], F.base, F.grid, k)
            out[i] += covariant_derivative(first, F.base, F.grid, k)
    return TangentField(F.grid, F.base, out)


def integrate_scalar(f, grid: Grid) -> float:
    """Periodic Riemann (trapezoid) sum ``sum f h^m``."""
    return float(np.sum(f) * grid.cell_volume)


def dirichlet_energy(u: MapField) -> float:
    return 0.5 * integrate_scalar(covariant_gradient(u).norm2(), u.grid)


def discrete_hamiltonian(u: MapField) -> float:
    """``1/2 sum |D^+ u|^2 h^m`` with forward differences.

    This is the quantity the semi-discrete flow ``u_t = u x Lap_h u``
    conserves exactly; :func:`dirichlet_energy` agrees with it to O(h^2).
    """
    tot = 0.0
    for k, h in enumerate(u.grid.spacing):
        tot += np.sum((shift(u.values, k, 1) - u.values) ** 2) / h ** 2
    return 0.5 * tot * u.grid.cell_volume


def total_spin(u: MapField) -> np.ndarray:
    return np.sum(u.values.reshape(-1, 3), axis=0) * u.grid.cell_volume


# ---------------------------------------------------------------------------
# serialization

def checksum(values) -> str:
    return hashlib.sha256(np.ascontiguousarray(values, dtype="<f8").tobytes()).hexdigest()


def save_csv(u: MapField, path) -> None:
    """Write ``ix[, iy], ux, uy, uz`` rows with 17 significant digits."""
    idx_names = ["ix", "iy"][: u.grid.dim]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(idx_names + ["ux", "uy", "uz"])
        for idx in np.ndindex(*u.grid.shape):
            w.writerow(list(idx) + [f"{c:.17g}" for c in u.values[idx]])


def load_csv(path, grid: Grid) -> MapField:
    vals = np.empty(grid.shape + (3,))
    with open(path, newline="") as fh:
        rows = csv.reader(fh)
        next(rows)
        for row in rows:
            idx = tuple(int(v) for v in row[: grid.dim])
            vals[idx] = [float(v) for v in row[grid.dim:]]
    return MapField(grid, vals, renormalize=False)


def save_binary(u: MapField, path) -> None:
    """Raw little-endian float64, C order, shape ``grid.shape + (3,)``."""
    Path(path).write_bytes(np.ascontiguousarray(u.values, dtype="<f8").tobytes())


def load_binary(path, grid: Grid) -> MapField:
    vals = np.frombuffer(Path(path).read_bytes(), dtype="<f8").reshape(grid.shape + (3,)).copy()
    return MapField(grid, vals, renormalize=False)
