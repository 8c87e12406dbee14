"""Time integration of the Schroedinger map flow ``u_t = J(u) tau(u) = u x Lap_h u``."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import sphere
from .errors import CflError, ConvergenceError, InsufficientHistoryError
from .fields import (
    Grid,
    MapField,
    TangentField,
    ambient_laplacian,
    checksum,
    covariant_gradient,
    covariant_laplacian,
    dirichlet_energy,
    integrate_scalar,
    save_binary,
    tension,
    total_spin,
)

SCHEMES = ("rk4_project", "implicit_midpoint")


@dataclass(frozen=True)
class IntegratorConfig:
    """Time step, scheme and stability guard.

    ``rk4_project`` requires ``dt <= cfl_guard * h_min^2``; the guard is
    checked against a concrete grid by :meth:`check` (called by :func:`step`).
    """

    dt: float
    scheme: str = "rk4_project"
    cfl_guard: float = 0.25
    max_iter: int = 50
    tol: float = 1e-12

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; choose from {SCHEMES}")

    @classmethod
    def for_grid(cls, grid: Grid, dt: float | None = None, scheme: str = "rk4_project") -> "IntegratorConfig":
        """Default ``dt = h_min^2 / 8``; raises :class:`CflError` if ``dt`` is too large."""
        h = min(grid.spacing)
        cfg = cls(h * h / 8 if dt is None else dt, scheme)
        cfg.check(grid)
        return cfg

    def check(self, grid: Grid) -> None:
        if self.scheme == "rk4_project":
            limit = self.cfl_guard * min(grid.spacing) ** 2
            if self.dt > limit * (1 + 1e-12):
                raise CflError(f"dt={self.dt:.6g} exceeds CFL guard {limit:.6g} (cfl_guard*h^2)")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class FlowState:
    time: float
    u: MapField


def _rhs_values(v, grid):
    return np.cross(v, ambient_laplacian(v, grid))


def rhs(u: MapField) -> np.ndarray:
    """``u x Lap_h u``; equals ``J(u) tau(u)`` because the cross product kills the normal part."""
    return _rhs_values(u.values, u.grid)


def _rk4_project(v, grid, dt):
    k1 = _rhs_values(v, grid)
    k2 = _rhs_values(v + 0.5 * dt * k1, grid)
    k3 = _rhs_values(v + 0.5 * dt * k2, grid)
    k4 = _rhs_values(v + dt * k3, grid)
    w = v + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return sphere.point(w)


def _implicit_midpoint(v, grid, dt, tol, max_iter):
    w = v + dt * _rhs_values(v, grid)
    for _ in range(max_iter):
        w_new = v + dt * _rhs_values(0.5 * (v + w), grid)
        delta = np.max(np.abs(w_new - w))
        w = w_new
        if delta <= tol:
            return w
    raise ConvergenceError(f"implicit midpoint did not converge in {max_iter} iterations (last update {delta:.3g})")


def _advance(v, grid, dt, cfg):
    if cfg.scheme == "rk4_project":
        return _rk4_project(v, grid, dt)
    return _implicit_midpoint(v, grid, dt, cfg.tol, cfg.max_iter)


def step(s: FlowState, cfg: IntegratorConfig, backward: bool = False) -> FlowState:
    """Advance by ``cfg.dt`` (or go back by it when ``backward``)."""
    grid = s.u.grid
    cfg.check(grid)
    dt = -cfg.dt if backward else cfg.dt
    v = _advance(s.u.values, grid, dt, cfg)
    return FlowState(s.time + dt, MapField(grid, v, renormalize=False))


def conservation_observer(state: FlowState) -> dict:
    """Energy, worst pointwise ``||u| - 1|`` and total spin."""
    u = state.u
    spin = total_spin(u)
    return {
        "t": state.time,
        "energy": dirichlet_energy(u),
        "norm_drift": float(np.max(np.abs(sphere.norm(u.values) - 1.0))),
        "spin_x": spin[0],
        "spin_y": spin[1],
        "spin_z": spin[2],
    }


@dataclass
class Trajectory:
    """Snapshots of an evolution plus observer records, sampled every ``stride`` steps."""

    grid: Grid
    cfg: IntegratorConfig
    dt: float
    stride: int
    times: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    records: list = field(default_factory=list)

    @property
    def final(self) -> FlowState:
        return FlowState(self.times[-1], MapField(self.grid, self.snapshots[-1], renormalize=False))

    def state(self, i: int) -> FlowState:
        return FlowState(self.times[i], MapField(self.grid, self.snapshots[i], renormalize=False))

    def index_of(self, t: float) -> int:
        return int(np.argmin(np.abs(np.asarray(self.times) - t)))

    def centered(self, t: float):
        """Indices ``(i-1, i, i+1)`` of equally spaced snapshots around ``t``."""
        i = self.index_of(t)
        if i < 1 or i > len(self.times) - 2:
            raise InsufficientHistoryError(f"no stored snapshots on both sides of t={t}")
        a, b, c = self.times[i - 1: i + 2]
        if not math.isclose(b - a, c - b, rel_tol=1e-9):
            raise InsufficientHistoryError(f"snapshots around t={t} are not equally spaced")
        return i - 1, i, i + 1

    def save(self, outdir, fmt: str = "binary") -> Path:
        """Write snapshots plus a JSON manifest (grid, cfg, times, checksums)."""
        from .fields import save_csv

        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        files = []
        for i, vals in enumerate(self.snapshots):
            name = f"snapshot_{i:05d}." + ("bin" if fmt == "binary" else "csv")
            u = MapField(self.grid, vals, renormalize=False)
            (save_binary if fmt == "binary" else save_csv)(u, outdir / name)
            files.append(name)
        manifest = {
            "grid": self.grid.to_dict(),
            "cfg": self.cfg.to_dict(),
            "dt_effective": self.dt,
            "stride": self.stride,
            "format": {"binary": "raw float64 little-endian, C order, shape grid.n + [3]",
                       "csv": "ix[,iy],ux,uy,uz; 17 significant digits"}[fmt],
            "times": list(self.times),
            "files": files,
            "checksums": [checksum(v) for v in self.snapshots],
        }
        path = outdir / "manifest.json"
        path.write_text(json.dumps(manifest, indent=2))
        return path

    def write_observer_csv(self, path) -> None:
        cols = ["t", "energy", "norm_drift", "spin_x", "spin_y", "spin_z"]
        with open(path, "w") as fh:
            fh.write(",".join(cols) + "\n")
            for rec in self.records:
                fh.write(",".join(f"{rec[c]:.17g}" for c in cols) + "\n")


def evolve(u0: MapField, T: float, cfg: IntegratorConfig, observers=(), stride: int = 1,
           keep_snapshots: bool = True) -> Trajectory:
    """Evolve ``u0`` to time ``T``.

    The step count is ``ceil(T / cfg.dt)`` and the step actually taken is
    ``T / n_steps`` (never larger than ``cfg.dt``), so ``T`` is hit exactly.
    Snapshots and observers are sampled every ``stride`` steps and at ``T``.
    """
    if T < 0:
        raise ValueError("T must be non-negative")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    cfg.check(u0.grid)
    n_steps = max(1, math.ceil(T / cfg.dt - 1e-9)) if T > 0 else 0
    dt = T / n_steps if n_steps else cfg.dt
    traj = Trajectory(u0.grid, cfg, dt, stride)

    def record(i, v):
        t = i * dt
        traj.times.append(t)
        if keep_snapshots:
            traj.snapshots.append(v)
        if observers:
            state = FlowState(t, MapField(u0.grid, v, renormalize=False))
            rec = {}
            for obs in observers:
                rec.update(obs(state))
            traj.records.append(rec)

    v = u0.values
    record(0, v)
    for i in range(1, n_steps + 1):
        v = _advance(v, u0.grid, dt, cfg)
        if i % stride == 0 or i == n_steps:
            record(i, v)
    if not keep_snapshots:
        traj.snapshots.append(v)
    return traj


def derivative_flow_residual(traj: Trajectory, t: float, sign=None) -> float:
    """L2 norm of ``nabla_t phi_i - J(Lap_x phi_i + R(phi_i, phi_k) phi_k)``, ``phi_i = nabla_i u``.

    The domain is flat, so the Ricci term is absent.  The time derivative is
    a centered difference of snapshots transported to the middle time and
    projected to its tangent planes.
    """
    a, b, c = traj.centered(t)
    grid = traj.grid
    dt = traj.times[c] - traj.times[b]
    u = traj.snapshots[b]
    phi = covariant_gradient(MapField(grid, u, renormalize=False)).components
    phi_prev = covariant_gradient(MapField(grid, traj.snapshots[a], renormalize=False)).components
    phi_next = covariant_gradient(MapField(grid, traj.snapshots[c], renormalize=False)).components
    fwd = sphere.parallel_transport(u, traj.snapshots[c], phi_next)
    bwd = sphere.parallel_transport(u, traj.snapshots[a], phi_prev)
    dphi_t = sphere.project(u, (fwd - bwd) / (2 * dt))

    lap = covariant_laplacian(TangentField(grid, u, phi)).components
    curv = np.zeros_like(phi)
    for i in range(grid.dim):
        for k in range(grid.dim):
            curv[i] += sphere.curvature(u, phi[i], phi[k], phi[k], sign)
    res = dphi_t - sphere.complex_structure(u, lap + curv)
    return math.sqrt(integrate_scalar(np.sum(res ** 2, axis=(0, -1)), grid))


__all__ = [
    "IntegratorConfig",
    "FlowState",
    "Trajectory",
    "rhs",
    "step",
    "evolve",
    "conservation_observer",
    "derivative_flow_residual",
    "tension",
]
