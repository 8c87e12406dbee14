import math

import numpy as np
import pytest

from smflow import initial, sphere
from smflow.errors import GridMismatchError
from smflow.fields import (
    Grid,
    MapField,
    TangentField,
    check_same_grid,
    checksum,
    covariant_derivative,
    covariant_gradient,
    covariant_laplacian,
    dirichlet_energy,
    discrete_hamiltonian,
    load_binary,
    load_csv,
    save_binary,
    save_csv,
    tension,
    total_spin,
)


def test_grid_validation_and_geometry():
    g = Grid.uniform(2, 16, 4.0)
    assert g.shape == (16, 16)
    assert g.spacing == (0.25, 0.25)
    assert g.cell_volume == 0.0625
    assert Grid((32,)).length == (2 * math.pi,)
    with pytest.raises(ValueError):
        Grid((4,))
    with pytest.raises(ValueError):
        Grid((8, 8, 8))
    with pytest.raises(GridMismatchError):
        check_same_grid(Grid((16,)), Grid((32,)))


def test_map_and_tangent_fields_normalize():
    g = Grid((8,))
    u = MapField(g, np.tile([0.0, 0.0, 2.0], (8, 1)))
    assert np.allclose(u.values, [0, 0, 1])
    F = TangentField(g, u.values, np.tile([1.0, 0.0, 5.0], (1, 8, 1)))
    assert np.allclose(F.components[..., 2], 0)
    with pytest.raises(ValueError):
        MapField(g, np.zeros((9, 3)))


def test_winding_stencils_against_closed_forms():
    n = 32
    g = Grid((n,))
    h = g.spacing[0]
    u = initial.winding(g)
    x = g.coords()[0]
    grad = covariant_gradient(u).components[0]
    expect = (math.sin(h) / h) * np.stack([-np.sin(x), np.cos(x), 0 * x], -1)
    assert np.allclose(grad, expect, atol=1e-14)
    assert np.max(np.abs(tension(u))) < 1e-12
    assert dirichlet_energy(u) == pytest.approx(math.pi * (math.sin(h) / h) ** 2, rel=1e-13)
    assert discrete_hamiltonian(u) == pytest.approx(math.pi * (2 * math.sin(h / 2) / h) ** 2, rel=1e-13)


def test_covariant_derivative_of_parallel_section_vanishes():
    g = Grid((32,))
    u = initial.winding(g)
    # e_z is parallel along the equator
    F = np.tile([0.0, 0.0, 1.0], (32, 1))
    assert np.max(np.abs(covariant_derivative(F, u.values, g, 0))) < 1e-14


def test_covariant_laplacian_converges_on_magnon():
    # exact value: nabla_x nabla_x u_x = Pi(d/dx Pi(u_xx)) with Pi = I - u u^T
    errs = []
    for n in (32, 64, 128):
        g = Grid((n,))
        u = initial.magnon(g)
        phi = covariant_gradient(u)
        lap = covariant_laplacian(phi).components[0]
        x = g.coords()[0]
        st = math.sin(math.pi / 3)
        ux = st * np.stack([-np.sin(x), np.cos(x), 0 * x], -1)
        uxx = st * np.stack([-np.cos(x), -np.sin(x), 0 * x], -1)
        uxxx = -ux
        v = u.values
        d_pi_uxx = uxxx - (np.sum(ux * uxx, -1)[:, None] * v + np.sum(v * uxx, -1)[:, None] * ux)
        exact = sphere.project(v, d_pi_uxx)
        errs.append(np.max(np.abs(lap - exact)))
    assert math.log2(errs[-2] / errs[-1]) > 1.9


def test_spin_of_magnon():
    g = Grid((64,))
    u = initial.magnon(g, theta0=math.pi / 3)
    assert np.allclose(total_spin(u), [0, 0, 2 * math.pi * 0.5], atol=1e-13)


def test_serialization_is_bit_exact(tmp_path):
    g = Grid((8, 10))
    u = initial.smooth_random(g, seed=5)
    save_csv(u, tmp_path / "u.csv")
    save_binary(u, tmp_path / "u.bin")
    for v in (load_csv(tmp_path / "u.csv", g), load_binary(tmp_path / "u.bin", g)):
        assert np.array_equal(v.values, u.values)
        assert checksum(v.values) == checksum(u.values)
    assert (tmp_path / "u.bin").stat().st_size == 8 * 10 * 3 * 8
