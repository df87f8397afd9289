import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cisim.errors import GridMismatchError, InvalidGridError
from cisim.grid import (
    Field,
    GridSpec,
    inner,
    laplacian_apply,
    make_grid,
    norm,
    normalized,
    read_field_binary,
    read_field_csv,
    scalar_field,
    second_derivative_matrix,
    spinor_field,
    write_field_binary,
    write_field_csv,
)
from cisim.model import ModelParams, w_minus

from .conftest import random_values


@given(st.floats(-3, 3), st.integers(33, 120), st.integers(33, 120))
def test_ci_never_on_grid_lines(delta, nx, ny):
    p = ModelParams(delta=delta)
    g = make_grid(p, nx, ny)
    cx, cy = g.clearance(p.b, 0.0)
    assert cx > 1e-8 and cy > 1e-8
    assert g.nx in (nx, nx + 1) and g.ny in (ny, ny + 1)


def test_default_grid_gets_one_extra_point():
    g = make_grid(ModelParams(), 193, 193)
    assert g.shape == (194, 194)
    assert g.ci_offset_applied
    np.testing.assert_allclose(g.y, -g.y[::-1], atol=1e-14)
    cx, cy = g.clearance(0.0, 0.0)
    assert cx == pytest.approx(0.5) and cy == pytest.approx(0.5)


def test_walls_are_high_enough():
    p = ModelParams.from_gamma(0.3, delta=1.0)
    g = make_grid(p, 64, 64, energy_cap=20.0)
    X, Y = g.mesh()
    w = w_minus(p, X, Y)
    edge = np.concatenate([w[0], w[-1], w[:, 0], w[:, -1]])
    assert edge.min() - w.min() >= 20.0 - 1.0


def test_explicit_extents_kept():
    g = make_grid(ModelParams(), 50, 60, extents=(-7, 7, -6, 6))
    assert (g.x_min, g.x_max, g.y_min, g.y_max) == (-7, 7, -6, 6)


def test_invalid_grids():
    with pytest.raises(InvalidGridError):
        GridSpec(10, 50, -1, 1, -1, 1)
    with pytest.raises(InvalidGridError):
        GridSpec(50, 50, 1, -1, -1, 1)
    with pytest.raises(InvalidGridError):
        make_grid(ModelParams(), 0, 40)


def test_field_is_read_only(small_grid, rng):
    f = Field(small_grid, random_values(rng, small_grid))
    with pytest.raises(ValueError):
        f.values[0, 0, 0] = 1.0
    with pytest.raises(GridMismatchError):
        Field(small_grid, np.zeros((3, *small_grid.shape)))
    with pytest.raises(GridMismatchError):
        scalar_field(small_grid, np.zeros((5, 5)))


@given(st.integers(0, 10**6))
def test_inner_product_axioms(small_grid, seed):
    rng = np.random.default_rng(seed)
    f = Field(small_grid, random_values(rng, small_grid))
    g = Field(small_grid, random_values(rng, small_grid))
    a = complex(*rng.standard_normal(2))
    assert inner(f, g) == pytest.approx(np.conj(inner(g, f)))
    assert inner(f, g * a) == pytest.approx(a * inner(f, g))
    assert inner(f, f).real == pytest.approx(norm(f) ** 2)
    assert norm(normalized(f)) == pytest.approx(1.0)


def test_inner_is_riemann_sum(small_grid):
    X, Y = small_grid.mesh()
    f = scalar_field(small_grid, np.exp(-(X**2 + Y**2) / 2))
    assert inner(f, f).real == pytest.approx(math.pi, rel=1e-10)


def test_spinor_mismatch(small_grid, rng):
    f = spinor_field(small_grid, *random_values(rng, small_grid, 2))
    g = Field(small_grid, random_values(rng, small_grid))
    assert f.is_spinor and not g.is_spinor
    with pytest.raises(GridMismatchError):
        inner(f, g)


def _gaussian_laplacian_error(n, order):
    g = GridSpec(n, n, -8, 8, -8, 8)
    X, Y = g.mesh()
    f = np.exp(-(X**2 + Y**2) / 2)
    exact = (X**2 + Y**2 - 2) * f
    got = laplacian_apply(scalar_field(g, f), order).values[0].real
    return np.abs(got - exact).max()


@pytest.mark.parametrize("order,expected", [(2, 4.0), (4, 16.0)])
def test_laplacian_convergence_order(order, expected):
    ratio = _gaussian_laplacian_error(81, order) / _gaussian_laplacian_error(161, order)
    assert ratio == pytest.approx(expected, rel=0.1)


def test_sparse_matrix_matches_stencil(small_grid, rng):
    f = Field(small_grid, random_values(rng, small_grid))
    lap = laplacian_apply(f, 4).values[0]
    g = small_grid
    dxx = second_derivative_matrix(g.nx, g.hx, 4)
    dyy = second_derivative_matrix(g.ny, g.hy, 4)
    v = f.values[0]
    np.testing.assert_allclose(dxx @ v + (dyy @ v.T).T, lap, atol=1e-10)


def test_bad_stencil_order():
    with pytest.raises(ValueError):
        second_derivative_matrix(10, 0.1, order=6)


@given(st.integers(0, 10**6), st.sampled_from([1, 2]))
def test_csv_roundtrip(tmp_path_factory, seed, ncomp):
    g = GridSpec(33, 35, -2, 3, -1, 1.5)
    f = Field(g, random_values(np.random.default_rng(seed), g, ncomp))
    path = tmp_path_factory.mktemp("csv") / "f.csv"
    write_field_csv(path, f)
    back = read_field_csv(path)
    assert back.grid == g
    np.testing.assert_array_equal(back.values, f.values)


def test_csv_layout_is_x_fastest(tmp_path):
    g = GridSpec(33, 34, 0, 1, 0, 1)
    X, Y = g.mesh()
    write_field_csv(tmp_path / "f.csv", scalar_field(g, X + 10 * Y))
    data = np.loadtxt(tmp_path / "f.csv", delimiter=",", skiprows=2)
    assert list(data[:3, 0]) == [0, 1, 2] and list(data[:3, 1]) == [0, 0, 0]
    np.testing.assert_allclose(data[:, 4], data[:, 2] + 10 * data[:, 3])


@given(st.integers(0, 10**6))
def test_binary_roundtrip(tmp_path_factory, seed):
    g = GridSpec(33, 40, -1, 1, -2, 2, ci_offset_applied=True)
    f = Field(g, random_values(np.random.default_rng(seed), g, 2))
    path = tmp_path_factory.mktemp("bin") / "f.bin"
    write_field_binary(path, f)
    back = read_field_binary(path)
    assert back.grid == g
    np.testing.assert_array_equal(back.values, f.values)
