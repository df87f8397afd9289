import numpy as np
import pytest
from hypothesis import given, strategies as st

from cisim.errors import CIOnGridError, GridMismatchError
from cisim.grid import Field, GridSpec, inner, make_grid, scalar_field
from cisim.model import ModelParams, theta
from cisim.operators import Kind, build, expectation, hermiticity_residual, link_phase

from .conftest import random_values

KINDS = list(Kind)


@pytest.fixture(scope="module")
def grid():
    return make_grid(ModelParams.from_gamma(0.3, delta=0.4), 41, 45)


def _random_field(H, rng):
    return Field(H.grid, random_values(rng, H.grid, H.ncomp))


@pytest.mark.parametrize("kind", KINDS)
@given(seed=st.integers(0, 10**6))
def test_hermitian(grid, kind, seed):
    p = ModelParams.from_gamma(0.3, delta=0.4)
    H = build(kind, p, grid)
    rng = np.random.default_rng(seed)
    assert hermiticity_residual(H, _random_field(H, rng), _random_field(H, rng)) < 1e-12


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("order", [2, 4])
def test_stencil_matches_sparse(grid, kind, order, rng):
    H = build(kind, ModelParams.from_gamma(0.3, delta=0.4), grid, order=order)
    f = _random_field(H, rng)
    dense = H.apply(f).flat()
    np.testing.assert_allclose(H.matvec(f.flat()), dense, atol=1e-10)
    assert abs(H.sparse - H.sparse.conj().T).max() < 1e-14


def test_sparse_dtype(grid):
    p = ModelParams.from_gamma(0.3, delta=0.4)
    assert build("BO", p, grid).sparse.dtype == np.float64
    assert build("GP", p, grid).sparse.dtype == np.complex128
    assert build("FULL", p, grid).dim == 2 * grid.size


def test_link_phase_removes_branch_jump():
    a = np.array([np.pi / 2 - 0.01])
    b = np.array([-np.pi / 2 + 0.01])
    assert link_phase(a, b) == pytest.approx(0.02)
    assert link_phase(b, a) == pytest.approx(-0.02)


def test_gauge_covariance_away_from_cut():
    # on fields supported right of the CI (away from the cut) the GP operator
    # is the BO operator conjugated by the single-valued phase exp(-i theta)
    p = ModelParams.from_gamma(0.2, delta=0.5)
    g = make_grid(p, 61, 61)
    X, Y = g.mesh()
    env = np.exp(-((X - 2.5) ** 2 + Y**2)) * (X > p.b + 1.0)
    phase = np.exp(-1j * theta(p, X, Y))
    gp = build("GP", p, g)
    bo = build("BO", p, g)
    lhs = gp.apply(scalar_field(g, phase * env)).values[0]
    rhs = phase * bo.apply(scalar_field(g, env)).values[0]
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_theta_offset_is_a_gauge(grid, rng):
    p = ModelParams.from_gamma(0.3, delta=0.4)
    H0 = build("GP", p, grid)
    H1 = build("GP", p, grid, theta_offset=0.37)
    f = _random_field(H0, rng)
    np.testing.assert_allclose(H0.apply(f).values, H1.apply(f).values, atol=1e-12)


def test_ci_on_grid_rejected():
    p = ModelParams()
    g = GridSpec(41, 41, -8, 8, -8, 8)  # odd counts put a node on x = 0, y = 0
    with pytest.raises(CIOnGridError):
        build("GP", p, g)
    build("BO", p, g)  # the plain surface does not care


def test_shape_mismatch(grid, rng):
    H = build("FULL", ModelParams(delta=0.4), grid)
    with pytest.raises(GridMismatchError):
        H.apply(Field(grid, random_values(rng, grid, 1)))


@pytest.mark.parametrize("kind", KINDS)
def test_expectation_is_real(grid, kind, rng):
    H = build(kind, ModelParams.from_gamma(0.3, delta=0.4), grid)
    f = _random_field(H, rng)
    e = expectation(H, f)
    assert np.isfinite(e)
    assert e == pytest.approx((inner(f, H.apply(f)) / inner(f, f)).real)


def test_uncoupled_full_is_donor_plus_acceptor(grid, rng):
    p = ModelParams(c=0.0, delta=0.4)
    full = build("FULL", p, grid)
    donor = build("DONOR", p, grid)
    acc = build("ACCEPTOR", p, grid)
    vals = random_values(rng, grid, 2)
    out = full.apply(Field(grid, vals)).values
    np.testing.assert_allclose(out[0], donor.apply(Field(grid, vals[:1])).values[0], atol=1e-12)
    np.testing.assert_allclose(out[1], acc.apply(Field(grid, vals[1:])).values[0], atol=1e-12)


def test_potential_floor(grid):
    p = ModelParams.from_gamma(0.3, delta=0.4)
    for kind in KINDS:
        H = build(kind, p, grid)
        diag = H.sparse.diagonal().real
        assert H.potential_floor() <= diag.min()
