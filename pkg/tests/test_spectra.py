import numpy as np
import pytest
from hypothesis import given, strategies as st

from cisim.errors import NotConvergedError
from cisim.grid import inner, make_grid
from cisim.model import ModelParams
from cisim.operators import build
from cisim.spectra import (
    correlation_diagram,
    degeneracy_groups,
    lowest_eigenpairs,
    parity_character,
    sweep_grid,
)


@pytest.fixture(scope="module")
def coarse():
    p = ModelParams.from_gamma(0.1)
    return p, make_grid(p, 33, 33)


@pytest.mark.parametrize("kind", ["BO", "GP", "FULL", "DONOR"])
def test_matches_dense_diagonalization(coarse, kind):
    p, g = coarse
    H = build(kind, p, g)
    res = lowest_eigenpairs(H, 6)
    dense = np.linalg.eigvalsh(H.sparse.toarray())[:6]
    np.testing.assert_allclose(res.eigenvalues, dense, atol=1e-9)


@pytest.mark.parametrize("kind", ["BO", "GP", "FULL"])
def test_eigenpairs_are_orthonormal(coarse, kind):
    p, g = coarse
    res = lowest_eigenpairs(build(kind, p, g), 6)
    gram = np.array([[inner(a, b) for b in res.eigenfields] for a in res.eigenfields])
    np.testing.assert_allclose(gram, np.eye(6), atol=1e-9)
    assert np.all(np.diff(res.eigenvalues) >= 0)


def test_exact_doublets_at_zero_bias(coarse):
    p, g = coarse
    for kind in ("GP", "FULL"):
        res = lowest_eigenpairs(build(kind, p, g), 6)
        assert [len(gr) for gr in res.degeneracy_groups] == [2, 2, 2]
        assert res.eigenvalues[1] - res.eigenvalues[0] < 1e-9
    bo = lowest_eigenpairs(build("BO", p, g), 6)
    assert bo.eigenvalues[1] - bo.eigenvalues[0] > 1e-3


def test_bias_lifts_doublets():
    p = ModelParams.from_gamma(0.1, delta=0.3)
    g = make_grid(p, 33, 33)
    res = lowest_eigenpairs(build("GP", p, g), 4)
    assert res.eigenvalues[1] - res.eigenvalues[0] > 1e-3


def test_deterministic(coarse):
    p, g = coarse
    a = lowest_eigenpairs(build("GP", p, g), 4, seed=3)
    b = lowest_eigenpairs(build("GP", p, g), 4, seed=3)
    np.testing.assert_array_equal(a.eigenvalues, b.eigenvalues)
    np.testing.assert_array_equal(a.vectors(), b.vectors())


def test_unreachable_tolerance(coarse):
    p, g = coarse
    with pytest.raises(NotConvergedError) as info:
        lowest_eigenpairs(build("BO", p, g), 4, tol=1e-30)
    assert info.value.residuals is not None


def test_window_must_be_small(coarse):
    p, g = coarse
    with pytest.raises(ValueError):
        lowest_eigenpairs(build("BO", p, g), 10**6)


@given(st.lists(st.floats(0, 10), min_size=1, max_size=20), st.floats(1e-8, 0.5))
def test_degeneracy_groups_partition(values, tol):
    vals = np.sort(values)
    groups = degeneracy_groups(vals, tol)
    assert [i for gr in groups for i in gr] == list(range(len(vals)))
    for gr in groups:
        assert np.all(np.diff(vals[gr]) < tol)
    for left, right in zip(groups, groups[1:]):
        assert vals[right[0]] - vals[left[-1]] >= tol


def test_parity_of_bo_levels(coarse):
    p, g = coarse
    res = lowest_eigenpairs(build("BO", p, g), 4)
    pars = [parity_character(f, "BO") for f in res.eigenfields]
    np.testing.assert_allclose(np.abs(pars), 1.0, atol=1e-9)
    assert pars[0] == pytest.approx(1.0)


def test_parity_of_split_gp_levels():
    p = ModelParams.from_gamma(0.1, delta=0.3)
    g = make_grid(p, 33, 33)
    res = lowest_eigenpairs(build("GP", p, g), 4)
    pars = [parity_character(f, "GP", p) for f in res.eigenfields]
    np.testing.assert_allclose(np.abs(pars), 1.0, atol=1e-8)


def test_sweep_grid_avoids_every_ci():
    p = ModelParams.from_gamma(0.1)
    deltas = np.linspace(0, 2, 11)
    g = sweep_grid(p, deltas, 33, 33)
    for d in deltas:
        cx, cy = g.clearance(p.replace(delta=d).b, 0.0)
        assert min(cx, cy) > 1e-8


def test_correlation_diagram_small():
    p = ModelParams.from_gamma(0.3)
    deltas = np.linspace(0.1, 1.5, 8)
    g = sweep_grid(p, deltas, 33, 33)
    diag = correlation_diagram("GP", p, deltas, g, m=6)
    assert diag.energies.shape == (8, 6)
    assert np.all(np.diff(diag.energies, axis=1) >= -1e-12)
    for row in diag.tracked:
        assert sorted(row) == list(range(6))
    picks = diag.selected(1, "symmetry")
    assert np.all(picks >= 0)
    d_min, gap = diag.min_gap(1)
    assert deltas[0] <= d_min <= deltas[-1] and gap > 0
    assert len(list(diag.to_rows())) > 0
    with pytest.raises(ValueError):
        correlation_diagram("GP", p, deltas[::-1], g, m=6)
