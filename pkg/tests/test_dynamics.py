import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.sparse.linalg import expm_multiply
from scipy.special import eval_chebyt

from cisim.dynamics import (
    chebyshev_terms,
    default_times,
    donor_boltzmann,
    embed,
    propagate,
    propagate_iter,
    spectral_bounds,
    transfer_trace,
)
from cisim.errors import TolUnreachableError
from cisim.grid import inner, make_grid, norm
from cisim.localization import localization_P, make_projector
from cisim.model import ModelParams
from cisim.operators import build
from cisim.spectra import lowest_eigenpairs


@pytest.fixture(scope="module")
def setup():
    p = ModelParams.from_gamma(0.1)
    g = make_grid(p, 41, 41)
    return p, g


@given(st.floats(0.1, 200.0), st.floats(-1, 1))
def test_chebyshev_series_is_the_exponential(z, x):
    coef = chebyshev_terms(z, 1e-13)
    series = sum(c * eval_chebyt(k, x) for k, c in enumerate(coef))
    assert abs(series - np.exp(-1j * z * x)) < 1e-11


def test_chebyshev_tol_floor():
    with pytest.raises(TolUnreachableError):
        chebyshev_terms(10.0, 1e-3, max_terms=5)


@pytest.mark.parametrize("kind", ["BO", "GP", "FULL"])
def test_spectral_bounds_contain_spectrum(setup, kind):
    p, g = setup
    H = build(kind, p, g)
    lo, hi = spectral_bounds(H)
    ev = np.linalg.eigvalsh(H.sparse.toarray())
    assert ev[0] >= lo and ev[-1] <= hi


@pytest.mark.parametrize("kind", ["BO", "GP"])
def test_matches_expm_multiply(setup, kind):
    p, g = setup
    H = build(kind, p, g)
    rng = np.random.default_rng(0)
    v0 = rng.standard_normal(H.dim) + 1j * rng.standard_normal(H.dim)
    v0 /= np.linalg.norm(v0)
    t = [0.0, 0.7, 3.0]
    out = [v for _, v in propagate_iter(H, v0, t, 1e-13)]
    for ti, v in zip(t, out):
        ref = expm_multiply(-1j * ti * H.sparse, v0)
        assert np.linalg.norm(v - ref) < 1e-9


def test_eigenstate_is_stationary(setup):
    p, g = setup
    H = build("GP", p, g)
    res = lowest_eigenpairs(H, 3)
    psi = res.eigenfields[2]
    times = np.linspace(0, 50, 6)
    for t, f in zip(times, propagate(H, psi, times)):
        ov = inner(psi, f)
        assert abs(abs(ov) - 1.0) < 1e-9
        assert ov == pytest.approx(np.exp(-1j * res.eigenvalues[2] * t), abs=1e-8)


def test_time_reversal(setup):
    p, g = setup
    H = build("GP", p, g)
    member = donor_boltzmann(p, g, 0.0).members[0]
    fwd = propagate(H, member, [0.0, 25.0])[-1]
    back = propagate(H, fwd, [25.0, 0.0])[-1]
    assert norm(back - member) < 2e-12 * 4


def test_time_grid_must_be_monotone(setup):
    p, g = setup
    H = build("BO", p, g)
    with pytest.raises(ValueError):
        list(propagate_iter(H, np.ones(H.dim), [0.0, 2.0, 1.0]))


def test_norm_drift_over_default_span(setup):
    p, g = setup
    tr = transfer_trace("FULL", p, g, 0.0, default_times(100.0, 101))
    assert tr.norm_drift < 1e-9
    assert tr.energy_drift < 1e-8
    assert np.all((tr.P_values >= 0) & (tr.P_values <= 1))


def test_rabi_frequency_of_two_level_superposition(setup):
    p, g = setup
    H = build("BO", p, g)
    res = lowest_eigenpairs(H, 2)
    e1, e2 = res.eigenvalues
    f0 = (res.eigenfields[0] + res.eigenfields[1]) * (1 / math.sqrt(2))
    mask = make_projector(p, g)
    period = 2 * math.pi / (e2 - e1)
    times = np.linspace(0, period, 41)
    P = np.array([localization_P(f, mask) for f in propagate(H, f0, times)])
    # full swing and back within one period
    assert abs(P[0] - P[-1]) < 1e-8
    assert abs(P[20] - (1 - P[0])) < 1e-6
    assert P[0] > 0.9 or P[0] < 0.1


def test_zero_temperature_ensemble(setup):
    p, g = setup
    ens = donor_boltzmann(p, g, 0.0)
    assert len(ens) == 1 and ens.weights[0] == 1.0
    tr0 = transfer_trace("BO", p, g, 0.0, [0.0, 5.0, 10.0])
    tr1 = transfer_trace("BO", p, g, 0.0, [0.0, 5.0, 10.0], ensemble=ens)
    np.testing.assert_array_equal(tr0.P_values, tr1.P_values)


def test_boltzmann_weights(setup):
    p, g = setup
    ens = donor_boltzmann(p, g, 1.0)
    e = ens.energies
    assert ens.weights.sum() == pytest.approx(1.0)
    for k in (1, 2):
        assert ens.weights[0] / ens.weights[k] == pytest.approx(math.exp(e[k] - e[0]), rel=1e-12)
    assert np.all(np.diff(e) >= -1e-12)
    # kept weight covers 1 - eps of the analytic partition function
    z = 1.0 / (1.0 - math.exp(-1.0)) ** 2
    assert np.exp(-(e - e[0])).sum() >= (1 - 1e-4) * z * (1 - 1e-3)


def test_donor_ground_energy_default_grid():
    p = ModelParams.from_gamma(0.1, delta=0.6)
    g = make_grid(p, 193, 193)
    ens = donor_boltzmann(p, g, 0.0)
    assert ens.energies[0] == pytest.approx(0.5 * (p.omega1 + p.omega2) + 0.5 * p.delta, abs=1e-5)
    # at T = omega the ground / first-excited Boltzmann ratio is e
    e = lowest_eigenpairs(build("DONOR", p, g), 3).eigenvalues
    assert math.exp(e[1] - e[0]) == pytest.approx(math.e, rel=1e-5)
    assert e[2] - e[1] < 1e-6


def test_negative_temperature(setup):
    p, g = setup
    with pytest.raises(ValueError):
        donor_boltzmann(p, g, -1.0)


def test_embedding(setup):
    p, g = setup
    member = donor_boltzmann(p, g, 0.0).members[0]
    full = embed(member, "FULL")
    assert full.is_spinor
    assert np.all(full.values[1] == 0)
    assert norm(full) == pytest.approx(norm(member))
    assert embed(member, "BO") is member
    assert embed(member, "GP") is member
    dressed = embed(member, "GP", dress=True, params=p)
    assert norm(dressed) == pytest.approx(norm(member))
    with pytest.raises(ValueError):
        embed(member, "GP", dress=True)
    with pytest.raises(ValueError):
        embed(full, "BO")


def test_trace_is_deterministic(setup):
    p, g = setup
    t = np.linspace(0, 10, 5)
    a = transfer_trace("GP", p, g, 0.3, t)
    b = transfer_trace("GP", p, g, 0.3, t)
    np.testing.assert_array_equal(a.P_values, b.P_values)
    assert len(a.weights) > 1
    rows = list(a.to_rows())
    assert rows[0][0] == 0.0 and len(rows) == 5


def test_first_crossing():
    from cisim.dynamics import TransferTrace

    tr = TransferTrace("BO", np.array([0.0, 1.0, 2.0]), np.array([1.0, 0.6, 0.2]), 0.0,
                       np.ones(1), 0.0, 0.0)
    assert tr.first_crossing(0.5) == pytest.approx(1.25)
    assert tr.first_crossing(0.1) == math.inf
