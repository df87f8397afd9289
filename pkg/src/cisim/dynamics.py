"""Donor Boltzmann ensembles and Chebyshev propagation of the donor population P(t)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as sla
from scipy.special import jv

from .errors import SpectralRangeError, TolUnreachableError
from .grid import Field, GridSpec, inner
from .localization import RegionMask, make_projector
from .model import ModelParams
from .operators import HamiltonianOperator, Kind, build
from .spectra import lowest_eigenpairs

__all__ = [
    "ThermalEnsemble",
    "TransferTrace",
    "donor_boltzmann",
    "embed",
    "spectral_bounds",
    "chebyshev_terms",
    "propagate",
    "propagate_iter",
    "transfer_trace",
    "default_times",
]


@dataclass
class ThermalEnsemble:
    temperature: float
    weights: np.ndarray
    members: list[Field] = field(repr=False)
    energies: np.ndarray = field(default_factory=lambda: np.empty(0))
    truncation_eps: float = 1e-4

    def __len__(self):
        return len(self.weights)


def donor_boltzmann(
    p: ModelParams,
    g: GridSpec,
    T: float,
    eps: float = 1e-4,
    *,
    order: int = 4,
    seed: int = 0,
    degeneracy_tol: float = 1e-6,
    max_members: int = 400,
) -> ThermalEnsemble:
    """Boltzmann mixture of donor-Hamiltonian eigenstates at temperature ``T`` (k_B = 1).

    Levels are kept in energy order until the cumulative weight reaches
    ``1 - eps``, always finishing a degenerate group so that the mixture does
    not depend on the arbitrary basis inside the group; weights are then
    renormalized. ``T = 0`` gives the ground state alone.
    """
    if T < 0:
        raise ValueError("temperature must be non-negative")
    H = build(Kind.DONOR, p, g, order=order)
    if T == 0:
        res = lowest_eigenpairs(H, 1, seed=seed, degeneracy_tol=degeneracy_tol)
        return ThermalEnsemble(0.0, np.ones(1), [res.eigenfields[0]], res.eigenvalues[:1], eps)

    # analytic oscillator ladder sizes the numerical solve
    e_cut = -T * math.log(eps) + 2.0 * max(p.omega1, p.omega2)
    n1 = int(e_cut / p.omega1) + 2
    n2 = int(e_cut / p.omega2) + 2
    ladder = np.sort(
        [i * p.omega1 + j * p.omega2 for i in range(n1) for j in range(n2)]
    )
    m = int(np.searchsorted(ladder, e_cut, side="right")) + 2
    while True:
        m = min(m, max_members + 2)
        res = lowest_eigenpairs(H, m, seed=seed, degeneracy_tol=degeneracy_tol)
        e = res.eigenvalues
        boltz = np.exp(-(e - e[0]) / T)
        # analytic partition function of the oscillator, relative to its ground level
        z = 1.0 / ((1.0 - math.exp(-p.omega1 / T)) * (1.0 - math.exp(-p.omega2 / T)))
        keep = None
        cum = 0.0
        for group in res.degeneracy_groups:
            if group[-1] == m - 1:
                break  # incomplete group at the window edge
            cum += boltz[group].sum()
            if cum >= (1.0 - eps) * z:
                keep = group[-1] + 1
                break
        if keep is not None:
            break
        if m >= max_members + 2:
            raise ValueError(f"more than {max_members} donor levels needed at T={T}")
        m = int(m * 1.5) + 2
    w = boltz[:keep] / boltz[:keep].sum()
    return ThermalEnsemble(float(T), w, res.eigenfields[:keep], e[:keep], eps)


def embed(member: Field, kind, *, dress: bool = False, params: ModelParams | None = None) -> Field:
    """Place a donor eigenfield on the state space of ``kind``.

    FULL gets the spinor ``(phi, 0)``; BO and GP get the field itself. With
    ``dress=True`` the GP field is replaced by the single-valued image of
    the lower adiabatic component of ``(phi, 0)``, i.e.
    ``exp(-i theta) sin(theta) phi``, renormalized.
    """
    kind = Kind(kind)
    if member.is_spinor:
        raise ValueError("donor members are scalar fields")
    if kind is Kind.FULL:
        return Field(member.grid, np.stack([member.values[0], np.zeros_like(member.values[0])]))
    if kind is Kind.GP and dress:
        if params is None:
            raise ValueError("dressing needs the model parameters")
        X, Y = member.grid.mesh()
        phi = np.arctan2(params.gamma * Y, X - params.b)
        # exp(-i theta) sin(theta) written with phi = 2 theta; smooth across the cut
        factor = 0.5 * (np.sin(phi) - 1j * (1.0 - np.cos(phi)))
        f = Field(member.grid, member.values * factor)
        return f * (1.0 / math.sqrt(inner(f, f).real / inner(member, member).real))
    return member


def spectral_bounds(H: HamiltonianOperator, *, probe: bool = True, seed: int = 0) -> tuple[float, float]:
    """Interval guaranteed to contain the spectrum of ``H``.

    The upper end is the Gershgorin bound (tight for the finite-difference
    kinetic energy, whose top mode alternates in sign). The lower end is the
    potential floor, lowered for GP by the most negative value the covariant
    4th-order stencil can contribute. A short Lanczos probe checks the
    upper end.
    """
    A = H.sparse
    upper = float(abs(A).sum(axis=1).max())
    g = H.grid
    lower = H.potential_floor()
    if H.kind is Kind.GP and H.order == 4:
        lower -= 1.0 / (6 * g.hx**2) + 1.0 / (6 * g.hy**2)
    if probe:
        rng = np.random.default_rng(seed)
        v0 = rng.standard_normal(A.shape[0])
        try:
            top = sla.eigsh(A, k=1, which="LA", v0=v0, tol=1e-3, maxiter=300,
                            return_eigenvectors=False)[0]
        except sla.ArpackNoConvergence as exc:
            top = max(exc.eigenvalues.real) if len(exc.eigenvalues) else upper
        if top > upper * (1 + 1e-8):
            raise SpectralRangeError(f"Lanczos estimate {top} exceeds the Gershgorin bound {upper}")
    if not upper > lower:
        raise SpectralRangeError("degenerate spectral interval")
    return lower, upper


def chebyshev_terms(z: float, tol: float, max_terms: int = 10**6) -> np.ndarray:
    """Expansion coefficients ``(2 - δ_k0) (-i)^k J_k(z)`` truncated with tail below ``tol``."""
    n = int(z + 10 * z ** (1 / 3) + 40)
    while True:
        if n > max_terms:
            raise TolUnreachableError(f"more than {max_terms} Chebyshev terms for z={z}")
        k = np.arange(n)
        b = jv(k, z)
        coef = 2.0 * np.abs(b)
        coef[0] = abs(b[0])
        # |T_k(H~)| <= 1 on the spectrum, so the neglected tail bounds the error
        tail = np.cumsum(coef[::-1])[::-1]
        ok = np.flatnonzero(tail < tol)
        ok = ok[ok > z]
        if len(ok):
            K = int(ok[0])
            c = (2.0 * (-1j) ** k[:K]) * b[:K]
            c[0] = b[0]
            return c
        n *= 2


def _scaled(A, lower, upper):
    """``(A - mid) / half`` so the spectrum maps into [-1, 1]."""
    half = 0.5 * (upper - lower)
    mid = 0.5 * (upper + lower)
    return ((A - mid * sp.identity(A.shape[0], format="csr")) / half).tocsr(), mid, half


def _chebyshev_step(As, mid, half, v, dt, tol):
    coef = chebyshev_terms(half * abs(dt), tol)
    if dt < 0:
        coef = coef.conj()  # J_k is real, so going backwards conjugates (-i)^k
    t_prev = v
    out = coef[0] * v
    if len(coef) > 1:
        t_cur = As @ v
        out = out + coef[1] * t_cur
        for c in coef[2:]:
            t_next = As @ t_cur
            t_next *= 2.0
            t_next -= t_prev
            out += c * t_next
            t_prev, t_cur = t_cur, t_next
    return np.exp(-1j * mid * dt) * out


def propagate_iter(H: HamiltonianOperator, v0: np.ndarray, t_grid, tol: float = 1e-12, *,
                   bounds: tuple[float, float] | None = None, max_step_phase: float = 4000.0):
    """Yield ``(t, v(t))`` for ``v(t) = exp(-i H (t - t0)) v0`` on a monotone time grid.

    ``v0`` is a flat vector or a ``(dim, n)`` block of columns. Each interval
    between samples is covered by Chebyshev steps with certified truncation
    error below ``tol`` (relative to the norm of ``v0``).
    """
    t_grid = np.asarray(t_grid, dtype=float)
    steps = np.diff(t_grid)
    if np.any(steps < 0) and np.any(steps > 0):
        raise ValueError("time grid must be monotone")
    if tol < 1e-15:
        raise TolUnreachableError("tolerance below double precision rounding")
    lower, upper = bounds if bounds is not None else spectral_bounds(H)
    As, mid, half = _scaled(H.sparse, lower, upper)
    v = np.asarray(v0, dtype=complex)
    yield t_grid[0], v
    for t0, t1 in zip(t_grid[:-1], t_grid[1:]):
        dt = t1 - t0
        nsub = max(1, math.ceil(half * abs(dt) / max_step_phase))
        for _ in range(nsub):
            if dt != 0:
                v = _chebyshev_step(As, mid, half, v, dt / nsub, tol)
        yield t1, v


def propagate(H: HamiltonianOperator, f0: Field, t_grid, tol: float = 1e-12) -> list[Field]:
    """Trajectory of fields ``exp(-i H t) f0`` at every time of ``t_grid``."""
    if f0.grid != H.grid or f0.ncomp != H.ncomp:
        raise ValueError("initial field does not match the operator")
    shape = f0.values.shape
    return [Field(H.grid, v.reshape(shape)) for _, v in propagate_iter(H, f0.flat(), t_grid, tol)]


def default_times(t_max: float = 100.0, samples: int = 500) -> np.ndarray:
    return np.linspace(0.0, t_max, samples)


@dataclass
class TransferTrace:
    kind: Kind
    times: np.ndarray
    P_values: np.ndarray
    temperature: float
    weights: np.ndarray
    norm_drift: float
    energy_drift: float
    member_P: np.ndarray = field(repr=False, default=None)
    meta: dict = field(default_factory=dict)

    def first_crossing(self, level: float = 0.5) -> float:
        """Earliest time P(t) reaches ``level`` (linear interpolation); inf if never."""
        p = self.P_values
        below = np.flatnonzero(p <= level)
        if len(below) == 0:
            return math.inf
        i = below[0]
        if i == 0:
            return float(self.times[0])
        t0, t1 = self.times[i - 1], self.times[i]
        p0, p1 = p[i - 1], p[i]
        return float(t0 + (p0 - level) / (p0 - p1) * (t1 - t0))

    def to_rows(self):
        for t, v in zip(self.times, self.P_values):
            yield [float(t), float(v)]


def transfer_trace(
    kind,
    p: ModelParams,
    g: GridSpec,
    T: float,
    t_grid,
    *,
    ensemble: ThermalEnsemble | None = None,
    eps: float = 1e-4,
    tol: float = 1e-12,
    dress: bool = False,
    order: int = 4,
    seed: int = 0,
    mask: RegionMask | None = None,
) -> TransferTrace:
    """Donor population ``P(t) = sum_k w_k <psi_k(t)|P|psi_k(t)>`` for a donor Boltzmann start.

    All members are propagated together as a block; the weighted sum is
    taken in member order so results do not depend on threading.
    """
    kind = Kind(kind)
    if ensemble is None:
        ensemble = donor_boltzmann(p, g, T, eps, order=order, seed=seed)
    if mask is None:
        mask = make_projector(p, g)
    H = build(kind, p, g, order=order)
    A = H.sparse
    shape = (H.ncomp, *g.shape)
    block = np.column_stack([embed(f, kind, dress=dress, params=p).flat() for f in ensemble.members])
    area = g.cell_area
    norm0 = np.sum(np.abs(block) ** 2, axis=0) * area
    energy0 = np.real(np.sum(block.conj() * (A @ block), axis=0)) * area / norm0
    region = np.tile(mask.indicator.ravel(), H.ncomp)

    bounds = spectral_bounds(H, seed=seed)
    member_P = []
    norm_drift = 0.0
    energy_drift = 0.0
    for _, v in propagate_iter(H, block, t_grid, tol, bounds=bounds):
        dens = np.abs(v) ** 2
        norms = dens.sum(axis=0) * area
        member_P.append((region @ dens) * area / norms)
        norm_drift = max(norm_drift, float(np.max(np.abs(norms / norm0 - 1.0))))
        energy = np.real(np.sum(v.conj() * (A @ v), axis=0)) * area / norms
        energy_drift = max(energy_drift, float(np.max(np.abs(energy - energy0))))
    member_P = np.array(member_P)
    P = member_P @ ensemble.weights
    return TransferTrace(
        kind,
        np.asarray(t_grid, dtype=float),
        P,
        ensemble.temperature,
        ensemble.weights,
        norm_drift,
        energy_drift,
        member_P,
        meta={"members": len(ensemble), "dress": dress, "tol": tol, "bounds": bounds},
    )
