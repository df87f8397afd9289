"""Donor-well projector, localization measures, 1-P(Δ) curves and critical Δ values."""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import make_smoothing_spline
from scipy.optimize import minimize_scalar

from .errors import GroupTooLargeError, NoInflectionError
from .grid import Field, GridSpec
from .model import ModelParams, w_minus
from .operators import Kind
from .spectra import CorrelationDiagram, EigenSolveResult, correlation_diagram, sweep_grid

__all__ = [
    "RegionMask",
    "barrier_top",
    "make_projector",
    "localization_P",
    "subspace_localization",
    "DelocalizationCurve",
    "delocalization_curve",
    "CriticalPoint",
    "critical_deltas",
    "phase_diagram",
]


@dataclass(frozen=True)
class RegionMask:
    grid: GridSpec
    x_sep: float
    indicator: np.ndarray = field(repr=False)
    no_barrier: bool = False

    def complement(self) -> "RegionMask":
        return RegionMask(self.grid, self.x_sep, 1.0 - self.indicator, self.no_barrier)


def barrier_top(p: ModelParams) -> tuple[float, bool]:
    """Abscissa of the maximum of W-(x, 0) between the two wells.

    Returns ``(x_sep, no_barrier)``. When the donor side of the section has
    no minimum (very large delta) the CI abscissa is returned with
    ``no_barrier=True``.
    """
    def section(x):
        return float(w_minus(p, x, 0.0))

    lo, hi = -p.a, p.a
    b = p.b
    donor = minimize_scalar(section, bounds=(min(lo, b - 1.0), b), method="bounded", options={"xatol": 1e-12})
    acceptor = minimize_scalar(section, bounds=(b, max(hi, b + 1.0)), method="bounded", options={"xatol": 1e-12})
    span = 1e-6 * p.a
    if abs(donor.x - b) < span or abs(acceptor.x - b) < span:
        return b, True
    top = minimize_scalar(lambda x: -section(x), bounds=(donor.x, acceptor.x), method="bounded",
                          options={"xatol": 1e-12})
    return float(top.x), False


def make_projector(p: ModelParams, g: GridSpec) -> RegionMask:
    """Indicator of the donor region ``x < x_sep`` on the grid nodes."""
    x_sep, no_barrier = barrier_top(p)
    if no_barrier:
        warnings.warn("W-(x, 0) has no barrier between the wells; separating at the CI abscissa",
                      RuntimeWarning, stacklevel=2)
    X, _ = g.mesh()
    return RegionMask(g, x_sep, (X < x_sep).astype(float), no_barrier)


def localization_P(f: Field, mask: RegionMask) -> float:
    dens = np.sum(np.abs(f.values) ** 2, axis=0)
    total = dens.sum()
    if total == 0:
        raise ValueError("zero field has no localization")
    return float(np.sum(mask.indicator * dens) / total)


def _region_matrix(fields: list[Field], mask: RegionMask) -> np.ndarray:
    vecs = np.stack([f.values.reshape(f.ncomp, -1) for f in fields])
    w = mask.indicator.ravel()
    m = np.einsum("ick,k,jck->ij", vecs.conj(), w, vecs)
    norms = np.einsum("ick,ick->i", vecs.conj(), vecs).real
    return m / np.sqrt(np.outer(norms, norms))


def subspace_localization(
    result: EigenSolveResult, group, mask: RegionMask
) -> tuple[float, list[Field]]:
    """Largest donor weight reachable by a unitary rotation inside a degenerate group.

    For two members this is the top eigenvalue of ``M_ij = <psi_i|P|psi_j>``,
    which covers every mixing angle and relative phase. Returns the value and
    the rotated fields (most donor-localized first).
    """
    group = list(group)
    if not 1 <= len(group) <= 2:
        raise GroupTooLargeError(f"subspace localization handles 1 or 2 states, got {len(group)}")
    fields = [result.eigenfields[i] for i in group]
    if len(group) == 1:
        return localization_P(fields[0], mask), fields
    return _rotate_pair(fields, mask)


def _rotate_pair(fields, mask):
    m = _region_matrix(fields, mask)
    vals, vecs = np.linalg.eigh(m)
    rotated = []
    for col in (1, 0):
        c = vecs[:, col]
        rotated.append(fields[0] * c[0] + fields[1] * c[1])
    return float(vals[1]), rotated


def max_localization(m: np.ndarray) -> float:
    """Top eigenvalue of a 2x2 Hermitian region matrix."""
    return float(np.linalg.eigvalsh(np.asarray(m))[-1])


@dataclass
class DelocalizationCurve:
    kind: Kind
    gamma: float
    deltas: np.ndarray
    values: np.ndarray  # 1 - P of the followed state
    state: int
    diagram: CorrelationDiagram | None = field(default=None, repr=False)

    def to_rows(self):
        for d, v in zip(self.deltas, self.values):
            yield [float(d), float(v)]


def delocalization_curve(
    kind,
    p_base: ModelParams,
    gamma: float,
    delta_samples,
    *,
    state: int = 1,
    state_selector: str = "symmetry",
    grid: GridSpec | None = None,
    nx: int = 193,
    ny: int = 193,
    m: int = 8,
    tol: float = 1e-9,
    seed: int = 0,
    degeneracy_tol: float = 1e-6,
    order: int = 4,
) -> DelocalizationCurve:
    """``1 - P`` of one eigenstate followed through a delta sweep.

    The state is picked by energy order (``state=1``: first excited) at the
    first positive delta and then followed through the sweep. With
    ``state_selector="symmetry"`` it keeps its energy rank inside its
    reflection-symmetry sector, so it passes through true crossings with the
    other symmetry and follows the adiabatic branch through avoided
    crossings however coarse the delta step. ``"overlap"`` continues by
    maximal eigenfield overlap instead, which can jump across an avoided
    crossing narrower than the step. A ``delta = 0`` sample uses the
    donor-maximized rotation of the degenerate pair.
    """
    kind = Kind(kind)
    if kind not in (Kind.GP, Kind.FULL, Kind.BO):
        raise ValueError("curves are defined for the BO, GP and FULL operators")
    deltas = np.asarray(delta_samples, dtype=float)
    p_gamma = p_base.replace(gamma=gamma)
    zero = deltas[0] == 0.0 if len(deltas) else False
    positive = deltas[1:] if zero else deltas
    if grid is None:
        grid = sweep_grid(p_gamma, deltas, nx, ny)

    values = []
    diagram = None
    if zero:
        from .operators import build
        from .spectra import lowest_eigenpairs

        res = lowest_eigenpairs(build(kind, p_gamma.replace(delta=0.0), grid, order=order),
                                max(m, state + 2), tol, seed, degeneracy_tol=degeneracy_tol)
        mask = make_projector(p_gamma.replace(delta=0.0), grid)
        group = res.group_of(state)
        if len(group) == 2:
            # the donor member of the doublet is the one the Δ>0 branch continues
            values.append(1.0 - subspace_localization(res, group, mask)[0])
        else:
            values.append(1.0 - localization_P(res.eigenfields[state], mask))
    if len(positive):
        diagram = correlation_diagram(kind, p_gamma, positive, grid, m=m, tol=tol, seed=seed,
                                      degeneracy_tol=degeneracy_tol, order=order)
        picks = diagram.selected(state, state_selector)
        for i, d in enumerate(positive):
            if picks[i] < 0:
                values.append(np.nan)
                continue
            mask = make_projector(p_gamma.replace(delta=float(d)), grid)
            f = diagram.results[i].eigenfields[picks[i]]
            values.append(1.0 - localization_P(f, mask))
    return DelocalizationCurve(kind, gamma, deltas, np.asarray(values), state, diagram)


@dataclass
class CriticalPoint:
    gamma: float
    delta_inflection: float
    delta_tangent: float
    slope: float
    bandwidth: float
    curve: np.ndarray = field(repr=False)  # (n, 2) samples of (delta, 1-P)


def critical_deltas(deltas, values, *, gamma: float = float("nan"), bandwidth_samples: float = 3.0) -> CriticalPoint:
    """Inflection point of a rising 1-P(Δ) curve and its tangent-line Δ intercept.

    A cubic smoothing spline with an equivalent kernel bandwidth of
    ``bandwidth_samples`` sample spacings is fitted; the inflection is the
    interior maximum of its first derivative.
    """
    x = np.asarray(deltas, dtype=float)
    y = np.asarray(values, dtype=float)
    if len(x) < 5:
        raise NoInflectionError("need at least 5 samples")
    spacing = float(np.median(np.diff(x)))
    bandwidth = bandwidth_samples * spacing
    # equivalent kernel width of a cubic smoothing spline is (lam * spacing)^(1/4)
    lam = bandwidth**4 / spacing
    spline = make_smoothing_spline(x, y, lam=lam)
    deriv = spline.derivative()

    fine = np.linspace(x[0], x[-1], 20 * len(x) + 1)
    slopes = deriv(fine)
    k = int(np.argmax(slopes))
    if k == 0 or k == len(fine) - 1 or slopes[k] <= 0:
        raise NoInflectionError("first derivative has no interior maximum")
    lo, hi = fine[max(k - 1, 0)], fine[min(k + 1, len(fine) - 1)]
    best = minimize_scalar(lambda t: -float(deriv(t)), bounds=(lo, hi), method="bounded",
                           options={"xatol": 1e-10 * max(1.0, abs(hi))})
    d_infl = float(best.x)
    slope = float(deriv(d_infl))
    d_tan = d_infl - float(spline(d_infl)) / slope
    return CriticalPoint(gamma, d_infl, d_tan, slope, bandwidth, np.column_stack([x, y]))


def _phase_point(args):
    kind, p_base, gamma, deltas, kw = args
    curve = delocalization_curve(kind, p_base, gamma, deltas, **kw)
    return critical_deltas(curve.deltas, curve.values, gamma=gamma)


def worker_count(n_tasks: int) -> int:
    env = os.environ.get("CISIM_THREADS")
    cap = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(cap, n_tasks))


def phase_diagram(kind, p_base: ModelParams, gamma_list, delta_grid, **curve_kw) -> list[CriticalPoint]:
    """Critical deltas for each gamma, in input order; parallel over gamma."""
    gammas = [float(g) for g in gamma_list]
    if not gammas:
        return []
    tasks = [(kind, p_base, g, np.asarray(delta_grid, float), curve_kw) for g in gammas]
    workers = worker_count(len(tasks))
    if workers == 1:
        return [_phase_point(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_phase_point, tasks))
