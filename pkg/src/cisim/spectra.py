"""Lowest eigenpairs, degeneracy groups, reflection parity and Δ-correlation diagrams."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as sla
from scipy.optimize import linear_sum_assignment

from .errors import NotConvergedError
from .grid import Field, GridSpec, make_grid
from .model import ModelParams
from .operators import HamiltonianOperator, Kind, build

__all__ = [
    "EigenSolveResult",
    "lowest_eigenpairs",
    "degeneracy_groups",
    "parity_character",
    "reflect_y",
    "CorrelationDiagram",
    "correlation_diagram",
    "sweep_grid",
]


@dataclass
class EigenSolveResult:
    eigenvalues: np.ndarray
    eigenfields: list[Field]
    residual_norms: np.ndarray
    degeneracy_groups: list[list[int]]
    kind: Kind | None = None

    def __len__(self):
        return len(self.eigenvalues)

    def vectors(self) -> np.ndarray:
        """Eigenfields as rows of a ``(m, ncomp, nx, ny)`` array."""
        return np.stack([f.values for f in self.eigenfields])

    def group_of(self, index: int) -> list[int]:
        for group in self.degeneracy_groups:
            if index in group:
                return group
        raise IndexError(index)


def degeneracy_groups(eigenvalues, tol: float) -> list[list[int]]:
    """Split ascending eigenvalues into runs whose neighbouring gaps are below ``tol``."""
    groups: list[list[int]] = []
    for i, e in enumerate(eigenvalues):
        if groups and e - eigenvalues[groups[-1][-1]] < tol:
            groups[-1].append(i)
        else:
            groups.append([i])
    return groups


def _fix_phase(v: np.ndarray) -> np.ndarray:
    """Rotate so that the largest-magnitude entry is real and positive."""
    k = np.argmax(np.abs(v))
    return v * (abs(v[k]) / v[k])


def _shift(H: HamiltonianOperator) -> float:
    # below the potential floor and below any negative kinetic contribution
    # the covariant 4th-order stencil might add
    g = H.grid
    return H.potential_floor() - 1.0 - (1.0 / (6 * g.hx**2) + 1.0 / (6 * g.hy**2)) * (H.kind is Kind.GP)


def lowest_eigenpairs(
    H: HamiltonianOperator,
    m: int = 8,
    tol: float = 1e-9,
    seed: int = 0,
    *,
    degeneracy_tol: float = 1e-6,
    maxiter: int | None = None,
) -> EigenSolveResult:
    """Lowest ``m`` eigenpairs by shift-invert Lanczos (ARPACK) below the spectrum.

    ``tol`` is relative: every residual ``|H psi - E psi|`` must be below
    ``tol * |H|`` with ``|H|`` the infinity-norm estimate, otherwise
    :class:`NotConvergedError` is raised with the residuals found.
    """
    A = H.sparse
    n = A.shape[0]
    if not 0 < m < n // 4:
        raise ValueError(f"m={m} must be small compared to the dimension {n}")
    rng = np.random.default_rng(seed)
    v0 = rng.standard_normal(n)
    if H.dtype == np.complex128:
        v0 = v0 + 1j * rng.standard_normal(n)
    sigma = _shift(H)
    # one extra vector helps ARPACK separate a degenerate pair at the window edge
    k = min(m + 1, n - 2)
    try:
        vals, vecs = sla.eigsh(
            A, k=k, sigma=sigma, which="LM", v0=v0, tol=0.0, maxiter=maxiter or 50 * n
        )
    except sla.ArpackNoConvergence as exc:
        raise NotConvergedError("ARPACK did not converge", residuals=None) from exc

    order = np.argsort(vals)[:m]
    vals = np.asarray(vals[order].real)
    vecs = vecs[:, order]

    groups = degeneracy_groups(vals, degeneracy_tol)
    for group in groups:
        if len(group) > 1:
            q, _ = np.linalg.qr(vecs[:, group])
            vecs[:, group] = q
    scale = 1.0 / math.sqrt(H.grid.cell_area)
    shape = (H.ncomp, *H.grid.shape)
    fields = []
    residuals = np.empty(m)
    h_norm = float(abs(A).sum(axis=1).max())
    for i in range(m):
        v = vecs[:, i]
        if len(_group(groups, i)) == 1:
            v = _fix_phase(v)
        fields.append(Field(H.grid, (v * scale).reshape(shape)))
        residuals[i] = np.linalg.norm(A @ v - vals[i] * v)
    if np.any(residuals > tol * h_norm):
        raise NotConvergedError(
            f"residuals {residuals.max():.2e} exceed {tol:.1e} * |H| = {tol * h_norm:.2e}",
            residuals=residuals,
        )
    return EigenSolveResult(vals, fields, residuals, groups, kind=H.kind)


def _group(groups, i):
    for g in groups:
        if i in g:
            return g
    return [i]


def reflect_y(values: np.ndarray) -> np.ndarray:
    return values[..., ::-1]


def _check_y_symmetric(grid: GridSpec):
    if not math.isclose(grid.y_min, -grid.y_max, rel_tol=0, abs_tol=1e-12 * grid.hy):
        raise ValueError("parity_character needs a y-grid symmetric about y = 0")


def parity_character(f: Field, kind: Kind | str | None = None, params: ModelParams | None = None) -> float:
    """``<f|S|f> / <f|f>`` for the y-reflection symmetry ``S`` of the model.

    Plain ``y -> -y`` for scalar fields of BO/donor/acceptor type;
    reflection times ``sigma_z`` for spinors (V12 is odd in y); reflection
    times ``exp(-2 i theta)`` for the GP operator, where the bare reflection
    flips the sign of the vector potential and the phase factor undoes it.
    """
    _check_y_symmetric(f.grid)
    vals = f.values
    refl = reflect_y(vals).copy()
    if f.is_spinor:
        refl[1] *= -1.0
    elif kind is not None and Kind(kind) is Kind.GP:
        if params is None:
            raise ValueError("GP parity needs the model parameters")
        X, Y = f.grid.mesh()
        phi = np.arctan2(params.gamma * Y, X - params.b)
        refl[0] *= np.exp(-1j * phi)
    num = np.vdot(vals, refl)
    den = np.vdot(vals, vals).real
    return float(num.real / den)


def sweep_grid(p_base: ModelParams, deltas, nx: int, ny: int, **grid_kw) -> GridSpec:
    """One grid valid for every delta of a sweep (the CI moves with delta)."""
    grid = make_grid(p_base.replace(delta=float(deltas[0])) if len(deltas) else p_base, nx, ny, **grid_kw)
    for _ in range(16):
        bad = [d for d in deltas if min(grid.clearance(p_base.replace(delta=float(d)).b, 0.0)) <= 1e-6]
        if not bad:
            return grid
        grid = GridSpec(grid.nx + 2, grid.ny, grid.x_min, grid.x_max, grid.y_min, grid.y_max, True)
    raise ValueError("could not find a grid avoiding every CI position of the sweep")


@dataclass
class CorrelationDiagram:
    """Energies per delta in energy order plus overlap-continued state labels.

    ``tracked[i, s]`` is the energy-order index at ``deltas[i]`` of the state
    that was ``s`` at ``deltas[0]``.
    """

    kind: Kind
    deltas: np.ndarray
    energies: np.ndarray
    parities: np.ndarray
    tracked: np.ndarray
    overlaps: np.ndarray
    results: list[EigenSolveResult] = field(repr=False, default_factory=list)

    def tracked_energy(self, state: int) -> np.ndarray:
        return self.energies[np.arange(len(self.deltas)), self.tracked[:, state]]

    def has_parity(self) -> bool:
        return bool(np.all(np.isfinite(self.parities)))

    def symmetry_tracked(self, state: int) -> np.ndarray:
        """Energy-order index per delta of the state keeping its rank inside its reflection sector.

        Levels of opposite reflection parity cross freely while equal-parity
        levels repel, so following the rank within the sector follows the
        adiabatic branch through avoided crossings at any delta step. Falls
        back to overlap continuation when parities are unavailable; -1 marks
        deltas where the sector has too few computed levels.
        """
        if not self.has_parity():
            return self.tracked[:, state].copy()
        sign = np.sign(self.parities[0, state])
        rank = int(np.sum(np.sign(self.parities[0, :state]) == sign))
        out = np.full(len(self.deltas), -1)
        for i in range(len(self.deltas)):
            members = np.flatnonzero(np.sign(self.parities[i]) == sign)
            if rank < len(members):
                out[i] = members[rank]
        return out

    def selected(self, state: int, selector: str = "symmetry") -> np.ndarray:
        if selector == "symmetry":
            return self.symmetry_tracked(state)
        if selector == "overlap":
            return self.tracked[:, state].copy()
        raise ValueError(f"unknown state selector {selector!r}")

    def neighbour_gap(self, state: int, same_symmetry: bool = True, selector: str = "symmetry") -> np.ndarray:
        """Gap from the followed state to its nearest level, optionally restricted to equal parity sign."""
        gaps = np.full(len(self.deltas), np.inf)
        picks = self.selected(state, selector)
        for i in range(len(self.deltas)):
            j = picks[i]
            if j < 0:
                continue
            e = self.energies[i]
            cand = np.ones(len(e), bool)
            cand[j] = False
            if same_symmetry and np.all(np.isfinite(self.parities[i])):
                cand &= np.sign(self.parities[i]) == np.sign(self.parities[i, j])
            if cand.any():
                gaps[i] = np.min(np.abs(e[cand] - e[j]))
        return gaps

    def min_gap(self, state: int = 1, same_symmetry: bool = True, selector: str = "symmetry") -> tuple[float, float]:
        """Location and size of the smallest gap, refined by a parabola through three samples."""
        gaps = self.neighbour_gap(state, same_symmetry, selector)
        i = int(np.argmin(gaps))
        d = self.deltas
        if 0 < i < len(d) - 1 and np.all(np.isfinite(gaps[i - 1 : i + 2])):
            coef = np.polyfit(d[i - 1 : i + 2], gaps[i - 1 : i + 2], 2)
            if coef[0] > 0:
                x = -coef[1] / (2 * coef[0])
                if d[i - 1] <= x <= d[i + 1]:
                    return float(x), float(np.polyval(coef, x))
        return float(d[i]), float(gaps[i])

    def to_rows(self):
        for i, d in enumerate(self.deltas):
            yield [float(d), *map(float, self.energies[i]), *map(float, self.parities[i])]


def _overlap_matrix(prev: EigenSolveResult, new: EigenSolveResult) -> np.ndarray:
    a = prev.vectors().reshape(len(prev), -1)
    b = new.vectors().reshape(len(new), -1)
    ov = np.abs(a.conj() @ b.T) ** 2 * prev.eigenfields[0].grid.cell_area**2
    # sum over degenerate partners so arbitrary rotations inside a group do not matter
    for group in new.degeneracy_groups:
        if len(group) > 1:
            ov[:, group] = ov[:, group].sum(axis=1, keepdims=True) / len(group)
    return ov


def correlation_diagram(
    kind,
    p_base: ModelParams,
    delta_list,
    grid: GridSpec | None = None,
    *,
    nx: int = 193,
    ny: int = 193,
    m: int = 8,
    tol: float = 1e-9,
    seed: int = 0,
    degeneracy_tol: float = 1e-6,
    order: int = 4,
) -> CorrelationDiagram:
    """Solve at each delta and continue state labels by maximal eigenfield overlap.

    Assignment between consecutive deltas maximises total squared overlap;
    ties are broken by energy proximity.
    """
    kind = Kind(kind)
    deltas = np.asarray(delta_list, dtype=float)
    if np.any(np.diff(deltas) <= 0):
        raise ValueError("delta_list must be strictly increasing")
    if grid is None:
        grid = sweep_grid(p_base, deltas, nx, ny)

    energies = np.empty((len(deltas), m))
    parities = np.full((len(deltas), m), np.nan)
    tracked = np.empty((len(deltas), m), dtype=int)
    overlaps = np.ones((len(deltas), m))
    results = []
    for i, d in enumerate(deltas):
        p = p_base.replace(delta=float(d))
        H = build(kind, p, grid, order=order)
        res = lowest_eigenpairs(H, m, tol, seed, degeneracy_tol=degeneracy_tol)
        energies[i] = res.eigenvalues
        try:
            parities[i] = [parity_character(f, kind, p) for f in res.eigenfields]
        except ValueError:
            pass
        if i == 0:
            tracked[0] = np.arange(m)
        else:
            ov = _overlap_matrix(results[-1], res)
            scale = max(np.ptp(energies[i]), 1e-12)
            cost = -ov + 1e-6 * np.abs(energies[i - 1][:, None] - energies[i][None, :]) / scale
            rows, cols = linear_sum_assignment(cost)
            step = np.empty(m, dtype=int)
            step[rows] = cols
            prev_tracked = tracked[i - 1]
            tracked[i] = step[prev_tracked]
            overlaps[i] = ov[prev_tracked, tracked[i]]
        results.append(res)
    return CorrelationDiagram(kind, deltas, energies, parities, tracked, overlaps, results)
