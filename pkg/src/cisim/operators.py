"""Grid Hamiltonians of the model: BO, BO+GP, full two-state, donor, acceptor.

Every operator is Hermitian under :func:`cisim.grid.inner` and exposes both a
matrix-free ``apply`` (finite-difference stencil plus node tables) and an
explicit sparse matrix for the eigensolver and propagator.

The geometric-phase kinetic energy ``(-i grad + grad theta)^2 / 2`` is
discretised gauge-covariantly: every stencil link ``j -> k`` carries the
factor ``exp(i (theta_k - theta_j))``, with the difference taken along the
link (the pi jump of theta across its branch cut is removed). On any patch
free of the CI this makes ``H_GP (exp(-i theta) g) = exp(-i theta) H_BO g``
hold exactly on the grid, and it preserves the twisted reflection
symmetries of the continuum operator, which the double degeneracy at
delta = 0 depends on.
"""

from __future__ import annotations

import enum
import math
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import CIOnGridError, GridMismatchError
from .grid import Field, GridSpec, inner, second_derivative_coefficients, second_derivative_matrix
from .model import ModelParams, v11, v12, v22, w_minus

__all__ = ["Kind", "HamiltonianOperator", "build", "apply", "expectation", "link_phase"]


class Kind(str, enum.Enum):
    BO = "BO"
    GP = "GP"
    FULL = "FULL"
    DONOR = "DONOR"
    ACCEPTOR = "ACCEPTOR"

    def __str__(self):
        return self.value


def link_phase(theta_from: np.ndarray, theta_to: np.ndarray) -> np.ndarray:
    """Change of the mixing angle along a straight link, branch jump removed."""
    d = theta_to - theta_from
    return d - np.pi * np.round(d / np.pi)


def _shifted(axis: int, k: int, n: int):
    lo = [slice(None)] * 3
    hi = [slice(None)] * 3
    lo[axis] = slice(0, n - k)
    hi[axis] = slice(k, n)
    return tuple(lo), tuple(hi)


class HamiltonianOperator:
    """Immutable Hermitian operator on a :class:`GridSpec`.

    ``theta_offset`` adds a constant to the tabulated mixing angle; physics
    must not change (used to test the gauge plumbing).
    """

    def __init__(
        self,
        kind: Kind,
        params: ModelParams,
        grid: GridSpec,
        *,
        order: int = 4,
        theta_offset: float = 0.0,
    ):
        self.kind = Kind(kind)
        self.params = params
        self.grid = grid
        self.order = order
        self.theta_offset = float(theta_offset)
        second_derivative_coefficients(order)  # validates order

        X, Y = grid.mesh()
        if self.kind is Kind.FULL:
            self.v11 = v11(params, X, Y)
            self.v22 = v22(params, X, Y)
            self.v12 = v12(params, X, Y)
            potential = None
        elif self.kind is Kind.DONOR:
            potential = v11(params, X, Y)
        elif self.kind is Kind.ACCEPTOR:
            potential = v22(params, X, Y)
        else:
            potential = w_minus(params, X, Y)
        self.potential = potential

        self._links = None
        if self.kind is Kind.GP:
            cx, cy = grid.clearance(params.b, 0.0)
            if min(cx, cy) <= 1e-8:
                raise CIOnGridError(
                    "a grid line passes through the conical intersection; "
                    "build the grid with make_grid"
                )
            u = X - params.b
            self.theta_table = 0.5 * np.arctan2(params.gamma * Y, u) + self.theta_offset
            self._links = self._link_factors(self.theta_table)

    # -- construction helpers ---------------------------------------------

    def _link_factors(self, th):
        """Unit-modulus factors for forward links of length 1..order/2 along x and y."""
        links = {}
        nreach = len(second_derivative_coefficients(self.order)) - 1
        for axis, n in ((0, self.grid.nx), (1, self.grid.ny)):
            for k in range(1, nreach + 1):
                if axis == 0:
                    d = link_phase(th[: n - k, :], th[k:, :])
                else:
                    d = link_phase(th[:, : n - k], th[:, k:])
                links[axis, k] = np.exp(1j * d)
        return links

    @property
    def ncomp(self) -> int:
        return 2 if self.kind is Kind.FULL else 1

    @property
    def dim(self) -> int:
        return self.ncomp * self.grid.size

    @property
    def dtype(self):
        return np.complex128 if self.kind is Kind.GP else np.float64

    def potential_floor(self) -> float:
        """Lowest potential value on the grid (lowest eigenvalue of the potential matrix for FULL)."""
        if self.kind is Kind.FULL:
            lower = 0.5 * (self.v11 + self.v22) - 0.5 * np.hypot(self.v11 - self.v22, 2 * self.v12)
            return float(lower.min())
        return float(self.potential.min())

    def vector_potential(self) -> tuple[np.ndarray, np.ndarray]:
        """Tabulated ``grad theta`` at the nodes (GP only; diagnostics)."""
        if self.kind is not Kind.GP:
            raise ValueError("only the GP operator carries a vector potential")
        from .model import grad_theta

        X, Y = self.grid.mesh()
        return grad_theta(self.params, X, Y)

    # -- application ----------------------------------------------------------

    def _kinetic(self, vals: np.ndarray) -> np.ndarray:
        """-1/2 Laplacian (covariant for GP) on an array ``(ncomp, nx, ny)``."""
        coeffs = second_derivative_coefficients(self.order)
        g = self.grid
        out = (-0.5 * coeffs[0] * (1.0 / g.hx**2 + 1.0 / g.hy**2)) * vals
        for axis, n, h in ((1, g.nx, g.hx), (2, g.ny, g.hy)):
            for k, ck in enumerate(coeffs[1:], start=1):
                w = -0.5 * ck / h**2
                lo, hi = _shifted(axis, k, n)
                if self._links is None:
                    out[lo] += w * vals[hi]
                    out[hi] += w * vals[lo]
                else:
                    u = self._links[axis - 1, k][None]
                    out[lo] += w * u * vals[hi]
                    out[hi] += w * np.conj(u) * vals[lo]
        return out

    def apply_array(self, vals: np.ndarray) -> np.ndarray:
        vals = np.asarray(vals)
        if vals.shape != (self.ncomp, *self.grid.shape):
            raise GridMismatchError(f"expected shape {(self.ncomp, *self.grid.shape)}, got {vals.shape}")
        vals = vals.astype(np.result_type(vals.dtype, self.dtype), copy=False)
        out = self._kinetic(vals)
        if self.kind is Kind.FULL:
            out[0] += self.v11 * vals[0] + self.v12 * vals[1]
            out[1] += self.v12 * vals[0] + self.v22 * vals[1]
        else:
            out[0] += self.potential * vals[0]
        return out

    def apply(self, f: Field) -> Field:
        if f.grid != self.grid or f.ncomp != self.ncomp:
            raise GridMismatchError(
                f"{self.kind} operator needs a {self.ncomp}-component field on its own grid"
            )
        return Field(self.grid, self.apply_array(f.values))

    __call__ = apply

    def matvec(self, v: np.ndarray) -> np.ndarray:
        """Apply to flat vector(s) of length ``dim`` (columns for 2D input) via the sparse matrix."""
        return self.sparse @ v

    # -- sparse assembly -------------------------------------------------------

    @cached_property
    def sparse(self) -> sp.csr_matrix:
        g = self.grid
        kin = -0.5 * (
            sp.kron(second_derivative_matrix(g.nx, g.hx, self.order), sp.identity(g.ny))
            + sp.kron(sp.identity(g.nx), second_derivative_matrix(g.ny, g.hy, self.order))
        )
        if self.kind is Kind.GP:
            kin = kin.tocoo()
            th = self.theta_table.ravel()
            phase = np.exp(1j * link_phase(th[kin.row], th[kin.col]))
            kin = sp.coo_matrix((kin.data * phase, (kin.row, kin.col)), shape=kin.shape)
        if self.kind is Kind.FULL:
            mat = sp.bmat(
                [
                    [kin + sp.diags(self.v11.ravel()), sp.diags(self.v12.ravel())],
                    [sp.diags(self.v12.ravel()), kin + sp.diags(self.v22.ravel())],
                ]
            )
        else:
            mat = kin + sp.diags(self.potential.ravel())
        mat = sp.csr_matrix(mat, dtype=self.dtype)
        mat.sum_duplicates()
        return mat

    def __repr__(self):
        return f"HamiltonianOperator({self.kind.value}, {self.params}, grid={self.grid.shape})"


def build(kind, p: ModelParams, g: GridSpec, *, order: int = 4, theta_offset: float = 0.0):
    return HamiltonianOperator(Kind(kind), p, g, order=order, theta_offset=theta_offset)


def apply(H: HamiltonianOperator, f: Field) -> Field:
    return H.apply(f)


def expectation(H: HamiltonianOperator, f: Field, *, imag_tol: float = 1e-10) -> float:
    """``Re <f|H|f> / <f|f>``; raises if the imaginary part exceeds ``imag_tol``."""
    num = inner(f, H.apply(f))
    den = inner(f, f).real
    value = num / den
    if abs(value.imag) > imag_tol * max(1.0, abs(value.real)):
        raise ArithmeticError(f"non-Hermitian expectation value: imaginary part {value.imag:.3e}")
    return float(value.real)


def hermiticity_residual(H: HamiltonianOperator, f: Field, g: Field) -> float:
    """``|<g|Hf> - <Hg|f>| / (|f| |g|)``."""
    lhs = inner(g, H.apply(f))
    rhs = inner(H.apply(g), f)
    scale = math.sqrt(inner(f, f).real * inner(g, g).real)
    return abs(lhs - rhs) / scale
