"""Closed-form potentials of the two-state linear vibronic coupling model.

Diabatic surfaces are displaced 2D parabolas coupled linearly in ``y``::

    V11 = w1^2/2 (x + a/2)^2 + w2^2/2 y^2 + delta/2
    V22 = w1^2/2 (x - a/2)^2 + w2^2/2 y^2 - delta/2
    V12 = c y

State 1 is the donor (higher by ``delta``), state 2 the acceptor. Units have
hbar = 1 and unit nuclear mass.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import CIPointError, NoConvergenceError

__all__ = [
    "ModelParams",
    "PointKind",
    "StationaryPoint",
    "v11",
    "v22",
    "v12",
    "w_adiabatic",
    "w_minus",
    "grad_w_minus",
    "hessian_w_minus",
    "theta",
    "grad_theta",
    "stationary_points",
]

# distance (relative to the model length scale) below which a point counts as the CI
_CI_TOL = 1e-13


@dataclass(frozen=True)
class ModelParams:
    """Physical parameters (omega1, omega2, a, delta, c)."""

    omega1: float = 1.0
    omega2: float = 1.0
    a: float = 4.0
    delta: float = 0.0
    c: float = 0.2

    def __post_init__(self):
        for name in ("omega1", "omega2", "a"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive and finite, got {value!r}")
        for name in ("delta", "c"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    @classmethod
    def from_gamma(cls, gamma, *, omega1=1.0, omega2=1.0, a=4.0, delta=0.0):
        """Build parameters from the dimensionless coupling gamma = 2c/(omega1^2 a)."""
        c = gamma * omega1**2 * a / 2.0
        return cls(omega1=omega1, omega2=omega2, a=a, delta=delta, c=c)

    @property
    def gamma(self) -> float:
        return 2.0 * self.c / (self.omega1**2 * self.a)

    @property
    def b(self) -> float:
        """Abscissa of the conical intersection, where V11 = V22 on y = 0.

        V11 - V22 = omega1^2 a (x - b), so the CI sits at x = -delta/(omega1^2 a):
        it moves towards the donor (higher) well as delta grows.
        """
        return -self.delta / (self.omega1**2 * self.a)

    @property
    def ci(self) -> tuple[float, float]:
        return (self.b, 0.0)

    def replace(self, **changes) -> "ModelParams":
        fields = dict(
            omega1=self.omega1, omega2=self.omega2, a=self.a, delta=self.delta, c=self.c
        )
        if "gamma" in changes:
            gamma = changes.pop("gamma")
            omega1 = changes.get("omega1", self.omega1)
            a = changes.get("a", self.a)
            changes["c"] = gamma * omega1**2 * a / 2.0
        fields.update(changes)
        return ModelParams(**fields)


def v11(p: ModelParams, x, y):
    return 0.5 * p.omega1**2 * (x + 0.5 * p.a) ** 2 + 0.5 * p.omega2**2 * y**2 + 0.5 * p.delta


def v22(p: ModelParams, x, y):
    return 0.5 * p.omega1**2 * (x - 0.5 * p.a) ** 2 + 0.5 * p.omega2**2 * y**2 - 0.5 * p.delta


def v12(p: ModelParams, x, y):
    # x is accepted for signature symmetry; the coupling only depends on y
    return p.c * np.asarray(y) * np.ones_like(np.asarray(x, dtype=float))


def _mean_and_gap(p, x, y):
    mean = 0.5 * (v11(p, x, y) + v22(p, x, y))
    # V11 - V22 written in factored form so that it is exactly zero at x = b
    diff = p.omega1**2 * p.a * (np.asarray(x) - p.b)
    half_gap = 0.5 * np.hypot(diff, 2.0 * p.c * np.asarray(y))
    return mean, half_gap


def w_adiabatic(p: ModelParams, x, y):
    """Lower and upper adiabatic surfaces ``(W-, W+)``."""
    mean, half_gap = _mean_and_gap(p, x, y)
    return mean - half_gap, mean + half_gap


def w_minus(p: ModelParams, x, y):
    mean, half_gap = _mean_and_gap(p, x, y)
    return mean - half_gap


def grad_w_minus(p: ModelParams, x: float, y: float) -> np.ndarray:
    """Analytic gradient of W- (undefined at the CI)."""
    k = p.omega1**2 * p.a
    d = k * (x - p.b)
    q = math.hypot(d, 2.0 * p.c * y)
    if q == 0.0:
        raise CIPointError("W- is not differentiable at the conical intersection")
    gx = p.omega1**2 * x - 0.5 * d * k / q
    gy = p.omega2**2 * y - 0.5 * 4.0 * p.c**2 * y / q
    return np.array([gx, gy])


def hessian_w_minus(p: ModelParams, x: float, y: float) -> np.ndarray:
    k = p.omega1**2 * p.a
    d = k * (x - p.b)
    s = 2.0 * p.c * y
    q = math.hypot(d, s)
    if q == 0.0:
        raise CIPointError("W- is not differentiable at the conical intersection")
    q3 = q**3
    qxx = k**2 * s**2 / q3
    qyy = 4.0 * p.c**2 * d**2 / q3
    qxy = -k * d * 2.0 * p.c * s / q3
    return np.array(
        [[p.omega1**2 - 0.5 * qxx, -0.5 * qxy], [-0.5 * qxy, p.omega2**2 - 0.5 * qyy]]
    )


def _check_ci(p, x, y):
    u = np.asarray(x, dtype=float) - p.b
    v = np.asarray(y, dtype=float)
    if np.any(np.hypot(u, v) <= _CI_TOL * p.a):
        raise CIPointError(f"mixing angle undefined at the conical intersection ({p.b}, 0)")
    return u, v


def theta(p: ModelParams, x, y):
    """Mixing angle ``0.5 * atan2(gamma*y, x - b)``.

    The branch cut lies on the ray x < b, y = 0 where the angle jumps by pi;
    values are in (-pi/2, pi/2].
    """
    u, v = _check_ci(p, x, y)
    return 0.5 * np.arctan2(p.gamma * v, u)


def grad_theta(p: ModelParams, x, y):
    """Vector potential ``A = grad(theta)`` as ``(Ax, Ay)``; smooth across the cut."""
    u, v = _check_ci(p, x, y)
    g = p.gamma
    r2 = u * u + (g * v) ** 2
    return -0.5 * g * v / r2, 0.5 * g * u / r2


class PointKind(enum.Enum):
    DONOR_MIN = "donor_min"
    ACCEPTOR_MIN = "acceptor_min"
    TS1 = "ts1"
    TS2 = "ts2"
    CI = "ci"


@dataclass(frozen=True)
class StationaryPoint:
    position: tuple[float, float]
    energy: float
    kind: PointKind


def _newton(p, seed, gtol=1e-10, max_iter=200):
    z = np.array(seed, dtype=float)
    g = grad_w_minus(p, *z)
    for _ in range(max_iter):
        gnorm = np.linalg.norm(g)
        if gnorm < gtol:
            return z
        hess = hessian_w_minus(p, *z)
        try:
            step = -np.linalg.solve(hess, g)
        except np.linalg.LinAlgError:
            step = -g
        # backtrack on the gradient norm; the CI cusp makes full steps unsafe
        t = 1.0
        while t > 1e-12:
            trial = z + t * step
            try:
                g_trial = grad_w_minus(p, *trial)
            except CIPointError:
                t *= 0.5
                continue
            if np.linalg.norm(g_trial) < (1.0 - 1e-4 * t) * gnorm:
                break
            t *= 0.5
        else:
            raise NoConvergenceError("line search stalled", seed=tuple(seed))
        z, g = trial, g_trial
    if np.linalg.norm(g) < gtol:
        return z
    raise NoConvergenceError("Newton iteration did not converge", seed=tuple(seed))


def stationary_points(p: ModelParams, *, gtol: float = 1e-10, strict: bool = False):
    """Minima, transition states and the CI of W-.

    Transition states are searched from seeds at ``(b, +-c/omega2^2)``. A
    search that fails or lands on a point that is not a first-order saddle
    is dropped with a warning (``strict=True`` raises instead). This happens
    when the coupling is strong enough to merge the saddles into the wells.
    """
    if p.gamma <= 0:
        raise ValueError("stationary_points needs gamma > 0")

    points = []
    for kind, seed in (
        (PointKind.DONOR_MIN, (-0.5 * p.a, 0.0)),
        (PointKind.ACCEPTOR_MIN, (0.5 * p.a, 0.0)),
    ):
        # W- is even in y, so the minima sit on y = 0 unless the coupling
        # pushes them off-axis; a small y offset lets Newton find either case
        z = _newton(p, (seed[0], 1e-3), gtol=gtol)
        points.append(StationaryPoint((float(z[0]), float(z[1])), float(w_minus(p, *z)), kind))

    y_seed = max(p.c / p.omega2**2, 1e-3)
    ts = {}
    for kind, sign in ((PointKind.TS1, 1.0), (PointKind.TS2, -1.0)):
        seed = (p.b, sign * y_seed)
        try:
            z = _newton(p, seed, gtol=gtol)
            eig = np.linalg.eigvalsh(hessian_w_minus(p, *z))
            if not (eig[0] < 0 < eig[1]) or np.sign(z[1]) != sign:
                raise NoConvergenceError("search did not reach a first-order saddle", seed=seed)
        except NoConvergenceError as exc:
            if strict:
                raise
            warnings.warn(f"{kind.name} omitted: {exc} (seed={seed})", RuntimeWarning, stacklevel=2)
            continue
        ts[kind] = StationaryPoint((float(z[0]), float(z[1])), float(w_minus(p, *z)), kind)
    points.extend(ts.values())

    points.append(StationaryPoint(p.ci, float(w_minus(p, p.b, 0.0)), PointKind.CI))
    return points
