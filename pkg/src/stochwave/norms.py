"""Exponent arithmetic and the norms used by the solver and the harness.

The admissible exponent triples (p, q, r) follow the piecewise branch
formula with the break at q = 8 (both branches agree there).  Norms:

* ``lq_norm``              tensor-quadrature L^q norm of nodal values,
* ``fractional_norm``      ||(I + A)^{s/2} u||_{L^q}; for q = 2 this is the
                           exact coefficient-space formula (Parseval),
* ``path_norms``           the running trajectory norms: Z (sup of the
                           energy norm), X (L^p-in-time of the target-space
                           norm, composite trapezoid) and Y with
                           Y^p = Z^p + X^p.

The target-space norm is defined computationally as the spectral
multiplier norm ||(I + A)^{(1-r)/2} u||_{L^q} on the truncated basis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .spectral import Grid, PhysicalField, SpectralField

__all__ = [
    "AdmissibilityError",
    "ExponentTriple",
    "NormReport",
    "admissible_r",
    "validate_pair_condition",
    "lq_norm",
    "fractional_norm",
    "h_a_norm",
    "path_norms",
    "trajectory_norm_series",
]

INF = math.inf


class AdmissibilityError(ValueError):
    """Raised when exponents violate 2 <= q <= p <= infinity."""


def _inv(x: float) -> float:
    return 0.0 if x == INF else 1.0 / x


def admissible_r(p: float, q: float) -> float:
    """The smoothing exponent r attached to (p, q).

    r = 5/6 - 1/p - 2/(3q) for 2 <= q <= 8 and r = 1 - 1/p - 2/q for
    8 <= q <= infinity; the two branches agree at q = 8.  Requires
    2 <= q <= p.
    """
    if not (2 <= q <= p):
        raise AdmissibilityError(f"exponents must satisfy 2 <= q <= p: got p={p}, q={q}")
    if q <= 8:
        return 5.0 / 6.0 - _inv(p) - 2.0 / 3.0 * _inv(q)
    return 1.0 - _inv(p) - 2.0 * _inv(q)


def cluster_exponent(q: float) -> float:
    """Growth exponent of the spectral cluster estimate for L^q."""
    if q < 2:
        raise AdmissibilityError(f"cluster exponent needs q >= 2, got {q}")
    if q <= 8:
        return 2.0 / 3.0 * (0.5 - _inv(q))
    return 2.0 * (0.5 - _inv(q)) - 0.5


@dataclass(frozen=True)
class ExponentTriple:
    """An admissible (p, q, r) triple; r is always derived from (p, q)."""

    p: float
    q: float
    r: float

    @classmethod
    def from_pq(cls, p: float, q: float) -> "ExponentTriple":
        return cls(p=float(p), q=float(q), r=admissible_r(p, q))

    def __post_init__(self):
        expected = admissible_r(self.p, self.q)
        if not math.isclose(self.r, expected, rel_tol=0.0, abs_tol=1e-12):
            raise AdmissibilityError(
                f"r={self.r} is not the admissible value {expected} for "
                f"(p, q)=({self.p}, {self.q})"
            )


def validate_pair_condition(q: float, r: float) -> bool:
    """True iff q > 2, 0 < r < min(1, (q-2)/2) and r != 1 - 1/q."""
    if not q > 2:
        return False
    if not (0.0 < r < min(1.0, (q - 2.0) / 2.0)):
        return False
    return r != 1.0 - _inv(q)


def abs_power(values: np.ndarray, q: float) -> np.ndarray:
    """|values|**q, using square-and-multiply for integer q (pow is slow)."""
    if q != INF and float(q).is_integer() and 1 <= q <= 64:
        qi = int(q)
        base = values * values if qi % 2 == 0 else np.abs(values)
        e = qi // 2 if qi % 2 == 0 else qi
        out = None
        while e:
            if e & 1:
                out = base if out is None else out * base
            e >>= 1
            if e:
                base = base * base
        return out
    return np.abs(values) ** q


def lq_norm(f: PhysicalField, q: float) -> float:
    """Tensor-quadrature L^q norm (grid max for q = infinity)."""
    if q < 1:
        raise ValueError("q must be >= 1")
    if q == INF:
        return float(np.max(np.abs(f.values)))
    return float(np.sum(f.grid.weights * abs_power(f.values, q)) ** (1.0 / q))


def fractional_norm(u: SpectralField, s: float, q: float, grid: Grid | None = None) -> float:
    """||(I + A)^{s/2} u||_{L^q}.

    For q = 2 without a grid this is the coefficient formula
    (sum (1 + lam^2)^s c^2)^{1/2}, exact by Parseval.  Otherwise the
    multiplied field is synthesised on the grid and measured with lq_norm.
    """
    mult = (1.0 + u.basis.lam_sq) ** (s / 2.0)
    weighted = mult * u.coeffs
    if q == 2 and grid is None:
        return float(np.linalg.norm(weighted))
    if grid is None:
        raise ValueError("a Grid is required for q != 2")
    return lq_norm(PhysicalField(grid, grid.synth(weighted)), q)


def h_a_norm(u: SpectralField) -> float:
    """The energy norm ||(I + A)^{1/2} u||_{L^2} (coefficient formula)."""
    return fractional_norm(u, 1.0, 2)


@dataclass
class NormReport:
    """One norm measurement with the resolution that produced it."""

    value: float
    kind: str                    # Lq | HA | E | XT | ZT | YT
    p: float = math.nan
    q: float = math.nan
    r: float = math.nan
    horizon: float = math.nan
    grid_nx: int = 0
    grid_ny: int = 0
    dt: float = math.nan

    def __post_init__(self):
        if not (self.value >= 0.0 and math.isfinite(self.value)):
            raise ValueError(f"norm value must be finite and >= 0, got {self.value}")


def _energy_series(times, coeffs, basis) -> np.ndarray:
    mult = np.sqrt(1.0 + basis.lam_sq)
    return np.linalg.norm(coeffs * mult[None, :], axis=1)


def _target_series(coeffs, basis, triple: ExponentTriple, grid: Grid | None) -> np.ndarray:
    mult = (1.0 + basis.lam_sq) ** ((1.0 - triple.r) / 2.0)
    weighted = coeffs * mult[None, :]
    if triple.q == 2:
        return np.linalg.norm(weighted, axis=1)
    if grid is None:
        raise ValueError("a Grid is required for q != 2 path norms")
    fields = grid.synth(weighted)
    if triple.q == INF:
        return np.max(np.abs(fields), axis=(-2, -1))
    w = grid.weights[None, :, :]
    return np.sum(w * abs_power(fields, triple.q), axis=(-2, -1)) ** (1.0 / triple.q)


def trajectory_norm_series(times, coeffs, basis, triple: ExponentTriple, grid: Grid | None = None):
    """Running (Z_t, X_t, Y_t) along a coefficient trajectory.

    Z is the running sup of the energy norm, X the composite-trapezoid
    L^p-in-time norm of the target-space norm (running sup for p = inf)
    and Y^p = Z^p + X^p (max(Z, X) for p = inf).  Returns three arrays
    aligned with ``times``.
    """
    times = np.asarray(times, dtype=float)
    coeffs = np.asarray(coeffs, dtype=float)
    if times.ndim != 1 or coeffs.shape[0] != times.shape[0]:
        raise ValueError("trajectory must hold one coefficient vector per time")
    if times.shape[0] == 0:
        raise ValueError("empty trajectory")
    z = np.maximum.accumulate(_energy_series(times, coeffs, basis))
    e = _target_series(coeffs, basis, triple, grid)
    if triple.p == INF:
        x = np.maximum.accumulate(e)
        y = np.maximum(z, x)
        return z, x, y
    ep = e ** triple.p
    increments = 0.5 * (ep[1:] + ep[:-1]) * np.diff(times)
    xp = np.concatenate([[0.0], np.cumsum(increments)])
    x = xp ** (1.0 / triple.p)
    y = (z ** triple.p + xp) ** (1.0 / triple.p)
    return z, x, y


def path_norms(traj, triple: ExponentTriple, horizon: float, grid: Grid | None = None):
    """(X_T, Z_T, Y_T) reports for a trajectory record covering [0, T].

    ``traj`` is anything with ``times`` (n,), ``u`` (n, M) and ``basis``
    attributes; only nodes with t <= T enter.
    """
    times = np.asarray(traj.times, dtype=float)
    if times.size == 0:
        raise ValueError("empty trajectory")
    if horizon > times[-1] + 1e-12:
        raise ValueError(f"trajectory ends at {times[-1]}, before T={horizon}")
    keep = times <= horizon + 1e-12
    z, x, y = trajectory_norm_series(times[keep], np.asarray(traj.u)[keep], traj.basis, triple, grid)
    nx = grid.nx if grid is not None else 0
    ny = grid.ny if grid is not None else 0
    dt = float(times[1] - times[0]) if times.size > 1 else math.nan
    common = dict(p=triple.p, q=triple.q, r=triple.r, horizon=horizon,
                  grid_nx=nx, grid_ny=ny, dt=dt)
    return (
        NormReport(value=float(x[-1]), kind="XT", **common),
        NormReport(value=float(z[-1]), kind="ZT", **common),
        NormReport(value=float(y[-1]), kind="YT", **common),
    )
