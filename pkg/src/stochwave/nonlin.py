"""Pointwise nonlinearities, the Nemytskii diffusion map and their diagnostics.

The critical nonlinearity is h(x) = x (exp(alpha x^2) - 1) with alpha = 4*pi
by default; polynomial variants and the zero map are also supported.  All
variants vanish at 0.  The exponential is evaluated through expm1 with a
hard range cap: inputs with alpha*x^2 > 700 raise instead of silently
producing infinities.

Diagnostics provided here: the Moser-Trudinger functional, the
logarithmic-inequality ratio, the locally-Lipschitz ratio for F (whose
running maximum is the empirical Lipschitz constant) and a Monte Carlo
estimator for the constants of F and G.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .norms import fractional_norm, h_a_norm, lq_norm, validate_pair_condition
from .spectral import Grid, PhysicalField, SpectralField

__all__ = [
    "NonlinearityRangeError",
    "ExponentialCritical",
    "Polynomial",
    "ZeroNonlinearity",
    "LipschitzBudget",
    "eval_F",
    "nemytskii_channels",
    "nemytskii_hs_norm_sq",
    "moser_trudinger_functional",
    "log_inequality_ratio",
    "lipschitz_ratio_F",
    "estimate_lipschitz_constants",
    "default_gamma",
    "LipschitzEstimate",
]

EXP_CAP = 700.0  # largest exponent fed to expm1


class NonlinearityRangeError(FloatingPointError):
    """Raised when exp(alpha * u^2) would overflow (|u| beyond the cap)."""


@dataclass(frozen=True)
class ExponentialCritical:
    """h(x) = x (exp(alpha x^2) - 1); alpha = 4*pi is the critical growth."""

    alpha: float = 4.0 * math.pi

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")

    def apply(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        arg = self.alpha * x * x
        if np.max(arg, initial=0.0) > EXP_CAP:
            raise NonlinearityRangeError(
                f"alpha*u^2 reaches {np.max(arg):.3g} > {EXP_CAP}; "
                "refusing to evaluate exp beyond the overflow cap"
            )
        return x * np.expm1(arg)


@dataclass(frozen=True)
class Polynomial:
    """F(u) = sum_k c_k u^(k+1); the constant term is absent so F(0) = 0."""

    coefficients: tuple = (1.0,)

    def apply(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        power = x.copy()
        for c in self.coefficients:
            out += c * power
            power = power * x
        return out


@dataclass(frozen=True)
class ZeroNonlinearity:
    def apply(self, x: np.ndarray) -> np.ndarray:
        return np.zeros_like(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class LipschitzBudget:
    """Thresholds and constants entering the local-Lipschitz estimates.

    0 < m_prime < m < 1; gamma must satisfy 2*gamma < p for the run's
    exponent triple (validated by the solver config, not here).  c_f and
    c_g may be empirical estimates or configured values.
    """

    m: float
    m_prime: float
    gamma: float
    c_f: float = 1.0
    c_g: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.m_prime < self.m < 1.0):
            raise ValueError(
                f"need 0 < M' < M < 1, got M'={self.m_prime}, M={self.m}"
            )
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.c_f < 0 or self.c_g < 0:
            raise ValueError("constants must be non-negative")


def default_gamma(log_constant: float, m: float, eps: float = 0.1) -> float:
    """gamma = 2*pi*C^2*(1+eps)*M^2 with C the log-inequality constant."""
    return 2.0 * math.pi * log_constant ** 2 * (1.0 + eps) * m * m


def eval_F(f: PhysicalField, kind) -> PhysicalField:
    """Pointwise application of the nonlinearity to nodal values."""
    return PhysicalField(f.grid, kind.apply(f.values))


def nemytskii_channels(u: PhysicalField, noise, kind=None) -> list[PhysicalField]:
    """Per-channel images sqrt(mu_j) * (g o u) * f_j of the diffusion map.

    ``noise`` is a NoiseBasis; g defaults to the critical exponential.
    The channel weights mu_j are the ones that make the effective
    sup-norm sum finite.
    """
    if noise.channels == 0:
        raise ValueError("noise basis has no channels")
    g = kind if kind is not None else ExponentialCritical()
    gu = g.apply(u.values)
    fields = noise.channel_values(u.grid)           # (J, nx, ny)
    root_mu = np.sqrt(noise.mu)
    return [
        PhysicalField(u.grid, root_mu[j] * gu * fields[j])
        for j in range(noise.channels)
    ]


def nemytskii_hs_norm_sq(u: PhysicalField, noise, kind=None) -> float:
    """Squared Hilbert-Schmidt norm sum_j mu_j ||(g o u) f_j||_{L2}^2."""
    total = 0.0
    for ch in nemytskii_channels(u, noise, kind):
        total += lq_norm(ch, 2) ** 2
    return total


def moser_trudinger_functional(u: PhysicalField, alpha: float) -> float:
    """Quadrature of integral of (exp(alpha u^2) - 1) over the rectangle."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    arg = alpha * u.values ** 2
    if np.max(arg, initial=0.0) > EXP_CAP:
        raise NonlinearityRangeError(
            f"alpha*u^2 reaches {np.max(arg):.3g} > {EXP_CAP}"
        )
    return float(np.sum(u.grid.weights * np.expm1(arg)))


def log_inequality_ratio(u: SpectralField, q: float, r: float, grid: Grid) -> float:
    """||u||_inf / ( ||u||_{H1} [1 + log(1 + ||u||_E / ||u||_{H1})]^{1/2} ).

    Finiteness over sample families is the test; the sup estimates the
    constant of the logarithmic inequality.  Requires the pair condition
    on (q, r) and a nonzero field.
    """
    if not validate_pair_condition(q, r):
        raise ValueError(f"(q, r)=({q}, {r}) violates the pair condition")
    h1 = h_a_norm(u)
    if h1 == 0.0:
        raise ValueError("zero field")
    sup = lq_norm(PhysicalField(grid, grid.synth(u.coeffs)), math.inf)
    e = fractional_norm(u, 1.0 - r, q, grid)
    return sup / (h1 * math.sqrt(1.0 + math.log1p(e / h1)))


def lipschitz_ratio_F(
    u: SpectralField,
    v: SpectralField,
    budget: LipschitzBudget,
    kind,
    triple,
    grid: Grid,
) -> float:
    """||F(u)-F(v)||_{L2} / ( [1 + ||u||_E/M + ||v||_E/M]^gamma ||u-v||_{H_A} ).

    Precondition (a hypothesis of the local-Lipschitz estimate, not a
    numeric guard): both energy norms must stay below M.  Identical inputs return 0 by convention.
    """
    m = budget.m
    nu = h_a_norm(u)
    nv = h_a_norm(v)
    if nu > m or nv > m:
        raise ValueError(
            f"energy norms ({nu:.4g}, {nv:.4g}) exceed the threshold M={m}; "
            "the Lipschitz ratio is only defined under that bound"
        )
    diff = u.coeffs - v.coeffs
    if np.all(diff == 0.0):
        return 0.0
    fu = kind.apply(grid.synth(u.coeffs))
    fv = kind.apply(grid.synth(v.coeffs))
    num = lq_norm(PhysicalField(grid, fu - fv), 2)
    s = 1.0 - triple.r
    eu = fractional_norm(u, s, triple.q, grid)
    ev = fractional_norm(v, s, triple.q, grid)
    den = (1.0 + eu / m + ev / m) ** budget.gamma * h_a_norm(SpectralField(u.basis, diff))
    return num / den


@dataclass
class LipschitzEstimate:
    """Empirical constants from a Monte Carlo sweep over admissible pairs."""

    c_f: float
    c_g: float
    m: float
    gamma: float
    samples: int
    grid_nx: int
    grid_ny: int
    seed: int
    ratios_f: np.ndarray = field(repr=False, default=None)
    ratios_g: np.ndarray = field(repr=False, default=None)


def _random_bounded_field(basis, rng, m: float, decay: float) -> SpectralField:
    c = rng.standard_normal(basis.size) * (1.0 + basis.lam_sq) ** (-decay / 2.0)
    u = SpectralField(basis, c)
    scale = m * rng.uniform(0.2, 1.0) / h_a_norm(u)
    return SpectralField(basis, scale * c)


def estimate_lipschitz_constants(
    basis,
    grid: Grid,
    budget: LipschitzBudget,
    kind,
    triple,
    noise=None,
    samples: int = 500,
    decay: float = 2.0,
    seed: int = 0,
) -> LipschitzEstimate:
    """Running max of the F (and optionally G) Lipschitz ratios.

    Pairs are random fields with energy norm at most M and spectral decay
    ``decay``; the G ratio divides the Hilbert-Schmidt difference norm by
    the same denominator as F.
    """
    rng = np.random.Generator(np.random.Philox(key=seed))
    ratios_f = np.empty(samples)
    ratios_g = np.empty(samples) if noise is not None else None
    sup_sum = noise.summability if noise is not None else 0.0
    for i in range(samples):
        u = _random_bounded_field(basis, rng, budget.m, decay)
        v = _random_bounded_field(basis, rng, budget.m, decay)
        ratios_f[i] = lipschitz_ratio_F(u, v, budget, kind, triple, grid)
        if noise is not None:
            # ||G(u)-G(v)||_HS <= ||g(u)-g(v)||_L2 * sqrt(sum mu ||f||_inf^2)
            gu = kind.apply(grid.synth(u.coeffs))
            gv = kind.apply(grid.synth(v.coeffs))
            num = lq_norm(PhysicalField(grid, gu - gv), 2) * math.sqrt(sup_sum)
            s = 1.0 - triple.r
            den = (
                1.0 + fractional_norm(u, s, triple.q, grid) / budget.m
                + fractional_norm(v, s, triple.q, grid) / budget.m
            ) ** budget.gamma
            dvec = SpectralField(basis, u.coeffs - v.coeffs)
            hd = h_a_norm(dvec)
            ratios_g[i] = num / (den * hd) if hd > 0 else 0.0
    return LipschitzEstimate(
        c_f=float(np.max(ratios_f)),
        c_g=float(np.max(ratios_g)) if ratios_g is not None else math.nan,
        m=budget.m,
        gamma=budget.gamma,
        samples=samples,
        grid_nx=grid.nx,
        grid_ny=grid.ny,
        seed=seed,
        ratios_f=ratios_f,
        ratios_g=ratios_g,
    )
