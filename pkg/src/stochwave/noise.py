"""Cylindrical Wiener process machinery: noise channels and increments.

The noise space is spanned by the first J Laplacian eigenfunctions, which
are orthonormal in L2 for free.  Because the sup-norm sum of the whole
eigenfunction family diverges, the diffusion acts through weighted
channels sqrt(mu_j) * f_j with mu_j = j^(-decay) (decay 2 by default),
which keeps the channel basis orthonormal while the effective sum
sum_j mu_j ||f_j||_inf^2 converges.

Increments are produced by a counter-based generator: path i uses the
Philox stream keyed by (root seed, i), and the step/channel layout inside
the stream is fixed by the ensemble shape.  Normals come from Box-Muller
applied to the raw uniforms (no rejection), so every increment is a pure
function of (seed, path, step, channel) and results never depend on
worker count or evaluation order.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field

import numpy as np

from .spectral import BoundaryCondition, Grid, SpectralBasis

__all__ = [
    "NoiseBasis",
    "WienerEnsemble",
    "build_noise_basis",
    "sample_increments",
    "eigenfunction_sup_norm",
]


def eigenfunction_sup_norm(basis: SpectralBasis, jx: int, jy: int) -> float:
    """Closed-form sup norm of a normalised eigenfunction on the rectangle."""
    def axis_sup(length: float, j: int) -> float:
        if basis.bc is BoundaryCondition.NEUMANN and j == 0:
            return math.sqrt(1.0 / length)
        return math.sqrt(2.0 / length)

    return axis_sup(basis.lx, jx) * axis_sup(basis.ly, jy)


@dataclass
class NoiseBasis:
    """The first J eigenfunction channels with their effective weights.

    ``summability`` is sum_j mu_j ||f_j||_inf^2, finite by construction
    and recorded in every run manifest.
    """

    basis: SpectralBasis
    channel_modes: np.ndarray       # (J,) indices into the basis mode list
    mu: np.ndarray                  # (J,) channel weights
    sup_norms: np.ndarray           # (J,) closed-form sup norms
    decay: float

    @property
    def channels(self) -> int:
        return int(self.channel_modes.shape[0])

    @property
    def summability(self) -> float:
        return float(np.sum(self.mu * self.sup_norms ** 2))

    def channel_coefficient_matrix(self) -> np.ndarray:
        """(J, M) coefficients of the raw channels f_j (unit vectors)."""
        out = np.zeros((self.channels, self.basis.size))
        out[np.arange(self.channels), self.channel_modes] = 1.0
        return out

    def channel_values(self, grid: Grid) -> np.ndarray:
        """(J, nx, ny) nodal values of the raw channels."""
        return grid.synth(self.channel_coefficient_matrix())


def build_noise_basis(
    basis: SpectralBasis,
    channels: int,
    decay: float = 2.0,
    strategy: str = "lowest",
) -> NoiseBasis:
    """Select J orthonormal channels from the eigenbasis.

    ``strategy='lowest'`` takes the first J modes in frequency order.
    """
    if channels < 1:
        raise ValueError("need at least one channel")
    if channels > basis.size:
        raise ValueError(
            f"requested {channels} channels but the basis has {basis.size} modes"
        )
    if strategy != "lowest":
        raise ValueError(f"unknown channel selection strategy {strategy!r}")
    idx = np.arange(channels)
    sup = np.array(
        [eigenfunction_sup_norm(basis, *basis.modes[i]) for i in idx]
    )
    mu = (np.arange(1, channels + 1, dtype=float)) ** (-decay)
    return NoiseBasis(basis=basis, channel_modes=idx, mu=mu, sup_norms=sup, decay=decay)


@dataclass
class WienerEnsemble:
    """Seeded Brownian increments per (path, step, channel).

    Increments are N(0, dt) and reproducible bit-exactly from the root
    seed; per-path blocks are generated lazily and cached (small LRU).
    """

    seed: int
    paths: int
    steps: int
    dt: float
    channels: int
    _cache: dict = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def __post_init__(self):
        if not (0 <= self.seed < 2 ** 64):
            raise ValueError("seed must fit in 64 bits")
        if self.paths < 1 or self.steps < 1 or self.channels < 1:
            raise ValueError("paths, steps and channels must be positive")
        if self.dt <= 0:
            raise ValueError("dt must be positive")

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.steps + 1)

    def path_increments(self, path: int) -> np.ndarray:
        """(steps, channels) increments for one path."""
        if not 0 <= path < self.paths:
            raise IndexError(f"path {path} out of range [0, {self.paths})")
        with self._lock:
            block = self._cache.get(path)
        if block is None:
            block = self._generate(path)
            with self._lock:
                if len(self._cache) >= 8:
                    self._cache.pop(next(iter(self._cache)))
                self._cache[path] = block
        return block

    def _generate(self, path: int) -> np.ndarray:
        gen = np.random.Generator(np.random.Philox(key=np.array(
            [self.seed, path], dtype=np.uint64)))
        u = gen.random((self.steps, 2, self.channels))
        # Box-Muller on (0,1] x [0,1) uniforms; fixed draw count per path.
        z = np.sqrt(-2.0 * np.log1p(-u[:, 0, :])) * np.cos(2.0 * math.pi * u[:, 1, :])
        return math.sqrt(self.dt) * z


def sample_increments(ensemble: WienerEnsemble, path: int, step: int) -> np.ndarray:
    """The J increments of one (path, step); deterministic per index triple."""
    if not 0 <= step < ensemble.steps:
        raise IndexError(f"step {step} out of range [0, {ensemble.steps})")
    return ensemble.path_increments(path)[step].copy()
