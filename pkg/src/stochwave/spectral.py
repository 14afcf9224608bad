"""Laplacian eigenbases on rectangles and the wave propagator calculus.

The Laplacian on ``[0, Lx] x [0, Ly]`` with Dirichlet or Neumann boundary
conditions has separable eigenfunctions: products of L2-normalised sines
(Dirichlet, indices starting at 1) or cosines (Neumann, indices starting
at 0, so the constant function is the zero mode).  Everything downstream
works on the coefficient vector of a field in such a truncated basis.

Provided here:

* frequency-truncated basis construction (all modes with frequency <= cutoff),
* nodal grids matched to the discrete sine / cosine transforms so that
  eigenfunction orthogonality is exact in the discrete inner product,
* synthesis / analysis between coefficient and nodal representations,
* the trigonometric propagators applied exactly mode by mode:
  cos(t sqrt(A)), sin(t sqrt(A))/sqrt(A) (zero mode -> t), the
  integer-rounded phase group, and the first-order pair rotation S(t),
* the spectral cluster projector onto frequencies in [k, k+1).
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "BoundaryCondition",
    "SpectralBasis",
    "SpectralField",
    "PhysicalField",
    "Grid",
    "BasisError",
    "AliasingError",
    "build_basis",
    "default_grid",
    "synthesize",
    "analyze",
    "spectral_projector",
    "apply_cos_group",
    "apply_sinc_group",
    "apply_rounded_group",
    "apply_rounding_defect",
    "pair_evolve",
    "sinc_multiplier",
    "group_kernel_bound",
    "basis_to_json",
    "basis_from_json",
]


class BasisError(ValueError):
    """Raised when a basis cannot be built or two bases are incompatible."""


class AliasingError(ValueError):
    """Raised when a grid is too coarse to represent a basis without aliasing."""


class BoundaryCondition(enum.Enum):
    DIRICHLET = "dirichlet"
    NEUMANN = "neumann"


@dataclass(eq=False)
class SpectralBasis:
    """Ordered eigenpairs of the Laplacian on a rectangle.

    Modes are all integer pairs ``(jx, jy)`` with frequency
    ``lam = sqrt((jx*pi/lx)**2 + (jy*pi/ly)**2) <= cutoff``, sorted by
    ``(lam**2, jx, jy)``.  Dirichlet indices start at 1, Neumann at 0
    (the Neumann basis always contains the constant mode ``(0, 0)``).
    """

    lx: float
    ly: float
    bc: BoundaryCondition
    cutoff: float
    modes: np.ndarray = field(repr=False)       # (M, 2) int
    lam_sq: np.ndarray = field(repr=False)      # (M,) eigenvalues of A
    lam: np.ndarray = field(repr=False)         # (M,) sqrt(lam_sq)

    def __eq__(self, other):
        if not isinstance(other, SpectralBasis):
            return NotImplemented
        return (
            self.lx == other.lx
            and self.ly == other.ly
            and self.bc == other.bc
            and self.cutoff == other.cutoff
            and self.modes.shape == other.modes.shape
            and bool(np.all(self.modes == other.modes))
        )

    @property
    def size(self) -> int:
        return self.modes.shape[0]

    @property
    def jx_max(self) -> int:
        return int(self.modes[:, 0].max())

    @property
    def jy_max(self) -> int:
        return int(self.modes[:, 1].max())

    def mode_index(self, jx: int, jy: int) -> int:
        """Position of mode (jx, jy) in the coefficient vector."""
        hits = np.nonzero((self.modes[:, 0] == jx) & (self.modes[:, 1] == jy))[0]
        if hits.size == 0:
            raise BasisError(f"mode ({jx}, {jy}) not in basis")
        return int(hits[0])

    def unit_field(self, jx: int, jy: int, amplitude: float = 1.0) -> "SpectralField":
        c = np.zeros(self.size)
        c[self.mode_index(jx, jy)] = amplitude
        return SpectralField(self, c)

    def zero_field(self) -> "SpectralField":
        return SpectralField(self, np.zeros(self.size))


@dataclass
class SpectralField:
    """A real field represented by its coefficients in a SpectralBasis."""

    basis: SpectralBasis
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (self.basis.size,):
            raise BasisError(
                f"coefficient length {self.coeffs.shape} does not match "
                f"basis size {self.basis.size}"
            )
        if not np.all(np.isfinite(self.coeffs)):
            raise ValueError("non-finite coefficients")

    def copy(self) -> "SpectralField":
        return SpectralField(self.basis, self.coeffs.copy())


def _require_same_basis(a: SpectralField, b: SpectralField):
    if a.basis is not b.basis and a.basis != b.basis:
        raise BasisError("fields live on different bases")


def build_basis(lx: float, ly: float, bc: BoundaryCondition, cutoff: float) -> SpectralBasis:
    """Enumerate all eigenmodes with frequency <= cutoff.

    Raises BasisError when no mode qualifies (for Dirichlet this happens
    when the cutoff is below the fundamental frequency).
    """
    if lx <= 0 or ly <= 0:
        raise BasisError("domain lengths must be positive")
    if cutoff <= 0:
        raise BasisError("frequency cutoff must be positive")
    start = 1 if bc is BoundaryCondition.DIRICHLET else 0
    jx_hi = int(math.floor(cutoff * lx / math.pi))
    jy_hi = int(math.floor(cutoff * ly / math.pi))
    modes = []
    lam_sq = []
    for jx in range(start, jx_hi + 1):
        for jy in range(start, jy_hi + 1):
            ls = (jx * math.pi / lx) ** 2 + (jy * math.pi / ly) ** 2
            if ls <= cutoff * cutoff:
                modes.append((jx, jy))
                lam_sq.append(ls)
    if not modes:
        raise BasisError(f"no eigenmode with frequency <= {cutoff}; empty basis")
    modes_arr = np.array(modes, dtype=int)
    lam_sq_arr = np.array(lam_sq, dtype=float)
    order = np.lexsort((modes_arr[:, 1], modes_arr[:, 0], lam_sq_arr))
    modes_arr = modes_arr[order]
    lam_sq_arr = lam_sq_arr[order]
    return SpectralBasis(
        lx=lx,
        ly=ly,
        bc=bc,
        cutoff=cutoff,
        modes=modes_arr,
        lam_sq=lam_sq_arr,
        lam=np.sqrt(lam_sq_arr),
    )


def _axis_table(bc: BoundaryCondition, length: float, j_max: int, nodes: np.ndarray) -> np.ndarray:
    """1-D eigenfunction values, rows j = 0..j_max (Dirichlet row 0 is zero)."""
    j = np.arange(j_max + 1)[:, None]
    theta = j * math.pi * nodes[None, :] / length
    if bc is BoundaryCondition.DIRICHLET:
        table = math.sqrt(2.0 / length) * np.sin(theta)
        table[0, :] = 0.0
    else:
        table = math.sqrt(2.0 / length) * np.cos(theta)
        table[0, :] = math.sqrt(1.0 / length)
    return table


class Grid:
    """Tensor nodal grid matched to the basis transforms.

    Uniform nodes including both boundaries with trapezoid weights.  On
    such a grid the discrete inner product reproduces eigenfunction
    orthogonality exactly (DST-I for Dirichlet, DCT-I for Neumann)
    provided ``nx >= 2*jx_max + 2`` and likewise in y; construction
    rejects coarser grids.
    """

    def __init__(self, basis: SpectralBasis, nx: int, ny: int):
        if nx < 2 * basis.jx_max + 2 or ny < 2 * basis.jy_max + 2:
            raise AliasingError(
                f"grid {nx}x{ny} aliases basis with max indices "
                f"({basis.jx_max}, {basis.jy_max}); need >= "
                f"({2 * basis.jx_max + 2}, {2 * basis.jy_max + 2})"
            )
        self.basis = basis
        self.nx = int(nx)
        self.ny = int(ny)
        self.x = np.linspace(0.0, basis.lx, nx)
        self.y = np.linspace(0.0, basis.ly, ny)
        self.wx = np.full(nx, basis.lx / (nx - 1))
        self.wx[0] *= 0.5
        self.wx[-1] *= 0.5
        self.wy = np.full(ny, basis.ly / (ny - 1))
        self.wy[0] *= 0.5
        self.wy[-1] *= 0.5
        self.weights = np.outer(self.wx, self.wy)
        self.ex = _axis_table(basis.bc, basis.lx, basis.jx_max, self.x)  # (JX, nx)
        self.ey = _axis_table(basis.bc, basis.ly, basis.jy_max, self.y)  # (JY, ny)
        self._jx = basis.modes[:, 0]
        self._jy = basis.modes[:, 1]

    def synth(self, coeffs: np.ndarray) -> np.ndarray:
        """Coefficients (..., M) -> nodal values (..., nx, ny)."""
        coeffs = np.asarray(coeffs, dtype=float)
        shape = coeffs.shape[:-1]
        full = np.zeros(shape + (self.ex.shape[0], self.ey.shape[0]))
        full[..., self._jx, self._jy] = coeffs
        tmp = np.tensordot(full, self.ey, axes=([-1], [0]))     # (..., JX, ny)
        out = np.tensordot(tmp, self.ex, axes=([-2], [0]))      # (..., ny, nx)
        return np.swapaxes(out, -1, -2)

    def project(self, values: np.ndarray) -> np.ndarray:
        """Nodal values (..., nx, ny) -> coefficients (..., M) by quadrature."""
        values = np.asarray(values, dtype=float)
        if values.shape[-2:] != (self.nx, self.ny):
            raise BasisError(
                f"values shaped {values.shape[-2:]} do not match grid "
                f"({self.nx}, {self.ny})"
            )
        weighted = values * self.weights
        tmp = np.tensordot(weighted, self.ey, axes=([-1], [1]))  # (..., nx, JY)
        full = np.tensordot(tmp, self.ex, axes=([-2], [1]))      # (..., JY, JX)
        full = np.swapaxes(full, -1, -2)
        return full[..., self._jx, self._jy]


@dataclass
class PhysicalField:
    """Nodal values of a field on a Grid."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.nx, self.grid.ny):
            raise BasisError(
                f"values shaped {self.values.shape} do not match grid "
                f"({self.grid.nx}, {self.grid.ny})"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("non-finite nodal values")


def default_grid(basis: SpectralBasis, factor: int = 1) -> Grid:
    """Smallest alias-free grid for the basis, optionally refined by factor."""
    nx = factor * (2 * basis.jx_max + 2)
    ny = factor * (2 * basis.jy_max + 2)
    return Grid(basis, nx, ny)


def synthesize(u: SpectralField, nx: int, ny: int) -> PhysicalField:
    """Evaluate the field on an (nx, ny) nodal grid; rejects aliasing grids."""
    grid = Grid(u.basis, nx, ny)
    return PhysicalField(grid, grid.synth(u.coeffs))


def analyze(f: PhysicalField, basis: SpectralBasis) -> SpectralField:
    """Quadrature projection of nodal values onto the eigenbasis.

    Exact (to roundoff) for band-limited fields on transform-matched grids.
    """
    if f.grid.basis != basis:
        raise BasisError("physical field grid belongs to a different basis")
    return SpectralField(basis, f.grid.project(f.values))


def spectral_projector(u: SpectralField, k: int) -> SpectralField:
    """Keep coefficients with frequency lam in [k, k+1), zero the rest."""
    if k < 0:
        raise ValueError("cluster index must be a non-negative integer")
    mask = (u.basis.lam >= k) & (u.basis.lam < k + 1)
    return SpectralField(u.basis, np.where(mask, u.coeffs, 0.0))


def sinc_multiplier(lam: np.ndarray, t: float) -> np.ndarray:
    """sin(lam*t)/lam with the zero-frequency value t (exactly)."""
    return t * np.sinc(np.asarray(lam) * t / np.pi)


def apply_cos_group(u: SpectralField, t: float) -> SpectralField:
    """cos(t sqrt(A)) u: per-mode multiplication by cos(lam*t)."""
    return SpectralField(u.basis, np.cos(u.basis.lam * t) * u.coeffs)


def apply_sinc_group(u: SpectralField, t: float) -> SpectralField:
    """sin(t sqrt(A))/sqrt(A) u, with the zero mode mapped to t*u."""
    return SpectralField(u.basis, sinc_multiplier(u.basis.lam, t) * u.coeffs)


def apply_rounded_group(u: SpectralField, t: float) -> tuple[SpectralField, SpectralField]:
    """exp(i t B) u where B rounds each frequency to its integer part.

    The output is complex; it is returned as the pair of real coefficient
    vectors (real part, imaginary part).  2*pi-periodic in t.
    """
    phase = t * np.floor(u.basis.lam)
    re = SpectralField(u.basis, np.cos(phase) * u.coeffs)
    im = SpectralField(u.basis, np.sin(phase) * u.coeffs)
    return re, im


def apply_rounding_defect(u: SpectralField) -> SpectralField:
    """(sqrt(A) - B) u: multiplication by the fractional part of each frequency.

    The multipliers lie in [0, 1), so the L2 norm never grows.
    """
    frac = u.basis.lam - np.floor(u.basis.lam)
    return SpectralField(u.basis, frac * u.coeffs)


def pair_evolve(u: SpectralField, v: SpectralField, t: float) -> tuple[SpectralField, SpectralField]:
    """One application of the first-order group S(t) to the pair (u, v).

    Per mode: (u, v) -> (cos(lam t) u + sin(lam t)/lam v,
                         -lam sin(lam t) u + cos(lam t) v),
    which conserves lam^2 u^2 + v^2 exactly for lam > 0 and satisfies the
    group law S(t) S(s) = S(t+s).
    """
    _require_same_basis(u, v)
    lam = u.basis.lam
    c = np.cos(lam * t)
    s = np.sin(lam * t)
    k = sinc_multiplier(lam, t)
    u_new = c * u.coeffs + k * v.coeffs
    v_new = -lam * s * u.coeffs + c * v.coeffs
    return SpectralField(u.basis, u_new), SpectralField(u.basis, v_new)


def group_kernel_bound(basis: SpectralBasis, horizon: float) -> float:
    """Diagnostic sup over t in [0, horizon] and modes of |sin(lam t)/lam|.

    Equals horizon on the Neumann zero mode and min(1/lam, horizon) on
    positive frequencies.
    """
    lam = basis.lam
    out = 0.0
    for lam_j in lam:
        if lam_j == 0.0:
            out = max(out, horizon)
        elif lam_j * horizon >= math.pi / 2:
            out = max(out, 1.0 / lam_j)
        else:
            out = max(out, math.sin(lam_j * horizon) / lam_j)
    return out


def basis_to_json(basis: SpectralBasis) -> str:
    """Serialize as {Lx, Ly, bc, Lambda, modes, eigenvalues}."""
    payload = {
        "Lx": basis.lx,
        "Ly": basis.ly,
        "bc": basis.bc.value,
        "Lambda": basis.cutoff,
        "modes": basis.modes.tolist(),
        "eigenvalues": basis.lam_sq.tolist(),
    }
    return json.dumps(payload, sort_keys=True)


def basis_from_json(text: str) -> SpectralBasis:
    payload = json.loads(text)
    basis = build_basis(
        payload["Lx"],
        payload["Ly"],
        BoundaryCondition(payload["bc"]),
        payload["Lambda"],
    )
    stored = np.array(payload["modes"], dtype=int)
    if stored.shape != basis.modes.shape or not np.all(stored == basis.modes):
        raise BasisError("stored mode list disagrees with rebuilt basis")
    return basis
