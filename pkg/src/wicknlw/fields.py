"""Real scalar fields on the 2-torus in spectral and collocation form.

Conventions used throughout the package:

* The torus is the 2*pi-periodic square with the *normalized* measure
  dx / (2*pi)^2, so the characters e^{i n.x}, n in Z^2, are orthonormal
  and every integral over the torus is a plain average over grid nodes.
* A field with cutoff ``n_max`` stores complex coefficients on the square
  ``{|n_i| <= n_max}``; only modes inside the Euclidean ball
  ``|n| <= n_max`` may be nonzero.  Reality of the field is encoded as
  Hermitian symmetry ``c(-n) = conj(c(n))``.
* Collocation grids are uniform M x M grids on [0, 2*pi)^2.  A grid is
  alias-free for a product of degree p of cutoff-N fields whenever
  ``M > (p + 1) * N``; helper :func:`alias_free_grid` returns the smallest
  FFT-friendly size satisfying that bound.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft as sfft

__all__ = [
    "SpectralField",
    "GridField",
    "SobolevNormSpec",
    "project",
    "to_grid",
    "from_grid",
    "sobolev_norm",
    "alias_free_grid",
]


@lru_cache(maxsize=None)
def _lattice(n_max: int):
    """Mode index grids and the Euclidean-ball mask for cutoff n_max."""
    n1 = np.arange(-n_max, n_max + 1)
    nx, ny = np.meshgrid(n1, n1, indexing="ij")
    ball = nx * nx + ny * ny <= n_max * n_max
    for a in (nx, ny, ball):
        a.setflags(write=False)
    return nx, ny, ball


def mode_norms_sq(n_max: int) -> np.ndarray:
    """|n|^2 on the coefficient square of a cutoff-n_max field."""
    nx, ny, _ = _lattice(n_max)
    return (nx * nx + ny * ny).astype(float)


def ball_mask(n_max: int) -> np.ndarray:
    return _lattice(n_max)[2]


def alias_free_grid(n_max: int, degree: int) -> int:
    """Smallest FFT-friendly grid size M with M > (degree + 1) * n_max.

    On such a grid the retained coefficients ``|n| <= n_max`` of a pointwise
    product of ``degree`` cutoff-n_max fields are exact (no aliased images).
    Sizes are 5-smooth so the real transforms stay fast.
    """
    target = (degree + 1) * n_max + 1
    return sfft.next_fast_len(max(target, 4), real=True)


# ---------------------------------------------------------------------------
# half-spectrum kernels
#
# All transforms run through the rfft half-spectrum: a Hermitian coefficient
# square (K, K) is equivalent to its columns n2 >= 0, shape (K, n_max + 1).
# Batched arrays carry leading dimensions untouched.
# ---------------------------------------------------------------------------


def half_from_full(coeffs: np.ndarray) -> np.ndarray:
    """Columns n2 in [0, n_max] of a full Hermitian coefficient square."""
    n_max = (coeffs.shape[-1] - 1) // 2
    return coeffs[..., :, n_max:]


def full_from_half(half: np.ndarray) -> np.ndarray:
    """Rebuild the full square from the n2 >= 0 columns by conjugate mirror."""
    k = half.shape[-2]
    n_max = (k - 1) // 2
    full = np.empty(half.shape[:-1] + (k,), dtype=complex)
    full[..., :, n_max:] = half
    full[..., :, :n_max] = np.conj(half[..., ::-1, :0:-1])
    return full


def grid_from_half(half: np.ndarray, m_grid: int) -> np.ndarray:
    """Evaluate sum_n c_n e^{i n.x} on the M x M grid (result is real)."""
    n_max = (half.shape[-2] - 1) // 2
    if m_grid <= 2 * n_max:
        raise ValueError(
            f"grid size {m_grid} aliases a cutoff-{n_max} field; need M > {2 * n_max}"
        )
    spec = np.zeros(half.shape[:-2] + (m_grid, m_grid // 2 + 1), dtype=complex)
    spec[..., : n_max + 1, : n_max + 1] = half[..., n_max:, :]
    spec[..., m_grid - n_max :, : n_max + 1] = half[..., :n_max, :]
    return sfft.irfft2(spec, s=(m_grid, m_grid)) * (m_grid * m_grid)


def half_from_grid(values: np.ndarray, n_max: int) -> np.ndarray:
    """Discrete Fourier analysis of a real grid, kept on |n| <= n_max.

    Uses the normalized inner product (plain average over nodes), so it is
    the exact inverse of :func:`grid_from_half` for alias-free grids.
    """
    m_grid = values.shape[-1]
    if m_grid <= 2 * n_max:
        raise ValueError(
            f"grid size {m_grid} cannot resolve cutoff {n_max}; need M > {2 * n_max}"
        )
    spec = sfft.rfft2(values) / (m_grid * m_grid)
    half = np.empty(values.shape[:-2] + (2 * n_max + 1, n_max + 1), dtype=complex)
    half[..., n_max:, :] = spec[..., : n_max + 1, : n_max + 1]
    half[..., :n_max, :] = spec[..., m_grid - n_max :, : n_max + 1]
    _, _, ball = _lattice(n_max)
    half *= ball[:, n_max:]
    return half


def _symmetrize(coeffs: np.ndarray) -> np.ndarray:
    """Exact Hermitian symmetrization c <- (c + conj(c(-n))) / 2."""
    return 0.5 * (coeffs + np.conj(coeffs[..., ::-1, ::-1]))


# ---------------------------------------------------------------------------
# public field types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpectralField:
    """Hermitian Fourier coefficients of a real field, cutoff ``n_max``.

    ``coeffs[i, j]`` is the coefficient of the mode ``(i - n_max, j - n_max)``.
    Instances are immutable; all operations return new fields.
    """

    n_max: int
    coeffs: np.ndarray

    def __post_init__(self) -> None:
        k = 2 * self.n_max + 1
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != (k, k):
            raise ValueError(f"coefficient array must be ({k}, {k}), got {c.shape}")
        scale = float(np.max(np.abs(c))) if c.size else 0.0
        tol = 1e-12 * max(scale, 1.0)
        if np.max(np.abs(c - np.conj(c[::-1, ::-1]))) > tol:
            raise ValueError("coefficients are not Hermitian symmetric")
        if np.max(np.abs(c[~ball_mask(self.n_max)]), initial=0.0) > tol:
            raise ValueError(f"coefficients outside the ball |n| <= {self.n_max}")
        c = _symmetrize(c)
        c[~ball_mask(self.n_max)] = 0.0
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zeros(cls, n_max: int) -> "SpectralField":
        k = 2 * n_max + 1
        return cls(n_max, np.zeros((k, k), dtype=complex))

    @classmethod
    def from_modes(cls, n_max: int, modes: dict) -> "SpectralField":
        """Build a field from ``{(n1, n2): value}``; mirror modes are filled in."""
        k = 2 * n_max + 1
        c = np.zeros((k, k), dtype=complex)
        for (n1, n2), val in modes.items():
            c[n1 + n_max, n2 + n_max] += val
            if (n1, n2) != (0, 0):
                c[-n1 + n_max, -n2 + n_max] += np.conj(val)
        return cls(n_max, c)

    def coeff(self, n1: int, n2: int) -> complex:
        """Coefficient of mode (n1, n2); zero outside the stored square."""
        if abs(n1) > self.n_max or abs(n2) > self.n_max:
            return 0.0 + 0.0j
        return complex(self.coeffs[n1 + self.n_max, n2 + self.n_max])

    def l2_norm_sq(self) -> float:
        """Squared L^2 norm (normalized measure) via Parseval."""
        return float(np.sum(np.abs(self.coeffs) ** 2))

    def __add__(self, other: "SpectralField") -> "SpectralField":
        if other.n_max != self.n_max:
            raise ValueError("cutoffs differ; project first")
        return SpectralField(self.n_max, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        return self + (-other)

    def __neg__(self) -> "SpectralField":
        return SpectralField(self.n_max, -self.coeffs)

    def __mul__(self, scalar: float) -> "SpectralField":
        return SpectralField(self.n_max, self.coeffs * float(scalar))

    __rmul__ = __mul__


@dataclass(frozen=True)
class GridField:
    """Real field values on the uniform m_grid x m_grid collocation grid."""

    m_grid: int
    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.m_grid, self.m_grid):
            raise ValueError(
                f"values must be ({self.m_grid}, {self.m_grid}), got {v.shape}"
            )
        if not np.all(np.isfinite(v)):
            raise ValueError("grid values must be finite")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def mean(self) -> float:
        """Integral over the torus in the normalized measure."""
        return float(np.mean(self.values))


@dataclass(frozen=True)
class SobolevNormSpec:
    """Parameters of the weighted norm || <grad>^s . ||_{L^r}."""

    s: float
    r: float = 2.0
    rho: float = 1.0

    def __post_init__(self) -> None:
        if self.r < 2:
            raise ValueError("integrability exponent r must be >= 2")
        if self.rho <= 0:
            raise ValueError("mass parameter rho must be positive")


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def project(f: SpectralField, n_cut: int) -> SpectralField:
    """Sharp Fourier projection onto the Euclidean ball |n| <= n_cut.

    The output cutoff is min(n_cut, f.n_max); projecting above the stored
    cutoff returns f unchanged.
    """
    if n_cut < 0:
        raise ValueError("projection cutoff must be nonnegative")
    if n_cut >= f.n_max:
        return f
    lo, hi = f.n_max - n_cut, f.n_max + n_cut + 1
    c = f.coeffs[lo:hi, lo:hi].copy()
    c[~ball_mask(n_cut)] = 0.0
    return SpectralField(n_cut, c)


def to_grid(f: SpectralField, m_grid: int) -> GridField:
    """Evaluate the field on the M x M collocation grid (M > 2 * n_max)."""
    vals = grid_from_half(half_from_full(f.coeffs), m_grid)
    return GridField(m_grid, vals)


def from_grid(g: GridField, n_cut: int) -> SpectralField:
    """Fourier analysis of a grid field, truncated to the ball |n| <= n_cut."""
    half = half_from_grid(g.values, n_cut)
    return SpectralField(n_cut, _symmetrize(full_from_half(half)))


def grid_points(m_grid: int) -> np.ndarray:
    """1-d array of node coordinates 2*pi*j/M."""
    return 2.0 * np.pi * np.arange(m_grid) / m_grid


def sobolev_norm(f: SpectralField, spec: SobolevNormSpec) -> float:
    """Weighted Sobolev norm with the plain bracket <n> = sqrt(1 + |n|^2).

    For r = 2 this is the coefficient-side sum
    ``(sum <n>^{2s} |c_n|^2)^{1/2}``.  For r > 2 the coefficients are
    multiplied by <n>^s and the grid L^r norm (mean of |.|^r, then r-th
    root) is taken on a refined grid; this is exact for even integer r
    and a high-order quadrature otherwise.
    """
    bracket_sq = 1.0 + mode_norms_sq(f.n_max)
    if spec.r == 2.0:
        w = bracket_sq ** spec.s
        return float(np.sqrt(np.sum(w * np.abs(f.coeffs) ** 2)))
    weighted = SpectralField(f.n_max, f.coeffs * bracket_sq ** (spec.s / 2.0))
    m = alias_free_grid(f.n_max, max(int(np.ceil(spec.r)) - 1, 1))
    vals = to_grid(weighted, m).values
    return float(np.mean(np.abs(vals) ** spec.r) ** (1.0 / spec.r))
