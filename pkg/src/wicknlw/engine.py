"""Batched half-spectrum kernels shared by the integrator and the samplers.

States are carried as pairs of complex arrays of shape (..., K, N+1) holding
the columns n2 >= 0 of Hermitian coefficient squares (K = 2N + 1); leading
axes enumerate independent Monte Carlo samples or chains.  All multipliers
used here are real and even in n, so Hermitian symmetry is preserved
automatically and the negative-n2 half is never materialized during a run.

Nonlinear terms are evaluated pointwise on the smallest FFT-friendly
alias-free grid for their degree; since every admissible grid yields the
same retained Fourier coefficients exactly, the grid size is a pure speed
knob here.  Transform scratch buffers are cached per (batch shape, grid)
and fully overwritten on every use, so reuse never affects the numbers;
the cache makes these kernels single-process objects (the concurrency
model parallelizes across processes, never within one engine call).
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
import scipy.fft as sfft

from .fields import alias_free_grid, ball_mask, mode_norms_sq
from .wick import WickContext, hermite_values

__all__ = [
    "half_geometry",
    "rotate",
    "wick_force",
    "run_steps",
    "l2_norm_sq",
    "quadratic_energy_values",
    "wick_potential_values",
    "wick_mass_values",
    "hamiltonian_values",
]


@lru_cache(maxsize=None)
def half_geometry(n_max: int, rho: float):
    """(ball mask, <n>_rho, <n>_rho^2, column weights) in half layout."""
    lam2 = rho + mode_norms_sq(n_max)
    lam2_h = lam2[:, n_max:]
    lam_h = np.sqrt(lam2_h)
    ball_h = ball_mask(n_max)[:, n_max:]
    colw = np.full(n_max + 1, 2.0)
    colw[0] = 1.0
    for a in (lam2_h, lam_h, colw):
        a.setflags(write=False)
    return ball_h, lam_h, lam2_h, colw


# scratch arrays keyed by (leading shape, sizes); contents are fully
# overwritten before every use
_scratch: dict = {}


def _embed_buffer(shape: tuple, m_grid: int) -> np.ndarray:
    key = ("embed", shape, m_grid)
    buf = _scratch.get(key)
    if buf is None:
        buf = np.zeros(shape[:-2] + (m_grid, m_grid // 2 + 1), dtype=complex)
        _scratch[key] = buf
    return buf


def _out_buffer(key_tag: str, shape: tuple) -> np.ndarray:
    key = (key_tag, shape)
    buf = _scratch.get(key)
    if buf is None:
        buf = np.empty(shape, dtype=complex)
        _scratch[key] = buf
    return buf


def clear_scratch() -> None:
    _scratch.clear()


def _grid_values(half: np.ndarray, n_max: int, m_grid: int) -> np.ndarray:
    """sum_n c_n e^{i n.x} on the grid; scratch-buffered embed."""
    spec = _embed_buffer(half.shape, m_grid)
    spec[..., : n_max + 1, : n_max + 1] = half[..., n_max:, :]
    spec[..., m_grid - n_max :, : n_max + 1] = half[..., :n_max, :]
    out = sfft.irfft2(spec, s=(m_grid, m_grid))
    out *= m_grid * m_grid
    return out


def _half_coeffs(values: np.ndarray, n_max: int) -> np.ndarray:
    """Ball-masked Fourier analysis back onto the half lattice."""
    m_grid = values.shape[-1]
    spec = sfft.rfft2(values)
    spec *= 1.0 / (m_grid * m_grid)
    out = _out_buffer("extract", values.shape[:-2] + (2 * n_max + 1, n_max + 1))
    out[..., n_max:, :] = spec[..., : n_max + 1, : n_max + 1]
    out[..., :n_max, :] = spec[..., m_grid - n_max :, : n_max + 1]
    out *= half_geometry(n_max, 1.0)[0]
    return out


def _hermite_grid_inplace(g: np.ndarray, k: int, sigma: float) -> np.ndarray:
    """H_k(g; sigma) with minimal passes; overwrites scratch, not g."""
    if k == 2:
        out = g * g
        out -= sigma
        return out
    if k == 3:
        out = g * g
        out -= 3.0 * sigma
        out *= g
        return out
    if k == 4:
        g2 = g * g
        out = g2 * g2
        g2 *= -6.0 * sigma
        out += g2
        out += 3.0 * sigma * sigma
        return out
    return hermite_values(k, g, sigma)


def rotate(u: np.ndarray, v: np.ndarray, n_max: int, rho: float,
           t: float) -> tuple[np.ndarray, np.ndarray]:
    """Exact free Klein-Gordon flow by time t, mode by mode."""
    _, lam, _, _ = half_geometry(n_max, rho)
    c, s = np.cos(t * lam), np.sin(t * lam)
    return c * u + (s / lam) * v, -lam * s * u + c * v


def wick_force(u: np.ndarray, ctx: WickContext,
               m_grid: int | None = None) -> np.ndarray:
    """P_N[H_{2m+1}(u; sigma)] in half layout (the defocusing term's magnitude).

    ``m_grid`` defaults to the smallest alias-free size for degree 2m + 1.
    """
    if m_grid is None:
        m_grid = alias_free_grid(ctx.n_max, 2 * ctx.m + 1)
    g = _grid_values(u, ctx.n_max, m_grid)
    h = _hermite_grid_inplace(g, 2 * ctx.m + 1, ctx.sigma)
    return _half_coeffs(h, ctx.n_max)


def run_steps(u: np.ndarray, v: np.ndarray, n_max: int, rho: float,
              dt: float, n_steps: int, force) -> tuple[np.ndarray, np.ndarray]:
    """One Strang segment of n_steps: half kick, rotations with interior
    full kicks (the two adjacent half kicks merged), final half kick.

    ``force(u) -> array`` is the full nonlinear contribution to dv/dt; its
    result may live in scratch storage, so it is consumed immediately.
    Inputs are not modified.
    """
    if n_steps < 1:
        return u, v
    _, lam, _, _ = half_geometry(n_max, rho)
    c, s = np.cos(dt * lam), np.sin(dt * lam)
    s_over, s_lam = s / lam, s * lam

    kick = np.multiply(force(u), 0.5 * dt)
    v = v + kick
    u = u.copy()
    new_u = np.empty_like(u)
    tmp = np.empty_like(u)
    for k in range(n_steps):
        np.multiply(c, u, out=new_u)
        np.multiply(s_over, v, out=tmp)
        new_u += tmp
        np.multiply(c, v, out=v)
        np.multiply(s_lam, u, out=tmp)
        v -= tmp
        u, new_u = new_u, u
        if k < n_steps - 1:
            np.multiply(force(u), dt, out=tmp)
            v += tmp
    np.multiply(force(u), 0.5 * dt, out=tmp)
    v += tmp
    return u, v


def l2_norm_sq(u: np.ndarray, n_max: int) -> np.ndarray:
    """Parseval sum over the full lattice from the half layout."""
    colw = half_geometry(n_max, 1.0)[3]
    return np.sum(colw * np.abs(u) ** 2, axis=(-2, -1))


def quadratic_energy_values(u: np.ndarray, v: np.ndarray, n_max: int,
                            rho: float) -> np.ndarray:
    """(1/2) sum <n>_rho^2 |u_n|^2 + (1/2) sum |v_n|^2, batched."""
    _, _, lam2, colw = half_geometry(n_max, rho)
    return 0.5 * np.sum(colw * (lam2 * np.abs(u) ** 2 + np.abs(v) ** 2),
                        axis=(-2, -1))


def wick_potential_values(u: np.ndarray, ctx: WickContext,
                          m_grid: int | None = None) -> np.ndarray:
    """Average of H_{2m+2}(u; sigma) over the grid, divided by 2m + 2."""
    deg = 2 * ctx.m + 2
    if m_grid is None:
        m_grid = alias_free_grid(ctx.n_max, deg)
    g = _grid_values(u, ctx.n_max, m_grid)
    h = _hermite_grid_inplace(g, deg, ctx.sigma)
    return np.mean(h, axis=(-2, -1)) / deg


def wick_mass_values(u: np.ndarray, ctx: WickContext) -> np.ndarray:
    """Integral of the Wick square: ||u||_{L^2}^2 - sigma, batched."""
    return l2_norm_sq(u, ctx.n_max) - ctx.sigma


def hamiltonian_values(u: np.ndarray, v: np.ndarray,
                       ctx: WickContext) -> np.ndarray:
    """Wick-ordered energy: quadratic part plus the Wick potential."""
    return (quadratic_energy_values(u, v, ctx.n_max, ctx.rho)
            + wick_potential_values(u, ctx))
