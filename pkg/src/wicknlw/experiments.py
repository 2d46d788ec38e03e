"""The headline studies: measure invariance, chaos moments, scaling limit.

Every study is seed-deterministic: Monte Carlo units (samples, chains,
epsilon rows) derive their randomness from counter-based streams, so a
rerun with the same configuration reproduces all numbers bit-exactly on
one platform regardless of how work is chunked.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import engine
from .dynamics import DynParams, IntegrationError, Trajectory, evolve
from .fields import (
    SobolevNormSpec,
    SpectralField,
    alias_free_grid,
    grid_from_half,
    half_from_grid,
    sobolev_norm,
)
from .free_field import (
    MuParams,
    PhaseState,
    chaos_second_moment,
    covariance_field,
    point_variance,
    sample_free_field,
    sample_pair_half,
)
from .gibbs import ChainOptions, sample_gibbs_arrays
from .wick import WickContext, hermite_values

__all__ = [
    "DEFAULT_OBSERVABLES",
    "observable_matrix",
    "InvarianceReport",
    "invariance_test",
    "ChaosReport",
    "chaos_convergence_study",
    "hermite_moment_study",
    "Nonlinearity",
    "NONLINEARITIES",
    "counterterm_mass",
    "scaled_forcing_grid",
    "scaled_force_fn",
    "evolve_scaled",
    "UniversalityReport",
    "universality_experiment",
]

# fixed chunk sizes keep reductions identical run to run
_EVOLVE_CHUNK = 400
_SAMPLE_CHUNK = 1024

DEFAULT_OBSERVABLES = (
    "wick_mass",
    "wick_potential",
    "mode_sq_0_0",
    "mode_sq_1_0",
    "mode_sq_1_1",
    "quadratic_energy",
)


def observable_matrix(u: np.ndarray, v: np.ndarray, ctx: WickContext) -> np.ndarray:
    """Default observables per sample, columns as in DEFAULT_OBSERVABLES."""
    n = ctx.n_max
    cols = [
        engine.wick_mass_values(u, ctx),
        engine.wick_potential_values(u, ctx),
        np.abs(u[..., n, 0]) ** 2,
        np.abs(u[..., n + 1, 0]) ** 2 if n >= 1 else np.zeros(u.shape[:-2]),
        np.abs(u[..., n + 1, 1]) ** 2 if n >= 1 else np.zeros(u.shape[:-2]),
        engine.quadratic_energy_values(u, v, ctx.n_max, ctx.rho),
    ]
    return np.stack(cols, axis=-1)


# ---------------------------------------------------------------------------
# invariance of the Gibbs measure under the truncated flow
# ---------------------------------------------------------------------------


@dataclass
class InvarianceReport:
    """Per-observable drift between the initial and evolved ensembles."""

    observables: list[dict]
    n_samples: int
    n_failed: int
    t_final: float
    dt: float
    max_rel_energy_drift: float
    mean_rel_energy_drift: float
    sampler_diagnostics: dict
    z_threshold: float
    drift_tol: float
    passed: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _zscore(a0: np.ndarray, a1: np.ndarray) -> tuple[float, float, float, float, float]:
    n = len(a0)
    m0, m1 = float(a0.mean()), float(a1.mean())
    s0 = float(a0.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    s1 = float(a1.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    denom = math.hypot(s0, s1)
    z = 0.0 if m1 == m0 else (m1 - m0) / denom
    return m0, s0, m1, s1, z


def invariance_test(dyn: DynParams, t_final: float, n_samples: int, seed: int,
                    method: str = "hmc", opts: ChainOptions | None = None,
                    z_threshold: float = 3.0, drift_tol: float = 1e-3,
                    ) -> InvarianceReport:
    """Draw Gibbs samples, evolve each by t_final, and z-test every default
    observable between the two time slices.

    PASS requires all |z| <= z_threshold and a maximal relative energy
    drift below drift_tol.  The z denominator combines the two slices'
    standard errors without the (favorable) cross-covariance, which makes
    the test conservative for independent samples.
    """
    if t_final < 0:
        raise ValueError("final time must be nonnegative")
    if method == "importance" and t_final > 0:
        # the importance ensemble is weighted; the paired z-test below
        # assumes equally weighted samples
        raise ValueError("invariance testing needs an unweighted sampler "
                         "(metropolis or hmc)")
    ctx = dyn.ctx
    params = MuParams(ctx.n_max, ctx.rho, seed)
    u, v, _, diag = sample_gibbs_arrays(params, ctx, n_samples, method, opts)

    obs0 = observable_matrix(u, v, ctx)
    h0 = engine.hamiltonian_values(u, v, ctx)

    n_steps = int(np.floor(t_final / dyn.dt + 1e-9))
    remainder = t_final - n_steps * dyn.dt
    if remainder < 1e-9 * dyn.dt:
        remainder = 0.0
    lam = dyn.lam
    kick = lambda x: lam * engine.wick_force(x, ctx)

    ok = np.ones(n_samples, dtype=bool)
    if t_final > 0:
        for lo in range(0, n_samples, _EVOLVE_CHUNK):
            hi = min(lo + _EVOLVE_CHUNK, n_samples)
            uu, vv = u[lo:hi], v[lo:hi]
            if n_steps:
                uu, vv = engine.run_steps(uu, vv, ctx.n_max, ctx.rho, dyn.dt,
                                          n_steps, kick)
            if remainder:
                uu, vv = engine.run_steps(uu, vv, ctx.n_max, ctx.rho,
                                          remainder, 1, kick)
            u[lo:hi], v[lo:hi] = uu, vv
            good = (np.isfinite(uu).reshape(hi - lo, -1).all(axis=1)
                    & np.isfinite(vv).reshape(hi - lo, -1).all(axis=1))
            ok[lo:hi] = good
    n_failed = int((~ok).sum())

    obs1 = observable_matrix(u[ok], v[ok], ctx)
    h1 = engine.hamiltonian_values(u[ok], v[ok], ctx)
    drift = np.abs(h1 - h0[ok]) / (1.0 + np.abs(h0[ok]))

    rows = []
    all_pass = True
    for j, name in enumerate(DEFAULT_OBSERVABLES):
        m0, s0, m1, s1, z = _zscore(obs0[ok][:, j], obs1[:, j])
        rows.append({"observable": name, "mean_t0": m0, "stderr_t0": s0,
                     "mean_T": m1, "stderr_T": s1, "z_score": z})
        all_pass &= abs(z) <= z_threshold
    max_drift = float(drift.max()) if len(drift) else 0.0
    mean_drift = float(drift.mean()) if len(drift) else 0.0
    passed = bool(all_pass and max_drift <= drift_tol and n_failed == 0)
    return InvarianceReport(rows, n_samples, n_failed, t_final, dyn.dt,
                            max_drift, mean_drift, diag, z_threshold,
                            drift_tol, passed)


# ---------------------------------------------------------------------------
# Wiener chaos: second moments, orthogonality, Cauchy refinement
# ---------------------------------------------------------------------------


@dataclass
class ChaosReport:
    """Monte Carlo chaos moments against the exact convolution oracle."""

    moment_rows: list[dict]
    cross_rows: list[dict]
    cauchy_rows: list[dict]
    n_samples: int
    t_eval: float
    eps_reg: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _truncate_half(u: np.ndarray, n_from: int, n_to: int) -> np.ndarray:
    """Restrict half-layout coefficients to the ball of a smaller cutoff."""
    if n_to > n_from:
        raise ValueError("cannot extend a cutoff by truncation")
    lo = n_from - n_to
    out = u[..., lo : lo + 2 * n_to + 1, : n_to + 1].copy()
    out *= engine.half_geometry(n_to, 1.0)[0]
    return out


def wick_power_spectrum(z: np.ndarray, ell: int, sigma: float,
                        n_cut: int) -> np.ndarray:
    """Complete spectrum of H_ell(z; sigma) for cutoff-n_cut z, half layout.

    Uses a grid large enough (M > 2 ell N) that every output mode up to
    the full support ell * N is exact.
    """
    import scipy.fft as sfft

    m_grid = sfft.next_fast_len(2 * ell * n_cut + 1, real=True)
    m_grid = max(m_grid, 4)
    g = grid_from_half(z, m_grid)
    return half_from_grid(hermite_values(ell, g, sigma), ell * n_cut)


def _mode_coeff(half: np.ndarray, n_max: int, mode: tuple[int, int]) -> np.ndarray:
    """Coefficient of a mode from the half layout (conjugate for n2 < 0)."""
    n1, n2 = mode
    if abs(n1) > n_max or abs(n2) > n_max:
        return np.zeros(half.shape[:-2], dtype=complex)
    if n2 >= 0:
        return half[..., n1 + n_max, n2]
    return np.conj(half[..., -n1 + n_max, -n2])


def chaos_convergence_study(ell_max: int, n_list: list[int], rho: float,
                            t_eval: float, eps_reg: float, n_samples: int,
                            seed: int,
                            modes: tuple = ((0, 0), (1, 0), (2, 1)),
                            cauchy: bool = True) -> ChaosReport:
    """Moments of Wick powers of the free evolution against exact values.

    For each degree ell <= ell_max and cutoff N in n_list, estimates
    E|<wick power, e_n>|^2 on the given mode set and the cross moments
    between distinct modes (exactly zero in law).  With ``cauchy`` also
    estimates d(N) = E ||:z_N^ell: - :z_{2N}^ell:||_{H^{-eps_reg}} from the
    same nested samples, the refinement sequence whose decay certifies
    convergence of the renormalized powers.
    """
    if ell_max < 1 or ell_max > 4:
        raise ValueError("chaos degree must be in 1..4")
    if list(n_list) != sorted(n_list):
        raise ValueError("cutoff list must be increasing")
    n_hi = 2 * max(n_list) if cauchy else max(n_list)
    params = MuParams(n_hi, rho, seed)
    cuts = sorted({*n_list, *(2 * n for n in n_list)} if cauchy else set(n_list))
    sig = {n: point_variance(n, rho) for n in cuts}

    # memory-driven chunking; the estimators are chunk-invariant because all
    # reductions run over the concatenated per-sample arrays
    import scipy.fft as sfft

    m_big = max(sfft.next_fast_len(2 * ell_max * c + 1, real=True) for c in cuts)
    chunk = int(min(_SAMPLE_CHUNK, max(32, 3.0e7 // (m_big * m_big))))

    acc_sq = {}    # (ell, n_cut, mode) -> list of |c|^2 chunk arrays
    acc_cross = {}
    acc_d = {}
    for lo in range(0, n_samples, chunk):
        hi = min(lo + chunk, n_samples)
        u0, v0 = sample_pair_half(params, hi - lo, start_index=lo)
        z_t, _ = engine.rotate(u0, v0, n_hi, rho, t_eval)
        spectra = {}
        for n_cut in cuts:
            z_n = _truncate_half(z_t, n_hi, n_cut)
            for ell in range(1, ell_max + 1):
                spectra[(ell, n_cut)] = wick_power_spectrum(
                    z_n, ell, sig[n_cut], n_cut)
        for n_cut in n_list:
            for ell in range(1, ell_max + 1):
                sp = spectra[(ell, n_cut)]
                coeffs = {mo: _mode_coeff(sp, ell * n_cut, mo) for mo in modes}
                for mo in modes:
                    acc_sq.setdefault((ell, n_cut, mo), []).append(
                        np.abs(coeffs[mo]) ** 2)
                for i in range(len(modes)):
                    for j in range(i + 1, len(modes)):
                        key = (ell, n_cut, modes[i], modes[j])
                        acc_cross.setdefault(key, []).append(
                            coeffs[modes[i]] * np.conj(coeffs[modes[j]]))
                if cauchy:
                    sp2 = spectra[(ell, 2 * n_cut)]
                    r_small, r_big = ell * n_cut, 2 * ell * n_cut
                    diff = sp2.copy()
                    lo_r = r_big - r_small
                    diff[..., lo_r : lo_r + 2 * r_small + 1, : r_small + 1] -= sp
                    acc_d.setdefault((ell, n_cut), []).append(
                        _weighted_norm(diff, r_big, -eps_reg))
    moment_rows = []
    for (ell, n_cut, mo), chunks in acc_sq.items():
        vals = np.concatenate(chunks)
        moment_rows.append({
            "ell": ell, "n_max": n_cut, "mode": list(mo),
            "mc_estimate": float(vals.mean()),
            "stderr": float(vals.std(ddof=1) / math.sqrt(len(vals))),
            "analytic": chaos_second_moment(ell, n_cut, rho, mo),
        })
    cross_rows = []
    for (ell, n_cut, mo_a, mo_b), chunks in acc_cross.items():
        vals = np.concatenate(chunks)
        se_re = float(vals.real.std(ddof=1) / math.sqrt(len(vals)))
        se_im = float(vals.imag.std(ddof=1) / math.sqrt(len(vals)))
        cross_rows.append({
            "ell": ell, "n_max": n_cut,
            "mode_a": list(mo_a), "mode_b": list(mo_b),
            "mean_real": float(vals.real.mean()), "stderr_real": se_re,
            "mean_imag": float(vals.imag.mean()), "stderr_imag": se_im,
        })
    cauchy_rows = []
    for (ell, n_cut), chunks in acc_d.items():
        vals = np.concatenate(chunks)
        cauchy_rows.append({
            "ell": ell, "n_max": n_cut,
            "distance": float(vals.mean()),
            "stderr": float(vals.std(ddof=1) / math.sqrt(len(vals))),
        })
    return ChaosReport(moment_rows, cross_rows, cauchy_rows, n_samples,
                       t_eval, eps_reg)


def _weighted_norm(half: np.ndarray, n_max: int, s: float) -> np.ndarray:
    """Batched H^s norm (plain bracket) straight from half-layout arrays."""
    from .fields import mode_norms_sq

    bracket = (1.0 + mode_norms_sq(n_max)[:, n_max:]) ** s
    colw = engine.half_geometry(n_max, 1.0)[3]
    return np.sqrt(np.sum(colw * bracket * np.abs(half) ** 2, axis=(-2, -1)))


# ---------------------------------------------------------------------------
# Gaussian moment identities for Hermite polynomials of field evaluations
# ---------------------------------------------------------------------------


def hermite_moment_study(n_max: int, rho: float, k_max: int, n_samples: int,
                         seed: int, t_eval: float = 0.0,
                         points: tuple = ((0.0, 0.0), (0.4, 0.0), (1.1, 2.2)),
                         ) -> list[dict]:
    """Monte Carlo E[H_k(W_x) H_m(W_y)] against delta_{km} k! <f, g>^k.

    W_x is the normalized field evaluation z(t, x)/sqrt(sigma); the unit
    test directions have exact inner product gamma(x - y)/sigma, computed
    from the covariance coefficients.  Pairs are (x0, x0) plus (x0, y) for
    the remaining points.
    """
    params = MuParams(n_max, rho, seed)
    sigma = point_variance(n_max, rho)
    gam = covariance_field(n_max, rho)
    nx, ny = np.meshgrid(np.arange(-n_max, n_max + 1),
                         np.arange(-n_max, n_max + 1), indexing="ij")

    def gamma_at(dx: float, dy: float) -> float:
        return float(np.real(np.sum(gam.coeffs * np.exp(1j * (nx * dx + ny * dy)))))

    pairs = [(points[0], points[0])] + [(points[0], q) for q in points[1:]]
    phases = []
    for x, y in pairs:
        phases.append((np.exp(1j * (nx * x[0] + ny * x[1])).ravel(),
                       np.exp(1j * (nx * y[0] + ny * y[1])).ravel()))

    vals_x = [[] for _ in pairs]
    vals_y = [[] for _ in pairs]
    for lo in range(0, n_samples, _SAMPLE_CHUNK):
        hi = min(lo + _SAMPLE_CHUNK, n_samples)
        u0, v0 = sample_pair_half(params, hi - lo, start_index=lo)
        z, _ = engine.rotate(u0, v0, n_max, rho, t_eval)
        from .fields import full_from_half

        flat = full_from_half(z).reshape(hi - lo, -1)
        for idx, (px, py) in enumerate(phases):
            vals_x[idx].append(np.real(flat @ px) / math.sqrt(sigma))
            vals_y[idx].append(np.real(flat @ py) / math.sqrt(sigma))

    rows = []
    for idx, (x, y) in enumerate(pairs):
        wx = np.concatenate(vals_x[idx])
        wy = np.concatenate(vals_y[idx])
        inner = gamma_at(x[0] - y[0], x[1] - y[1]) / sigma
        for k in range(k_max + 1):
            hk = hermite_values(k, wx, 1.0)
            for m in range(k_max + 1):
                hm = hermite_values(m, wy, 1.0)
                prod = hk * hm
                expected = math.factorial(k) * inner ** k if k == m else 0.0
                rows.append({
                    "x": list(x), "y": list(y), "k": k, "m": m,
                    "mc_estimate": float(prod.mean()),
                    "stderr": float(prod.std(ddof=1) / math.sqrt(len(prod))),
                    "expected": expected,
                })
    return rows


# ---------------------------------------------------------------------------
# weak universality scaling limit
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Nonlinearity:
    """A microscopic nonlinearity with the derivatives the scaling needs."""

    name: str
    fn: object            # vectorized x -> f(x)
    d1: float             # f'(0)
    d3: float             # f'''(0)
    d4_bound: float       # sup |f''''| on the operating range

    @property
    def limit_coupling(self) -> float:
        """Coefficient of the limiting renormalized cubic term: f'''(0)/6."""
        return self.d3 / 6.0


NONLINEARITIES = {
    "sin": Nonlinearity("sin", np.sin, 1.0, -1.0, 1.0),
    "cubic": Nonlinearity("cubic", lambda x: -(x ** 3) / 6.0, 0.0, -1.0, 0.0),
    "linear": Nonlinearity("linear", lambda x: x, 1.0, 0.0, 0.0),
}


def counterterm_mass(f: Nonlinearity, eps: float, rho: float) -> float:
    """The mass tuning f'(0) + eps^2 rho + eps^2 sigma_eps f'''(0)/2.

    sigma_eps is the point variance at the data cutoff floor(1/eps); with
    this choice the linear term of the rescaled forcing cancels exactly.
    """
    if not 0 < eps <= 1:
        raise ValueError("scaling parameter eps must lie in (0, 1]")
    sigma_eps = point_variance(int(math.floor(1.0 / eps)), rho)
    return f.d1 + eps * eps * rho + eps * eps * sigma_eps * f.d3 / 2.0


def scaled_forcing_grid(f: Nonlinearity, eps: float, rho: float,
                        values: np.ndarray) -> np.ndarray:
    """Pointwise rescaled forcing eps^{-3} { f(eps u) + eps (eps^2 rho - rho_eps) u }."""
    rho_e = counterterm_mass(f, eps, rho)
    lin = (eps * eps * rho - rho_e) / (eps * eps)
    return f.fn(eps * values) / eps ** 3 + lin * values


def scaled_force_fn(f: Nonlinearity, eps: float, rho: float, n_cut: int):
    """Spectral kick for the rescaled microscopic equation at cutoff n_cut.

    Pointwise evaluation on a grid alias-safe through the quartic Taylor
    order, then projection back to the working cutoff.
    """
    m_grid = alias_free_grid(n_cut, 4)
    rho_e = counterterm_mass(f, eps, rho)
    lin = (eps * eps * rho - rho_e) / (eps * eps)
    inv3 = eps ** -3

    def force(u: np.ndarray) -> np.ndarray:
        g = grid_from_half(u, m_grid)
        return half_from_grid(inv3 * f.fn(eps * g) + lin * g, n_cut)

    return force


def evolve_scaled(eps: float, f: Nonlinearity, rho: float, t_final: float,
                  dt: float, seed: int, record_every: int = 1,
                  n_master: int | None = None, sample_index: int = 0,
                  ) -> Trajectory:
    """Integrate the rescaled microscopic equation at cutoff floor(1/eps).

    Initial data is the projection of the (seed, sample_index) free sample
    drawn at cutoff ``n_master`` (default: the working cutoff), so runs at
    different eps under one seed share nested data.
    """
    n_cut = int(math.floor(1.0 / eps))
    if n_master is None:
        n_master = n_cut
    if n_master < n_cut:
        raise ValueError("master cutoff must dominate the working cutoff")
    master = sample_free_field(MuParams(n_master, rho, seed), sample_index)
    from .fields import project

    state = PhaseState(project(master.u, n_cut), project(master.v, n_cut), rho)
    ctx = WickContext.create(n_cut, rho, 1)
    dyn = DynParams(ctx, dt, lam=f.limit_coupling)
    force = scaled_force_fn(f, eps, rho, n_cut)
    return evolve(state, t_final, dyn, record_every=record_every, force=force)


@dataclass
class UniversalityReport:
    """Distance ladder between rescaled solutions and the renormalized limit."""

    rows: list[dict]
    f_name: str
    s: float
    t_final: float
    dt: float
    seed: int
    n_ref: int
    ref_refinement_distance: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    def distances(self) -> list[float]:
        return [r["sup_distance"] for r in self.rows if not r["failed"]]


def _embed(fld: SpectralField, n_max: int) -> SpectralField:
    if fld.n_max == n_max:
        return fld
    k = 2 * n_max + 1
    c = np.zeros((k, k), dtype=complex)
    lo = n_max - fld.n_max
    c[lo : lo + 2 * fld.n_max + 1, lo : lo + 2 * fld.n_max + 1] = fld.coeffs
    return SpectralField(n_max, c)


def _sup_distance(traj_a: Trajectory, traj_b: Trajectory, n_max: int,
                  spec: SobolevNormSpec) -> float:
    if len(traj_a.times) != len(traj_b.times):
        raise ValueError("trajectories must share recording times")
    worst = 0.0
    for sa, sb in zip(traj_a.states, traj_b.states):
        diff = _embed(sa.u, n_max) - _embed(sb.u, n_max)
        worst = max(worst, sobolev_norm(diff, spec))
    return worst


def universality_experiment(f: Nonlinearity, eps_list: list[float],
                            rho: float, s: float, t_final: float, dt: float,
                            seed: int, n_ref: int | None = None,
                            record_every: int | None = None,
                            ) -> UniversalityReport:
    """Distance ladder sup_t ||u_eps(t) - u(t)||_{H^s} for decreasing eps.

    The limit u solves the renormalized cubic equation with coupling
    f'''(0)/6 at the reference cutoff; all runs share one master free
    sample under ``seed``, so the data are nested truncations.
    """
    eps_arr = list(eps_list)
    if any(not 0 < e <= 1 for e in eps_arr):
        raise ValueError("eps values must lie in (0, 1]")
    if not all(a > b for a, b in zip(eps_arr, eps_arr[1:])):
        raise ValueError("eps ladder must be strictly decreasing")
    if s >= 0:
        raise ValueError("comparison regularity s must be negative")
    if n_ref is None:
        n_ref = int(math.floor(1.0 / min(eps_arr)))
    if record_every is None:
        record_every = max(1, int(round(t_final / dt / 40.0)))
    spec = SobolevNormSpec(s=s, r=2.0, rho=rho)

    master = sample_free_field(MuParams(n_ref, rho, seed), 0)

    def reference_run(n_cut: int) -> Trajectory:
        from .fields import project

        state = PhaseState(project(master.u, n_cut), project(master.v, n_cut), rho)
        ctx = WickContext.create(n_cut, rho, 1)
        dyn = DynParams(ctx, dt, lam=f.limit_coupling)
        return evolve(state, t_final, dyn, record_every=record_every)

    ref = reference_run(n_ref)
    ref_half = reference_run(max(n_ref // 2, 1))
    ref_refine = _sup_distance(ref, ref_half, n_ref, spec)

    rows = []
    for eps in eps_arr:
        n_cut = int(math.floor(1.0 / eps))
        row = {"eps": eps, "n_cut": n_cut,
               "rho_eps": counterterm_mass(f, eps, rho),
               "sup_distance": float("nan"), "failed": False}
        try:
            traj = evolve_scaled(eps, f, rho, t_final, dt, seed,
                                 record_every=record_every, n_master=n_ref)
            row["sup_distance"] = _sup_distance(traj, ref, n_ref, spec)
        except IntegrationError:
            row["failed"] = True
        rows.append(row)
    return UniversalityReport(rows, f.name, s, t_final, dt, seed, n_ref,
                              ref_refine)
