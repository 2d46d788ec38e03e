"""Experiment drivers: invariance, chaos moments, scaling limit."""

import math

import numpy as np
import pytest

from wicknlw import (
    DynParams,
    MuParams,
    NONLINEARITIES,
    WickContext,
    chaos_convergence_study,
    counterterm_mass,
    evolve_scaled,
    hermite_moment_study,
    invariance_test,
    point_variance,
    universality_experiment,
)
from wicknlw import engine
from wicknlw.experiments import (
    DEFAULT_OBSERVABLES,
    observable_matrix,
    scaled_force_fn,
    scaled_forcing_grid,
)
from wicknlw.free_field import sample_pair_half
from wicknlw.gibbs import ChainOptions
from wicknlw.wick import hermite_values


class TestObservables:
    def test_matrix_matches_public_functions(self):
        from wicknlw import PhaseState, SpectralField, quadratic_energy, wick_mass
        from wicknlw.fields import half_from_full

        ctx = WickContext.create(3, 1.0, 1)
        from conftest import random_field

        u = random_field(3, 1)
        v = random_field(3, 2)
        state = PhaseState(u, v, 1.0)
        mat = observable_matrix(half_from_full(u.coeffs)[None],
                                half_from_full(v.coeffs)[None], ctx)[0]
        assert mat[0] == pytest.approx(wick_mass(u, ctx), rel=1e-12)
        assert mat[2] == pytest.approx(abs(u.coeff(0, 0)) ** 2)
        assert mat[3] == pytest.approx(abs(u.coeff(1, 0)) ** 2)
        assert mat[5] == pytest.approx(quadratic_energy(state), rel=1e-12)
        assert len(mat) == len(DEFAULT_OBSERVABLES)


class TestInvariance:
    def test_zero_time_zero_z(self):
        ctx = WickContext.create(2, 1.0, 1)
        dyn = DynParams(ctx, 1e-2)
        rep = invariance_test(dyn, 0.0, 200, seed=3, method="importance")
        assert all(r["z_score"] == 0.0 for r in rep.observables)
        assert rep.passed

    def test_linear_flow_preserves_free_measure(self):
        # with the force disabled the flow is the exact mode rotation and
        # the free measure is invariant mode by mode
        n, rho = 4, 1.0
        ctx = WickContext.create(n, rho, 1)
        u0, v0 = sample_pair_half(MuParams(n, rho, seed=17), 4000)
        u1, v1 = engine.rotate(u0, v0, n, rho, 1.37)
        m0 = observable_matrix(u0, v0, ctx)
        m1 = observable_matrix(u1, v1, ctx)
        for j in range(m0.shape[1]):
            a, b = m0[:, j], m1[:, j]
            se = math.hypot(a.std(ddof=1), b.std(ddof=1)) / math.sqrt(len(a))
            assert abs(a.mean() - b.mean()) <= 3.5 * se

    def test_importance_rejected_for_positive_time(self):
        ctx = WickContext.create(2, 1.0, 1)
        with pytest.raises(ValueError, match="unweighted"):
            invariance_test(DynParams(ctx, 1e-2), 0.5, 100, seed=1,
                            method="importance")

    def test_small_invariance_run_passes(self):
        ctx = WickContext.create(4, 1.0, 1)
        dyn = DynParams(ctx, 2e-3)
        rep = invariance_test(dyn, 0.5, 600, seed=5, method="hmc",
                              opts=ChainOptions(n_chains=12, burn_in=300, thin=6))
        assert rep.n_failed == 0
        assert rep.passed, [r["z_score"] for r in rep.observables]
        assert rep.max_rel_energy_drift < 1e-3


class TestChaosStudy:
    def test_degree_one_matches_covariance(self):
        rep = chaos_convergence_study(1, [2], 1.0, 0.4, 0.25, 4000, seed=7,
                                      cauchy=False)
        for r in rep.moment_rows:
            n1, n2 = r["mode"]
            want = r["analytic"]
            if abs(complex(n1, n2)) <= 2:
                assert want == pytest.approx(1.0 / (1.0 + n1 * n1 + n2 * n2))
            assert abs(r["mc_estimate"] - want) <= 3.5 * max(r["stderr"], 1e-12)

    def test_cross_moments_vanish(self):
        rep = chaos_convergence_study(2, [2], 1.0, 0.0, 0.25, 4000, seed=8,
                                      cauchy=False)
        for r in rep.cross_rows:
            assert abs(r["mean_real"]) <= 3.5 * r["stderr_real"]
            assert abs(r["mean_imag"]) <= 3.5 * r["stderr_imag"]

    def test_time_stationarity(self):
        a = chaos_convergence_study(2, [2], 1.0, 0.0, 0.25, 4000, seed=9,
                                    cauchy=False)
        b = chaos_convergence_study(2, [2], 1.0, 0.7, 0.25, 4000, seed=10,
                                    cauchy=False)
        rows_a = {(r["ell"], tuple(r["mode"])): r for r in a.moment_rows}
        for r in b.moment_rows:
            ra = rows_a[(r["ell"], tuple(r["mode"]))]
            se = math.hypot(ra["stderr"], r["stderr"])
            if se == 0:
                assert r["mc_estimate"] == ra["mc_estimate"]
            else:
                assert abs(r["mc_estimate"] - ra["mc_estimate"]) <= 3.5 * se

    def test_stderr_scales_inverse_sqrt(self):
        a = chaos_convergence_study(2, [2], 1.0, 0.3, 0.25, 1000, seed=11,
                                    cauchy=False)
        b = chaos_convergence_study(2, [2], 1.0, 0.3, 0.25, 4000, seed=11,
                                    cauchy=False)
        ra = {(r["ell"], tuple(r["mode"])): r["stderr"] for r in a.moment_rows}
        for r in b.moment_rows:
            s_small = ra[(r["ell"], tuple(r["mode"]))]
            if s_small > 0:
                ratio = s_small / max(r["stderr"], 1e-300)
                assert 1.6 < ratio < 2.4

    def test_cauchy_distances_reported(self):
        rep = chaos_convergence_study(2, [2], 1.0, 0.3, 0.25, 500, seed=12)
        assert {(r["ell"], r["n_max"]) for r in rep.cauchy_rows} == {(1, 2), (2, 2)}
        assert all(r["distance"] > 0 for r in rep.cauchy_rows)


class TestWickSpectrum:
    def test_cube_spectrum_matches_convolution_oracle(self):
        # algebraic identity per field: coefficients of H_3(u; s) equal the
        # threefold self-convolution of u's coefficients minus 3 s u_hat
        from scipy.signal import convolve2d

        from conftest import random_field
        from wicknlw.experiments import wick_power_spectrum
        from wicknlw.fields import full_from_half, half_from_full

        n = 2
        f = random_field(n, 33)
        sig = point_variance(n, 1.0)
        got = full_from_half(
            wick_power_spectrum(half_from_full(f.coeffs)[None], 3, sig, n))[0]
        conv3 = convolve2d(convolve2d(f.coeffs, f.coeffs), f.coeffs)
        lo = 3 * n - n
        conv3[lo : lo + 2 * n + 1, lo : lo + 2 * n + 1] -= 3.0 * sig * f.coeffs
        scale = np.max(np.abs(conv3))
        assert np.max(np.abs(got - conv3)) < 1e-12 * scale


class TestHermiteMoments:
    def test_small_study(self):
        rows = hermite_moment_study(2, 1.0, k_max=2, n_samples=6000, seed=13)
        for r in rows:
            tol = 4.0 * max(r["stderr"], 1e-12)
            assert abs(r["mc_estimate"] - r["expected"]) <= tol

    def test_unit_diagonal(self):
        rows = hermite_moment_study(2, 1.0, k_max=0, n_samples=100, seed=1)
        for r in rows:
            assert r["k"] == r["m"] == 0
            assert r["mc_estimate"] == pytest.approx(1.0)


class TestCounterterm:
    def test_sin_desk_value(self):
        got = counterterm_mass(NONLINEARITIES["sin"], 0.5, 1.0)
        assert got == pytest.approx(1.25 - 77.0 / 120.0)

    def test_linear_has_no_cubic_counterterm(self):
        f = NONLINEARITIES["linear"]
        for eps in (1.0, 0.5, 0.125):
            assert counterterm_mass(f, eps, 1.0) == pytest.approx(1 + eps * eps)

    def test_pure_cubic_specialization(self):
        f = NONLINEARITIES["cubic"]
        eps, rho = 0.25, 1.0
        sig = point_variance(4, rho)
        want = eps * eps * rho - eps * eps * sig / 2.0
        assert counterterm_mass(f, eps, rho) == pytest.approx(want)

    def test_rejects_large_eps(self):
        with pytest.raises(ValueError):
            counterterm_mass(NONLINEARITIES["sin"], 1.5, 1.0)


class TestScaledForcing:
    def test_pure_cubic_is_wick_cubic(self):
        rng = np.random.default_rng(0)
        eps, rho = 1 / 8, 1.0
        sig = point_variance(8, rho)
        vals = rng.standard_normal((4, 10, 10)) * 3.0
        got = scaled_forcing_grid(NONLINEARITIES["cubic"], eps, rho, vals)
        want = -hermite_values(3, vals, sig) / 6.0
        assert np.max(np.abs(got - want)) <= 1e-10 * (1 + np.max(np.abs(want)))

    def test_spectral_route_matches_wick_force(self):
        from conftest import random_field
        from wicknlw.fields import half_from_full

        eps, rho, n = 1 / 8, 1.0, 8
        ctx = WickContext.create(n, rho, 1)
        u = half_from_full(random_field(n, 3).coeffs)[None]
        force = scaled_force_fn(NONLINEARITIES["cubic"], eps, rho, n)
        got = force(u)
        want = -engine.wick_force(u, ctx) / 6.0
        assert np.max(np.abs(got - want)) < 1e-10 * (1 + np.max(np.abs(want)))

    def test_taylor_remainder_bound(self):
        # forcing minus {linear + cubic Taylor parts} is below eps u^4 / 24
        rng = np.random.default_rng(1)
        f = NONLINEARITIES["sin"]
        eps, rho = 1 / 8, 1.0
        rho_e = counterterm_mass(f, eps, rho)
        a = (f.d1 + eps * eps * rho - rho_e) / (eps * eps)
        vals = rng.standard_normal((4, 12, 12)) * 3.0
        forcing = scaled_forcing_grid(f, eps, rho, vals)
        remainder = forcing - a * vals - (f.d3 / 6.0) * vals**3
        bound = eps * np.abs(vals) ** 4 / 24.0 * f.d4_bound
        assert np.all(np.abs(remainder) <= bound * (1 + 1e-9) + 1e-12)


class TestEvolveScaled:
    def test_final_time_reached(self):
        traj = evolve_scaled(0.5, NONLINEARITIES["sin"], 1.0, 0.05, 1e-2,
                             seed=3, record_every=1)
        assert traj.times[-1] == pytest.approx(0.05)

    def test_odd_nonlinearity_fixes_origin(self):
        from wicknlw import PhaseState, SpectralField
        from wicknlw.dynamics import evolve

        n_cut, rho = 2, 1.0
        state = PhaseState(SpectralField.zeros(n_cut), SpectralField.zeros(n_cut),
                           rho)
        ctx = WickContext.create(n_cut, rho, 1)
        force = scaled_force_fn(NONLINEARITIES["sin"], 0.5, rho, n_cut)
        dyn = DynParams(ctx, 1e-2, lam=NONLINEARITIES["sin"].limit_coupling)
        traj = evolve(state, 0.1, dyn, record_every=5, force=force)
        for st in traj.states:
            assert np.all(st.u.coeffs == 0)

    def test_seed_sharing_nested_data(self):
        t1 = evolve_scaled(0.5, NONLINEARITIES["sin"], 1.0, 0.02, 1e-2, seed=4,
                           n_master=4)
        t2 = evolve_scaled(0.5, NONLINEARITIES["sin"], 1.0, 0.02, 1e-2, seed=4,
                           n_master=4)
        np.testing.assert_array_equal(t1.final().u.coeffs, t2.final().u.coeffs)


class TestUniversality:
    def test_ladder_runs_and_reports(self):
        rep = universality_experiment(NONLINEARITIES["sin"], [1 / 2, 1 / 4],
                                      rho=1.0, s=-0.1, t_final=0.1, dt=5e-3,
                                      seed=6)
        assert len(rep.rows) == 2
        assert all(not r["failed"] for r in rep.rows)
        assert rep.rows[0]["sup_distance"] > rep.rows[1]["sup_distance"]

    def test_matching_cutoff_row_is_small(self):
        # at eps with floor(1/eps) = n_ref the only difference is the forcing
        rep = universality_experiment(NONLINEARITIES["sin"], [1 / 2, 1 / 4],
                                      rho=1.0, s=-0.1, t_final=0.1, dt=5e-3,
                                      seed=6)
        assert rep.rows[1]["sup_distance"] < 0.1 * rep.rows[0]["sup_distance"]

    def test_validation(self):
        with pytest.raises(ValueError):
            universality_experiment(NONLINEARITIES["sin"], [0.5, 0.5], 1.0,
                                    -0.1, 0.1, 1e-2, 0)
        with pytest.raises(ValueError):
            universality_experiment(NONLINEARITIES["sin"], [0.5], 1.0, 0.1,
                                    0.1, 1e-2, 0)

    def test_rho_eps_reported(self):
        rep = universality_experiment(NONLINEARITIES["linear"], [1.0], 1.0,
                                      -0.2, 0.05, 5e-3, 2)
        assert rep.rows[0]["rho_eps"] == pytest.approx(2.0)  # 1 + eps^2 rho
