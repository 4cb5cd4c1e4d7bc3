"""SINR/SE estimation, average-gain theory, and iteration-count metrics."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rka_mimo import analysis, channel, combining, estimation
from rka_mimo.analysis import (Scenario, SinrAccumulator, average_gain_closed,
                               average_gain_generic, convergence_bound_check,
                               gap_percentage, interpolate_first_crossing,
                               remark_bounds, sample_prob_cdf,
                               sinr_se_montecarlo, stacked_matrix)
from rka_mimo.config import SystemConfig


def random_matrix(rng, M, K):
    return (rng.standard_normal((M, K)) + 1j * rng.standard_normal((M, K))) / np.sqrt(2)


def unit_snr_config(**kw):
    base = dict(M=1, K=1, tau_c=4, tau_p=2, ul_power_dbm=0.0,
                noise_power_dbm=0.0, min_distance=1.0)
    base.update(kw)
    return SystemConfig(**base)


class TestSinrAccumulator:
    def test_deterministic_matched_filter(self):
        # v = g fixed: interference equals signal, denominator reduces to ||v||^2
        g = np.array([[0.6 - 0.8j]])
        cfg = unit_snr_config(ul_power_dbm=7.0)
        acc = SinrAccumulator(K=1)
        for _ in range(20):
            acc.add(g, g)
        est = acc.finalize(cfg)
        assert est.sinr[0] == pytest.approx(cfg.rho_ul * np.abs(g[0, 0]) ** 2, rel=1e-12)

    def test_prefactor_arithmetic(self):
        cfg = SystemConfig(M=10, K=10, tau_c=200, tau_p=10, min_distance=1.0)
        acc = SinrAccumulator(K=1)
        # engineered so that gamma = 1: rho|s|^2 = rho*inter - rho|s|^2 + vnorm
        rho = cfg.rho_ul
        g = np.array([[1.0 / math.sqrt(rho)]], dtype=complex)
        acc.add(g * math.sqrt(rho), g)  # v^H g = 1/sqrt(rho) -> num = 1...
        est = acc.finalize(cfg)
        assert est.prefactor == pytest.approx(0.95)
        np.testing.assert_allclose(est.se, est.prefactor * np.log2(1 + est.sinr))

    def test_negative_denominator_rejected(self):
        cfg = unit_snr_config()
        acc = SinrAccumulator(K=1)
        acc.signal[0, 0] = 10.0  # inconsistent moments: |E s|^2 > E inter
        acc.inter[0, 0] = 1.0
        acc.vnorm[0, 0] = 0.0
        acc.n = 1
        with pytest.raises(FloatingPointError):
            acc.finalize(cfg)

    def test_empty_accumulator_rejected(self):
        with pytest.raises(ValueError):
            SinrAccumulator(K=2).finalize(unit_snr_config())


class TestSinrSeMontecarlo:
    def _perfect_csi_scenario(self, rng, M=8, K=2, **cfg_kw):
        cfg = unit_snr_config(M=M, K=K, tau_c=4 * K, tau_p=K, **cfg_kw)
        R = np.stack([np.eye(M, dtype=complex)] * K)
        cov = channel.CovarianceSet(R=R, beta_db=np.zeros(K), shadow_db=np.zeros(K))
        return Scenario(config=cfg, cov=cov, estimator=estimation.TRUE)

    def test_zf_sinr_linear_in_snr(self):
        # perfect-CSI ZF removes interference; gamma scales with transmit SNR
        gammas = []
        for snr_db in (0.0, 10.0):
            rng = np.random.default_rng(77)
            sc = self._perfect_csi_scenario(rng, ul_power_dbm=snr_db)
            est = sinr_se_montecarlo(
                sc, lambda e: combining.zf_combiner(e.Ghat), 400, rng)
            gammas.append(est.sinr.mean())
        slope = math.log10(gammas[1] / gammas[0])
        assert slope == pytest.approx(1.0, abs=0.1)

    def test_stderr_shrinks_with_trials(self):
        rng = np.random.default_rng(5)
        sc = self._perfect_csi_scenario(rng, M=8, K=4)

        def run(n, seed):
            return sinr_se_montecarlo(
                sc, lambda e: combining.rzf_combiner(e.Ghat, sc.config.xi),
                n, np.random.default_rng(seed)).se_stderr.mean()

        small = np.mean([run(400, s) for s in (1, 2, 3)])
        large = np.mean([run(1600, s) for s in (4, 5, 6)])
        # quadrupling the trials should halve the standard error, 20% slack
        assert large / small == pytest.approx(0.5, rel=0.4)

    def test_requires_positive_trials(self):
        rng = np.random.default_rng(6)
        sc = self._perfect_csi_scenario(rng)
        with pytest.raises(ValueError):
            sinr_se_montecarlo(sc, lambda e: combining.zf_combiner(e.Ghat), 0, rng)


class TestAverageGain:
    def test_orthonormal_columns_hit_upper_bound(self):
        Q, _ = np.linalg.qr(random_matrix(np.random.default_rng(7), 12, 4))
        rep = average_gain_closed(Q, 0.0)
        assert rep.kappa_closed == pytest.approx(1.0 / 4.0, abs=1e-12)

    def test_pure_ridge_case(self):
        rep = average_gain_closed(np.zeros((6, 2), dtype=complex), 1.0)
        assert rep.kappa_closed == pytest.approx(0.5)
        assert rep.lambda_min == pytest.approx(0.0, abs=1e-14)

    def test_closed_matches_generic(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            G = random_matrix(rng, 8, 2)
            xi = float(rng.uniform(0.0, 2.0))
            closed = average_gain_closed(G, xi).kappa_closed
            B = stacked_matrix(G, xi)
            p = combining.sample_probabilities(G, xi)
            generic = average_gain_generic(B.conj().T, p)
            assert abs(closed - generic) <= 1e-8

    def test_single_row_is_one(self):
        a = np.array([[1.0 + 2j, 0.5]])
        assert average_gain_generic(a, np.array([1.0])) == pytest.approx(1.0)

    def test_energy_proportional_equals_rayleigh_bound(self):
        rng = np.random.default_rng(9)
        B = random_matrix(rng, 6, 3)
        rows = B.conj().T
        norms2 = np.sum(np.abs(rows) ** 2, axis=1)
        p = norms2 / norms2.sum()
        lam_min = np.linalg.eigvalsh(B.conj().T @ B)[0]
        expected = lam_min / norms2.sum()
        assert average_gain_generic(rows, p) == pytest.approx(expected, abs=1e-10)

    def test_uniform_orthogonal_rows(self):
        rows = np.array([[1.0, 0.0], [0.0, 1.0]], dtype=complex)
        assert average_gain_generic(rows, np.array([0.5, 0.5])) == pytest.approx(0.5)

    def test_zero_row_with_probability_rejected(self):
        rows = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)
        with pytest.raises(ValueError, match="zero row"):
            average_gain_generic(rows, np.array([0.5, 0.5]))

    def test_probabilities_must_normalize(self):
        rows = np.eye(2, dtype=complex)
        with pytest.raises(ValueError, match="sum to 1"):
            average_gain_generic(rows, np.array([0.5, 0.6]))

    @given(seed=st.integers(0, 10 ** 6))
    @settings(max_examples=30, deadline=None)
    def test_monotone_in_ridge(self, seed):
        # lambda_min never exceeds the mean Gram eigenvalue, so increasing the
        # ridge can only raise the gain
        G = random_matrix(np.random.default_rng(seed), 8, 3)
        grid = [0.0, 0.1, 1.0, 10.0]
        vals = [average_gain_closed(G, xi).kappa_closed for xi in grid]
        assert all(b >= a - 1e-14 for a, b in zip(vals, vals[1:]))

    def test_remark_sandwich(self):
        rng = np.random.default_rng(10)
        for _ in range(20):
            G = random_matrix(rng, 10, 4)
            gram_lo = np.linalg.eigvalsh(G.conj().T @ G)[0] / np.sum(np.abs(G) ** 2)
            for xi in (0.0, 0.1, 1.0, 10.0):
                kappa = average_gain_closed(G, xi).kappa_closed
                assert gram_lo - 1e-12 <= kappa <= 1.0 / 4.0 + 1e-12


class TestRemarkBounds:
    def test_reference_value(self):
        rep = remark_bounds(100, 10)
        assert rep.remark2_lower == pytest.approx(0.046754, abs=1e-5)
        assert rep.remark1_upper == pytest.approx(0.1)

    def test_full_loading_vanishes(self):
        assert remark_bounds(64, 64).remark2_lower == 0.0

    def test_invalid_dims_rejected(self):
        with pytest.raises(ValueError):
            remark_bounds(4, 8)

    def test_asymptotic_bound_statistical(self):
        # 5th percentile of the normalized smallest Gram eigenvalue clears
        # 80% of the asymptotic lower bound
        rng = np.random.default_rng(11)
        M, K, n = 100, 10, 500
        vals = np.empty(n)
        for i in range(n):
            G = random_matrix(rng, M, K)
            gram = G.conj().T @ G
            vals[i] = np.linalg.eigvalsh(gram)[0] / np.sum(np.abs(G) ** 2)
        lower = remark_bounds(M, K).remark2_lower
        assert np.quantile(vals, 0.05) >= 0.8 * lower


class TestConvergenceBound:
    def test_single_ue_converges_in_one_step(self):
        # one equation: the forced first projection lands on the solution
        rng = np.random.default_rng(12)
        g = random_matrix(rng, 6, 1)
        opts = combining.RkaOptions(t_rka=5, xi=0.0, init=combining.HYBRID)
        _, _, tr = combining.rka_parl(g, opts, rng,
                                      oracle_D=combining.rzf_factor(g, 0.0))
        assert np.all(tr.gap[1:] <= 1e-10 * tr.gap[0])

    def test_synthetic_trace_at_bound(self):
        kappa = 0.2
        t = np.arange(20)
        gaps = 2.0 * (1 - kappa) ** t * 3.0
        passed, margin = convergence_bound_check(gaps, kappa, 3.0, slack=2.0)
        assert passed and margin == pytest.approx(1.0)

    def test_violating_trace_fails(self):
        passed, margin = convergence_bound_check([1.0, 5.0], 0.5, 1.0)
        assert not passed and margin < 1.0

    def test_monte_carlo_instance(self):
        rng = np.random.default_rng(13)
        G = random_matrix(rng, 8, 2)
        xi = 1.0
        kappa = average_gain_closed(G, xi).kappa_closed
        D_star = combining.rzf_factor(G, xi)
        # beyond ~80 iterations the bound decays below the floating-point
        # noise floor of the converged iterates; keep the log shorter
        T = 40
        sq = np.zeros(T + 1)
        n_seeds = 200
        for s in range(n_seeds):
            opts = combining.RkaOptions(t_rka=T, xi=xi)
            _, _, tr = combining.rka_parl(G, opts, np.random.default_rng(1000 + s),
                                          oracle_D=D_star)
            sq += np.sum(tr.gap ** 2, axis=1)
        sq /= n_seeds
        passed, _ = convergence_bound_check(sq, kappa, sq[0])
        assert passed

    def test_invalid_kappa_rejected(self):
        with pytest.raises(ValueError):
            convergence_bound_check([1.0], 0.0, 1.0)


class TestSampleProbCdf:
    def test_single_ue_degenerate(self):
        cfg = SystemConfig(M=4, K=1, tau_c=8, tau_p=2)
        values, cdf = sample_prob_cdf(cfg, estimation.TRUE, False, 3, 5,
                                      np.random.default_rng(14))
        np.testing.assert_allclose(values, 1.0)
        assert cdf[-1] == pytest.approx(1.0)

    def test_requires_positive_drops(self):
        with pytest.raises(ValueError):
            sample_prob_cdf(SystemConfig(), estimation.LS, False, 0, 1,
                            np.random.default_rng(0))


class TestIterationMetrics:
    def test_gap_percentage_values(self):
        assert gap_percentage(2.0, 2.0) == 0.0
        assert gap_percentage(1.8, 2.0) == pytest.approx(10.0)
        assert gap_percentage(1.98, 2.0) == pytest.approx(1.0)

    def test_gap_requires_positive_reference(self):
        with pytest.raises(ValueError):
            gap_percentage(1.0, 0.0)

    def test_full_tolerance_first_grid_point(self):
        t, reached = interpolate_first_crossing([1, 100, 200], [50.0, 5.0, 1.0], 100.0)
        assert reached and t == 1.0

    def test_linear_interpolation(self):
        t, reached = interpolate_first_crossing([100, 200], [20.0, 0.0], 10.0)
        assert reached and t == pytest.approx(150.0)

    def test_never_reached(self):
        t, reached = interpolate_first_crossing([1, 2], [50.0, 40.0], 10.0)
        assert not reached and t is None

    def test_non_monotone_grid_rejected(self):
        with pytest.raises(ValueError):
            interpolate_first_crossing([10, 10], [1.0, 1.0], 5.0)

    def test_invalid_tolerance_rejected(self):
        with pytest.raises(ValueError):
            interpolate_first_crossing([1, 2], [1.0, 1.0], 0.0)


class TestSeVsIterations:
    def test_small_curve_properties(self):
        cfg = SystemConfig(M=16, K=2, tau_c=20)
        rng = np.random.default_rng(15)
        curve = analysis.se_vs_iterations(cfg, estimation.TRUE, False,
                                          [1, 20, 80], 2, 10, rng)
        assert curve.t_grid.tolist() == [1, 20, 80]
        assert curve.se_rzf > 0.0
        # converged end of the curve sits near the canonical reference
        assert gap_percentage(curve.se_rka[-1], curve.se_rzf) <= 5.0

    def test_empty_grid_rejected(self):
        with pytest.raises(ValueError):
            analysis.se_vs_iterations(SystemConfig(M=4, K=2, tau_c=8, tau_p=2),
                                      estimation.TRUE, False, [], 1, 1,
                                      np.random.default_rng(0))
