"""Pilot observation model and LS/MMSE estimator behavior."""

import math

import numpy as np
import pytest

from rka_mimo import channel, estimation
from rka_mimo.config import SystemConfig
from rka_mimo.estimation import (LS, MMSE, TRUE, estimate, ls_estimate,
                                 mmse_estimate, nmse, observe_pilots,
                                 true_estimate)


class ZeroNoise:
    """Stand-in random stream whose Gaussian draws are all zero."""

    def standard_normal(self, shape):
        return np.zeros(shape)


def white_cov(M, K, power=1.0):
    R = np.stack([power * np.eye(M, dtype=complex)] * K)
    return channel.CovarianceSet(R=R, beta_db=np.full(K, 10 * math.log10(power)),
                                 shadow_db=np.zeros(K))


def config_for(M=4, K=2, snr_db=0.0):
    # noise power chosen so that rho_ul is 10^(snr/10) exactly
    return SystemConfig(M=M, K=K, tau_c=4 * K, ul_power_dbm=snr_db,
                        noise_power_dbm=0.0, min_distance=1.0)


class TestObservePilots:
    def test_noiseless_observation(self):
        cfg = config_for()
        rng = np.random.default_rng(1)
        G = rng.standard_normal((4, 2)) + 1j * rng.standard_normal((4, 2))
        obs = observe_pilots(G, cfg, ZeroNoise())
        np.testing.assert_allclose(obs.Yp, math.sqrt(cfg.tau_p * cfg.rho_ul) * G)

    def test_pure_noise_variance(self):
        cfg = config_for()
        rng = np.random.default_rng(2)
        draws = np.stack([observe_pilots(np.zeros((4, 2)), cfg, rng).Yp
                          for _ in range(5000)])
        assert np.mean(np.abs(draws) ** 2) == pytest.approx(1.0, rel=0.05)

    def test_column_variance_additivity(self):
        beta = 0.5
        cfg = config_for(M=2, K=1, snr_db=3.0)
        cov = white_cov(2, 1, power=beta)
        rng = np.random.default_rng(3)
        samples = []
        for _ in range(10_000):
            G = channel.sample_channel(cov, rng).G
            samples.append(observe_pilots(G, cfg, rng).Yp[:, 0])
        var = np.mean(np.abs(np.stack(samples)) ** 2)
        expected = cfg.tau_p * cfg.rho_ul * beta + 1.0
        assert var == pytest.approx(expected, rel=0.05)


class TestLsEstimate:
    def test_noiseless_recovers_channel(self):
        cfg = config_for()
        rng = np.random.default_rng(4)
        G = rng.standard_normal((4, 2)) + 1j * rng.standard_normal((4, 2))
        est = ls_estimate(observe_pilots(G, cfg, ZeroNoise()), cfg)
        np.testing.assert_allclose(est.Ghat, G, atol=1e-12)
        assert est.estimator == LS

    def test_closed_form_nmse(self):
        beta = 0.25
        cfg = config_for(M=8, K=1, snr_db=5.0)
        cov = white_cov(8, 1, power=beta)
        rng = np.random.default_rng(5)
        ghats, gs = [], []
        for _ in range(4000):
            G = channel.sample_channel(cov, rng).G
            ghats.append(ls_estimate(observe_pilots(G, cfg, rng), cfg).Ghat)
            gs.append(G)
        val = nmse(np.stack(ghats), np.stack(gs), cov)[0]
        assert val == pytest.approx(1.0 / (cfg.tau_p * cfg.rho_ul * beta), rel=0.05)

    def test_unit_effective_snr_nmse_one(self):
        # tau_p * rho * beta = 1 puts the error power at the channel power
        cfg = config_for(M=8, K=1, snr_db=-10.0 * math.log10(1.0))
        beta = 1.0 / (cfg.tau_p * cfg.rho_ul)
        cov = white_cov(8, 1, power=beta)
        rng = np.random.default_rng(6)
        ghats, gs = [], []
        for _ in range(4000):
            G = channel.sample_channel(cov, rng).G
            ghats.append(ls_estimate(observe_pilots(G, cfg, rng), cfg).Ghat)
            gs.append(G)
        assert nmse(np.stack(ghats), np.stack(gs), cov)[0] == pytest.approx(1.0, rel=0.05)

    def test_unbiased(self):
        beta = 1.0
        cfg = config_for(M=2, K=1)
        cov = white_cov(2, 1, power=beta)
        rng = np.random.default_rng(7)
        n = 10_000
        errs = np.stack([
            (ls_estimate(observe_pilots(G := channel.sample_channel(cov, rng).G,
                                        cfg, rng), cfg).Ghat - G)[:, 0]
            for _ in range(n)])
        # each entry's error is CN(0, 1/(tau_p rho)); 3-sigma band on the mean
        sigma = math.sqrt(1.0 / (cfg.tau_p * cfg.rho_ul) / 2.0 / n)
        assert np.all(np.abs(errs.mean(axis=0).real) <= 3 * sigma * 1.5)
        assert np.all(np.abs(errs.mean(axis=0).imag) <= 3 * sigma * 1.5)


class TestMmseEstimate:
    def test_vanishing_regularization_matches_ls(self):
        cfg = config_for(M=4, K=2, snr_db=10.0 * math.log10(1e12 / 2))
        assert 1.0 / (cfg.tau_p * cfg.rho_ul) == pytest.approx(1e-12, rel=1e-9)
        cov = white_cov(4, 2)
        rng = np.random.default_rng(8)
        G = channel.sample_channel(cov, rng).G
        obs = observe_pilots(G, cfg, rng)
        np.testing.assert_allclose(mmse_estimate(obs, cov, cfg).Ghat,
                                   ls_estimate(obs, cfg).Ghat, rtol=1e-6)

    def test_scalar_wiener_nmse(self):
        beta = 0.5
        cfg = config_for(M=1, K=1, snr_db=4.0)
        cov = white_cov(1, 1, power=beta)
        rng = np.random.default_rng(9)
        ghats, gs = [], []
        for _ in range(10_000):
            G = channel.sample_channel(cov, rng).G
            ghats.append(mmse_estimate(observe_pilots(G, cfg, rng), cov, cfg).Ghat)
            gs.append(G)
        expected = 1.0 / (1.0 + cfg.tau_p * cfg.rho_ul * beta)
        assert nmse(np.stack(ghats), np.stack(gs), cov)[0] == pytest.approx(
            expected, rel=0.05)

    def test_zero_prior_zero_estimate(self):
        cfg = config_for(M=3, K=2)
        R = np.stack([np.eye(3, dtype=complex), np.zeros((3, 3), dtype=complex)])
        cov = channel.CovarianceSet(R=R, beta_db=np.array([0.0, -300.0]),
                                    shadow_db=np.zeros(2))
        rng = np.random.default_rng(10)
        G = channel.sample_channel(cov, rng).G
        est = mmse_estimate(observe_pilots(G, cfg, rng), cov, cfg)
        np.testing.assert_array_equal(est.Ghat[:, 1], np.zeros(3))

    def test_error_covariance_psd_and_bounded(self):
        cfg = config_for(M=4, K=2)
        rng = np.random.default_rng(11)
        drop = channel.drop_users(SystemConfig(M=4, K=2, tau_c=20), rng)
        cov = channel.covariance_set(SystemConfig(M=4, K=2, tau_c=20), drop, True, rng)
        G = channel.sample_channel(cov, rng).G
        est = mmse_estimate(observe_pilots(G, cfg, rng), cov, cfg)
        for k in range(2):
            C = est.error_cov[k]
            assert np.linalg.eigvalsh(0.5 * (C + C.conj().T))[0] >= -1e-10
            # estimate power = trace(R) - trace(C) never exceeds the prior power
            assert np.trace(C).real <= np.trace(cov.R[k]).real + 1e-12

    def test_orthogonality_principle(self):
        beta = 1.0
        cfg = config_for(M=2, K=1)
        cov = white_cov(2, 1, power=beta)
        rng = np.random.default_rng(12)
        n = 10_000
        cross = np.zeros(2, dtype=complex)
        p_hat = np.zeros(2)
        p_err = np.zeros(2)
        for _ in range(n):
            G = channel.sample_channel(cov, rng).G
            ghat = mmse_estimate(observe_pilots(G, cfg, rng), cov, cfg).Ghat[:, 0]
            e = G[:, 0] - ghat
            cross += ghat.conj() * e
            p_hat += np.abs(ghat) ** 2
            p_err += np.abs(e) ** 2
        corr = np.abs(cross) / np.sqrt(p_hat * p_err)
        assert np.all(corr <= 0.02)


class TestDispatcherAndNmse:
    def test_true_estimator_bit_exact(self):
        rng = np.random.default_rng(13)
        G = rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2))
        est = true_estimate(G)
        np.testing.assert_array_equal(est.Ghat, G)
        assert est.estimator == TRUE

    def test_true_nmse_zero(self):
        cov = white_cov(3, 2)
        rng = np.random.default_rng(14)
        G = channel.sample_channel(cov, rng).G
        np.testing.assert_array_equal(nmse(G, G, cov), np.zeros(2))

    def test_mmse_never_worse_than_ls(self):
        cfg = SystemConfig(M=8, K=2, tau_c=20)
        rng = np.random.default_rng(15)
        drop = channel.drop_users(cfg, rng)
        cov = channel.covariance_set(cfg, drop, True, rng)
        n = 500
        shape = (n, cfg.M, cfg.K)
        g_ls = np.empty(shape, dtype=complex)
        g_mm = np.empty(shape, dtype=complex)
        gs = np.empty(shape, dtype=complex)
        for i in range(n):
            G = channel.sample_channel(cov, rng).G
            obs = observe_pilots(G, cfg, rng)
            g_ls[i] = ls_estimate(obs, cfg).Ghat
            g_mm[i] = mmse_estimate(obs, cov, cfg).Ghat
            gs[i] = G
        assert np.all(nmse(g_mm, gs, cov) <= nmse(g_ls, gs, cov) + 0.01)

    def test_unknown_tag_rejected(self):
        cfg = config_for()
        cov = white_cov(4, 2)
        with pytest.raises(ValueError, match="unknown estimator"):
            estimate("KALMAN", np.zeros((4, 2), dtype=complex), cov, cfg,
                     np.random.default_rng(0))

    def test_zero_trace_rejected(self):
        cov = channel.CovarianceSet(R=np.zeros((1, 2, 2), dtype=complex),
                                    beta_db=np.array([0.0]),
                                    shadow_db=np.array([0.0]))
        with pytest.raises(ValueError, match="zero-trace"):
            nmse(np.zeros((2, 1)), np.zeros((2, 1)), cov)
