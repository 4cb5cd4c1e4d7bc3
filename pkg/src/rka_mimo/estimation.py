"""Pilot observations and LS/MMSE channel estimation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import CovarianceSet
from .config import SystemConfig

LS = "LS"
MMSE = "MMSE"
TRUE = "TRUE"

ESTIMATORS = (LS, MMSE, TRUE)


@dataclass
class PilotObservation:
    """Despread pilot observations, column k = sqrt(tau_p*rho)*g_k + n_k, n ~ CN(0, I)."""

    Yp: np.ndarray  # (M, K) complex


@dataclass
class ChannelEstimate:
    """Estimated channel matrix with estimator tag and (MMSE) error covariances."""

    Ghat: np.ndarray               # (M, K) complex
    estimator: str
    error_cov: np.ndarray | None = None  # (K, M, M) for MMSE


def observe_pilots(G: np.ndarray, config: SystemConfig,
                   rng: np.random.Generator) -> PilotObservation:
    """Orthogonal-pilot observation with unit-variance receiver noise."""
    M, K = G.shape
    gain = math.sqrt(config.tau_p * config.rho_ul)
    noise = (rng.standard_normal((M, K)) + 1j * rng.standard_normal((M, K))) / math.sqrt(2.0)
    return PilotObservation(Yp=gain * G + noise)


def ls_estimate(obs: PilotObservation, config: SystemConfig) -> ChannelEstimate:
    """Least-squares estimate, ghat_k = y_k / sqrt(tau_p * rho)."""
    gain = math.sqrt(config.tau_p * config.rho_ul)
    return ChannelEstimate(Ghat=obs.Yp / gain, estimator=LS)


def mmse_filters(cov: CovarianceSet, ridge: float) -> np.ndarray:
    """Per-UE Wiener filters F_k = R_k (R_k + ridge*I)^{-1}, cached on the drop."""
    key = float(ridge)
    cached = cov._mmse_cache.get(key)
    if cached is not None:
        return cached
    M = cov.M
    F = np.empty_like(cov.R)
    eye = np.eye(M)
    for k in range(cov.K):
        Q = cov.R[k] + ridge * eye
        # solve Q^H X = R_k^H, then F = X^H, avoiding an explicit inverse
        F[k] = np.linalg.solve(Q.conj().T, cov.R[k].conj().T).conj().T
    cov._mmse_cache[key] = F
    return F


def mmse_estimate(obs: PilotObservation, cov: CovarianceSet,
                  config: SystemConfig) -> ChannelEstimate:
    """Per-UE linear MMSE estimate with error covariances C_k = R_k - R_k Q_k^{-1} R_k."""
    gain = math.sqrt(config.tau_p * config.rho_ul)
    ridge = 1.0 / (config.tau_p * config.rho_ul)
    F = mmse_filters(cov, ridge)
    Yls = obs.Yp / gain
    Ghat = np.empty_like(Yls)
    C = np.empty_like(cov.R)
    for k in range(cov.K):
        Ghat[:, k] = F[k] @ Yls[:, k]
        C[k] = cov.R[k] - F[k] @ cov.R[k]
    return ChannelEstimate(Ghat=Ghat, estimator=MMSE, error_cov=C)


def true_estimate(G: np.ndarray) -> ChannelEstimate:
    """Perfect-CSI pseudo-estimator."""
    return ChannelEstimate(Ghat=G.copy(), estimator=TRUE)


def estimate(tag: str, G: np.ndarray, cov: CovarianceSet, config: SystemConfig,
             rng: np.random.Generator) -> ChannelEstimate:
    """Run the pilot phase and the named estimator in one call."""
    if tag == TRUE:
        return true_estimate(G)
    obs = observe_pilots(G, config, rng)
    if tag == LS:
        return ls_estimate(obs, config)
    if tag == MMSE:
        return mmse_estimate(obs, cov, config)
    raise ValueError(f"unknown estimator tag {tag!r}")


def nmse(ghat: np.ndarray, g_true: np.ndarray, cov: CovarianceSet) -> np.ndarray:
    """Per-UE empirical NMSE, ||ghat_k - g_k||^2 / tr(R_k), averaged over realizations.

    `ghat`/`g_true` are (M, K) for a single realization or (n, M, K) stacks.
    """
    ghat = np.asarray(ghat)
    g_true = np.asarray(g_true)
    if ghat.ndim == 2:
        ghat = ghat[None]
        g_true = g_true[None]
    trace = np.einsum("kmm->k", cov.R).real
    if np.any(trace <= 0.0):
        raise ValueError("zero-trace covariance: NMSE undefined")
    err = np.sum(np.abs(ghat - g_true) ** 2, axis=1)  # (n, K)
    return err.mean(axis=0) / trace
