"""UE geometry, long-term fading, covariance models and channel realizations."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import SystemConfig

HERMITIAN_RTOL = 1e-12
PSD_CLIP_RTOL = 1e-10


@dataclass
class UserDrop:
    """K planar UE positions relative to a base station at the cell center."""

    positions: np.ndarray  # (K, 2) meters
    distances: np.ndarray  # (K,) meters
    angles: np.ndarray     # (K,) radians in [-pi, pi)


@dataclass
class CovarianceSet:
    """Per-UE Hermitian PSD covariance matrices plus long-term coefficients."""

    R: np.ndarray            # (K, M, M) complex, linear power units
    beta_db: np.ndarray      # (K,) pathloss in dB
    shadow_db: np.ndarray    # shadowing draws actually used, in dB
    _sqrt: np.ndarray | None = field(default=None, repr=False)
    _mmse_cache: dict = field(default_factory=dict, repr=False)

    @property
    def K(self) -> int:
        return self.R.shape[0]

    @property
    def M(self) -> int:
        return self.R.shape[1]

    def sqrt_factors(self) -> np.ndarray:
        """PSD square roots L_k with R_k = L_k L_k^H, via Hermitian eigendecomposition.

        Cached: one factorization per drop serves all small-scale realizations.
        """
        if self._sqrt is None:
            L = np.empty_like(self.R)
            for k in range(self.K):
                L[k] = _psd_sqrt(self.R[k])
            self._sqrt = L
        return self._sqrt


@dataclass
class ChannelRealization:
    """True channel matrix, column k distributed as CN(0, R_k)."""

    G: np.ndarray  # (M, K) complex


def drop_users(config: SystemConfig, rng: np.random.Generator) -> UserDrop:
    """Place K UEs uniformly on the square cell minus the exclusion disk.

    Rejection sampling keeps the distribution exactly uniform on the support.
    """
    half = config.cell_side / 2.0
    if config.min_distance >= half * math.sqrt(2.0):
        raise ValueError(
            f"min_distance={config.min_distance} leaves no admissible area in a "
            f"{config.cell_side} m square"
        )
    positions = np.empty((config.K, 2))
    filled = 0
    while filled < config.K:
        cand = rng.uniform(-half, half, size=(4 * config.K, 2))
        ok = np.hypot(cand[:, 0], cand[:, 1]) >= config.min_distance
        cand = cand[ok]
        take = min(config.K - filled, cand.shape[0])
        positions[filled : filled + take] = cand[:take]
        filled += take
    distances = np.hypot(positions[:, 0], positions[:, 1])
    angles = np.arctan2(positions[:, 1], positions[:, 0])
    return UserDrop(positions=positions, distances=distances, angles=angles)


def pathloss_db(d, gamma_db: float, alpha: float):
    """Distance-based pathloss Gamma - 10*alpha*log10(d) in dB (d in meters)."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0.0):
        raise ValueError("distance must be positive")
    out = gamma_db - 10.0 * alpha * np.log10(d)
    return out if out.ndim else float(out)


def covariance_uncorrelated(beta_db: float, sigma_sf_db: float, M: int,
                            rng: np.random.Generator):
    """Scalar-identity covariance beta * 10^(f/10) * I_M with one shadowing draw f.

    Returns (R, f_db).
    """
    if M < 1:
        raise ValueError("M must be at least 1")
    f = rng.normal(0.0, sigma_sf_db) if sigma_sf_db > 0.0 else 0.0
    gain = 10.0 ** ((beta_db + f) / 10.0)
    R = gain * np.eye(M, dtype=complex)
    return R, f


def covariance_correlated(beta_db: float, r_corr: float, theta_k: float,
                          sigma_sf_db: float, M: int, rng: np.random.Generator):
    """Exponential ULA correlation combined with per-antenna shadowing.

    [R]_{m,n} = beta * r^|n-m| * exp(i(n-m)theta) * 10^((f_m+f_n)/20),
    with f_1..f_M i.i.d. N(0, sigma^2). The matrix is the Schur product of a
    PSD exponential-correlation matrix and a nonnegative rank-1 outer product,
    hence PSD; eigenvalues are clipped at zero against numerical noise.

    Returns (R, f_db) with f_db the M per-antenna draws.
    """
    if not (0.0 <= r_corr <= 1.0):
        raise ValueError(f"r_corr={r_corr} outside [0, 1]")
    if sigma_sf_db > 0.0:
        f = rng.normal(0.0, sigma_sf_db, size=M)
    else:
        f = np.zeros(M)
    idx = np.arange(M)
    diff = idx[None, :] - idx[:, None]          # n - m
    base = (r_corr ** np.abs(diff)) * np.exp(1j * diff * theta_k)
    amp = 10.0 ** (f / 20.0)
    beta = 10.0 ** (beta_db / 10.0)
    R = beta * base * np.outer(amp, amp)
    R = 0.5 * (R + R.conj().T)
    return clip_psd(R), f


def covariance_set(config: SystemConfig, drop: UserDrop, correlated: bool,
                   rng: np.random.Generator) -> CovarianceSet:
    """Covariances for a whole drop; shadowing redrawn here, fixed within the drop."""
    beta_db = pathloss_db(drop.distances, config.gamma_db, config.alpha)
    beta_db = np.atleast_1d(beta_db)
    R = np.empty((config.K, config.M, config.M), dtype=complex)
    shadows = []
    for k in range(config.K):
        if correlated:
            R[k], f = covariance_correlated(
                beta_db[k], config.r_corr, drop.angles[k],
                config.sigma_sf_db, config.M, rng)
        else:
            R[k], f = covariance_uncorrelated(
                beta_db[k], config.sigma_sf_db, config.M, rng)
        shadows.append(f)
    return CovarianceSet(R=R, beta_db=beta_db, shadow_db=np.asarray(shadows))


def sample_channel(cov: CovarianceSet, rng: np.random.Generator) -> ChannelRealization:
    """Draw G with column k = L_k w_k, w_k ~ CN(0, I_M)."""
    M, K = cov.M, cov.K
    L = cov.sqrt_factors()
    w = (rng.standard_normal((K, M)) + 1j * rng.standard_normal((K, M))) / math.sqrt(2.0)
    G = np.empty((M, K), dtype=complex)
    for k in range(K):
        G[:, k] = L[k] @ w[k]
    return ChannelRealization(G=G)


def clip_psd(R: np.ndarray) -> np.ndarray:
    """Clip slightly negative eigenvalues to zero; reject genuinely indefinite input."""
    M = R.shape[0]
    lam, U = np.linalg.eigh(R)
    tol = PSD_CLIP_RTOL * max(np.trace(R).real, 0.0) / M
    if lam[0] < -tol:
        raise ValueError(f"covariance not PSD: min eigenvalue {lam[0]:.3e} below -{tol:.3e}")
    if lam[0] >= 0.0:
        return R
    lam = np.clip(lam, 0.0, None)
    return (U * lam) @ U.conj().T


def _psd_sqrt(R: np.ndarray) -> np.ndarray:
    lam, U = np.linalg.eigh(R)
    M = R.shape[0]
    tol = PSD_CLIP_RTOL * max(np.trace(R).real, 0.0) / M
    if lam[0] < -tol:
        raise ValueError(f"covariance not PSD: min eigenvalue {lam[0]:.3e}")
    lam = np.clip(lam, 0.0, None)
    return U * np.sqrt(lam)
