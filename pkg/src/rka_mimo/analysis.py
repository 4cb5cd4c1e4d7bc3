"""Monte Carlo SE evaluation, average-gain theory checks, and convergence metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import channel, combining, estimation
from .config import SystemConfig


# ---------------------------------------------------------------------------
# SE / SINR estimation
# ---------------------------------------------------------------------------

@dataclass
class SeEstimate:
    """Per-UE SINR and spectral efficiency with Monte Carlo standard errors."""

    sinr: np.ndarray          # (K,) linear
    se: np.ndarray            # (K,) bit/s/Hz
    prefactor: float          # tau_ul / tau_c
    n_trials: int
    se_stderr: np.ndarray     # (K,)


@dataclass
class Scenario:
    """One drop-conditioned evaluation setting."""

    config: SystemConfig
    cov: channel.CovarianceSet
    estimator: str = estimation.LS


class SinrAccumulator:
    """Accumulates the three expectations of the use-and-forget SINR.

    Sample means of v_k^H g_k, sum_i |v_k^H g_i|^2 and ||v_k||^2 over
    realizations; batched so standard errors can be reported.
    """

    def __init__(self, K: int, n_batches: int = 10):
        self.n = 0
        self.nb = n_batches
        self.signal = np.zeros((n_batches, K), dtype=complex)
        self.inter = np.zeros((n_batches, K))
        self.vnorm = np.zeros((n_batches, K))

    def add(self, V: np.ndarray, G: np.ndarray) -> None:
        b = self.n % self.nb
        A = V.conj().T @ G                       # A[k, i] = v_k^H g_i
        self.signal[b] += np.diagonal(A)
        self.inter[b] += np.sum(np.abs(A) ** 2, axis=1)
        self.vnorm[b] += np.sum(np.abs(V) ** 2, axis=0)
        self.n += 1

    def _gamma(self, signal, inter, vnorm, rho):
        num = rho * np.abs(signal) ** 2
        denom = rho * inter - num + vnorm
        scale = rho * inter + vnorm
        if np.any(denom < -1e-15 * scale):
            raise FloatingPointError(
                "negative SINR denominator beyond numerical slack; "
                "insufficient trials or inconsistent combiner")
        # an identically-zero combiner has num = denom = 0: it recovers
        # nothing, so its SINR is 0 (not NaN)
        with np.errstate(divide="ignore", invalid="ignore"):
            gamma = np.where(denom > 0.0, num / np.where(denom > 0.0, denom, 1.0), 0.0)
        return gamma

    def finalize(self, config: SystemConfig) -> SeEstimate:
        if self.n == 0:
            raise ValueError("no trials accumulated")
        rho = config.rho_ul
        pre = config.tau_ul / config.tau_c
        signal = self.signal.sum(axis=0) / self.n
        inter = self.inter.sum(axis=0) / self.n
        vnorm = self.vnorm.sum(axis=0) / self.n
        gamma = self._gamma(signal, inter, vnorm, rho)
        se = pre * np.log2(1.0 + gamma)

        # batch-means standard error on the per-UE SE
        counts = np.array([(self.n - b + self.nb - 1) // self.nb for b in range(self.nb)])
        used = counts > 0
        batch_se = []
        for b in np.flatnonzero(used):
            g = self._gamma(self.signal[b] / counts[b], self.inter[b] / counts[b],
                            self.vnorm[b] / counts[b], rho)
            batch_se.append(pre * np.log2(1.0 + g))
        batch_se = np.asarray(batch_se)
        if batch_se.shape[0] > 1:
            stderr = batch_se.std(axis=0, ddof=1) / math.sqrt(batch_se.shape[0])
        else:
            stderr = np.full_like(se, np.nan)
        return SeEstimate(sinr=gamma, se=se, prefactor=pre, n_trials=self.n,
                          se_stderr=stderr)


def sinr_se_montecarlo(scenario: Scenario, combiner_factory, n_trials: int,
                       rng: np.random.Generator) -> SeEstimate:
    """Estimate the use-and-forget SINR/SE by sample means over fresh realizations.

    `combiner_factory` maps a ChannelEstimate to a Combiner; expectations are
    conditioned on the drop carried by `scenario`.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be at least 1")
    cfg, cov = scenario.config, scenario.cov
    acc = SinrAccumulator(cfg.K, n_batches=min(10, n_trials))
    for _ in range(n_trials):
        G = channel.sample_channel(cov, rng).G
        est = estimation.estimate(scenario.estimator, G, cov, cfg, rng)
        comb = combiner_factory(est)
        acc.add(comb.V, G)
    return acc.finalize(cfg)


@dataclass
class SeCurve:
    """Average SE per UE versus Kaczmarz iteration count, with the RZF reference."""

    t_grid: np.ndarray
    se_rka: np.ndarray          # mean over UEs and drops, per grid point
    se_rka_stderr: np.ndarray   # across-drop standard error
    se_rzf: float
    se_rzf_stderr: float
    n_drops: int
    n_real: int


def se_vs_iterations(config: SystemConfig, estimator: str, correlated: bool,
                     t_grid, n_drops: int, n_real: int, rng: np.random.Generator,
                     init: str = combining.HYBRID,
                     schedule: str = combining.RANDOMIZED,
                     shared_rows: bool = False) -> SeCurve:
    """SE of the Kaczmarz emulation at each iteration budget on `t_grid`, plus RZF.

    Both schemes share the same drops, channels, noise and estimates (common
    random numbers), so the gap between them is estimated with low variance.
    One Kaczmarz run to max(t_grid) per realization provides every grid point
    via state snapshots.
    """
    t_grid = np.asarray(sorted(set(int(t) for t in t_grid)))
    if t_grid.size == 0 or t_grid[0] < 1:
        raise ValueError("t_grid must contain positive iteration counts")
    t_max = int(t_grid[-1])
    opts = combining.RkaOptions(t_rka=t_max, xi=config.xi, init=init,
                                schedule=schedule, shared_rows=shared_rows)
    se_rka_drops = np.empty((n_drops, t_grid.size))
    se_rzf_drops = np.empty(n_drops)
    for d, rng_d in enumerate(rng.spawn(n_drops)):
        drop = channel.drop_users(config, rng_d)
        cov = channel.covariance_set(config, drop, correlated, rng_d)
        acc_rzf = SinrAccumulator(config.K)
        acc_t = {int(t): SinrAccumulator(config.K) for t in t_grid}
        for rng_r in rng_d.spawn(n_real):
            G = channel.sample_channel(cov, rng_r).G
            est = estimation.estimate(estimator, G, cov, config, rng_r)
            acc_rzf.add(combining.rzf_combiner(est.Ghat, config.xi).V, G)
            _, snaps, _ = combining.rka_parl(est.Ghat, opts, rng_r,
                                             snapshot_ts=tuple(int(t) for t in t_grid))
            for t, D in snaps.items():
                acc_t[t].add(est.Ghat @ D, G)
        se_rzf_drops[d] = acc_rzf.finalize(config).se.mean()
        for j, t in enumerate(t_grid):
            se_rka_drops[d, j] = acc_t[int(t)].finalize(config).se.mean()
    nd = max(n_drops, 1)
    return SeCurve(
        t_grid=t_grid,
        se_rka=se_rka_drops.mean(axis=0),
        se_rka_stderr=se_rka_drops.std(axis=0, ddof=1) / math.sqrt(nd) if nd > 1
        else np.full(t_grid.size, np.nan),
        se_rzf=float(se_rzf_drops.mean()),
        se_rzf_stderr=float(se_rzf_drops.std(ddof=1) / math.sqrt(nd)) if nd > 1 else math.nan,
        n_drops=n_drops, n_real=n_real)


# ---------------------------------------------------------------------------
# Average gain (convergence rate) and its bounds
# ---------------------------------------------------------------------------

@dataclass
class GainReport:
    """Average gain of the row-action solver plus its theoretical bounds."""

    kappa_closed: float | None = None
    kappa_generic: float | None = None
    remark1_upper: float | None = None
    remark2_lower: float | None = None
    lambda_min: float | None = None


def stacked_matrix(Ghat: np.ndarray, xi: float) -> np.ndarray:
    """The (M+K) x K ridge-augmented system matrix [Ghat; sqrt(xi) I]."""
    K = Ghat.shape[1]
    return np.vstack([Ghat, math.sqrt(xi) * np.eye(K, dtype=complex)])


def average_gain_closed(Ghat: np.ndarray, xi: float) -> GainReport:
    """Closed-form average gain (lambda_min(Ghat^H Ghat) + xi) / (||Ghat||_F^2 + K xi)."""
    K = Ghat.shape[1]
    gram = Ghat.conj().T @ Ghat
    lam_min = float(np.linalg.eigvalsh(gram)[0])
    kappa = (lam_min + xi) / (np.sum(np.abs(Ghat) ** 2) + K * xi)
    return GainReport(kappa_closed=float(kappa), lambda_min=lam_min,
                      remark1_upper=1.0 / K)


def average_gain_generic(b_h_rows: np.ndarray, p: np.ndarray) -> float:
    """Average gain from the averaged rank-1 projection operator definition.

    `b_h_rows` holds the rows a_z^H of the coefficient matrix; `p` is the row
    sampling distribution.  Builds P_bar = sum_z p_z a_z a_z^H / ||a_z||^2,
    restricts it to the span of the a_z, and returns the smallest restricted
    eigenvalue.
    """
    rows = np.asarray(b_h_rows)
    p = np.asarray(p, dtype=float)
    if rows.shape[0] != p.shape[0]:
        raise ValueError("probability vector length must match the row count")
    if not math.isclose(p.sum(), 1.0, rel_tol=0, abs_tol=1e-10):
        raise ValueError("row probabilities must sum to 1")
    A = rows.conj().T                            # columns a_z, shape (n, m)
    norms2 = np.sum(np.abs(A) ** 2, axis=0)
    if np.any((norms2 == 0.0) & (p > 0.0)):
        raise ValueError("zero row with nonzero sampling probability")
    keep = norms2 > 0.0
    P_bar = (A[:, keep] * (p[keep] / norms2[keep])) @ A[:, keep].conj().T
    # orthonormal basis of the subspace spanned by the a_z
    U, s, _ = np.linalg.svd(A[:, keep], full_matrices=False)
    Q = U[:, s > s[0] * 1e-12] if s.size else U[:, :0]
    if Q.shape[1] == 0:
        raise ValueError("coefficient rows span the zero subspace")
    restricted = Q.conj().T @ P_bar @ Q
    return float(np.linalg.eigvalsh(0.5 * (restricted + restricted.conj().T))[0])


def remark_bounds(M: int, K: int, xi: float = 0.0) -> GainReport:
    """Upper bound 1/K and the asymptotic lower bound (1 - sqrt(K/M))^2 / K."""
    if not (1 <= K <= M):
        raise ValueError("need 1 <= K <= M")
    lower = (1.0 - math.sqrt(K / M)) ** 2 / K
    return GainReport(remark1_upper=1.0 / K, remark2_lower=lower)


def convergence_bound_check(mean_sq_gap: np.ndarray, kappa: float,
                            initial_gap_sq: float, slack: float = 2.0):
    """Check the expected-contraction bound on a seed-averaged squared-gap trace.

    `mean_sq_gap[t]` is the average of ||c^t - c*||^2 over seeds (t = 0..T).
    Passes when every entry lies below slack * (1 - kappa)^t * initial_gap_sq.
    Returns (passed, margin) with margin = min_t bound/actual.
    """
    if not (0.0 < kappa <= 1.0):
        raise ValueError("kappa must lie in (0, 1]")
    gaps = np.asarray(mean_sq_gap, dtype=float)
    t = np.arange(gaps.size)
    bound = slack * (1.0 - kappa) ** t * initial_gap_sq
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(gaps > 0.0, bound / gaps, np.inf)
    margin = float(ratio.min()) if ratio.size else math.inf
    return bool(np.all(gaps <= bound + 1e-300)), margin


# ---------------------------------------------------------------------------
# Sample-probability statistics and iteration counting
# ---------------------------------------------------------------------------

def sample_prob_cdf(config: SystemConfig, estimator: str, correlated: bool,
                    n_drops: int, n_real: int, rng: np.random.Generator):
    """Empirical CDF of the per-UE sample probability, averaged over small-scale fading.

    Returns (values, cdf): sorted pooled per-UE average probabilities and the
    cumulative fraction at each.
    """
    if n_drops < 1:
        raise ValueError("n_drops must be at least 1")
    pooled = []
    for rng_d in rng.spawn(n_drops):
        drop = channel.drop_users(config, rng_d)
        cov = channel.covariance_set(config, drop, correlated, rng_d)
        p_sum = np.zeros(config.K)
        for rng_r in rng_d.spawn(n_real):
            G = channel.sample_channel(cov, rng_r).G
            est = estimation.estimate(estimator, G, cov, config, rng_r)
            p_sum += combining.sample_probabilities(est.Ghat, config.xi)
        pooled.append(p_sum / n_real)
    values = np.sort(np.concatenate(pooled))
    cdf = np.arange(1, values.size + 1) / values.size
    return values, cdf


def gap_percentage(se_rka: float, se_canonical: float) -> float:
    """Percentage shortfall of the emulated SE against the canonical one."""
    if se_canonical <= 0.0:
        raise ValueError("canonical SE must be positive")
    return 100.0 * (se_canonical - se_rka) / se_canonical


def interpolate_first_crossing(t_grid, gaps, tolerance_percent: float):
    """First T where the gap curve crosses below the tolerance, linearly interpolated.

    Returns (t_bar, reached): when the tolerance is never met on the grid,
    t_bar is None and the last gap value is reported through `reached=False`.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    gaps = np.asarray(gaps, dtype=float)
    if not (0.0 < tolerance_percent <= 100.0):
        raise ValueError("tolerance must lie in (0, 100]")
    if np.any(np.diff(t_grid) <= 0):
        raise ValueError("iteration grid must be strictly increasing")
    below = gaps <= tolerance_percent
    if not below.any():
        return None, False
    j = int(np.argmax(below))
    if j == 0:
        return float(t_grid[0]), True
    g0, g1 = gaps[j - 1], gaps[j]
    t0, t1 = t_grid[j - 1], t_grid[j]
    frac = (g0 - tolerance_percent) / (g0 - g1) if g0 != g1 else 1.0
    return float(t0 + frac * (t1 - t0)), True


def iterations_to_gap(config: SystemConfig, estimator: str, correlated: bool,
                      tolerance_percent: float, grid, n_drops: int, n_real: int,
                      rng: np.random.Generator):
    """Average iteration count for the emulation to close to within the tolerance.

    Evaluates the SE gap on the iteration grid and linearly interpolates the
    first crossing.  Returns (t_bar, last_gap, curve); t_bar is None when the
    tolerance is not reached on the grid.
    """
    curve = se_vs_iterations(config, estimator, correlated, grid, n_drops, n_real, rng)
    gaps = np.array([gap_percentage(s, curve.se_rzf) for s in curve.se_rka])
    t_bar, reached = interpolate_first_crossing(curve.t_grid, gaps, tolerance_percent)
    return (t_bar if reached else None), float(gaps[-1]), curve
