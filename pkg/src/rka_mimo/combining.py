"""ZF/RZF combiners, the parallel randomized-Kaczmarz engine, and UL-DL duality."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

ZF = "ZF"
RZF = "RZF"
RKA_HYBRID = "RKA_HYBRID"
RKA_PLAIN = "RKA_PLAIN"
RKA_CYCLIC = "RKA_CYCLIC"

HYBRID = "HYBRID"
PLAIN = "PLAIN"
RANDOMIZED = "RANDOMIZED"
CYCLIC = "CYCLIC"


@dataclass
class Combiner:
    """Receive combining matrix; Kaczmarz outputs keep the factor D with V = Ghat @ D."""

    V: np.ndarray                 # (M, K)
    method: str
    D: np.ndarray | None = None   # (K, K), Kaczmarz methods only


@dataclass(frozen=True)
class RkaOptions:
    """Iteration budget, regularization, initialization and row-schedule choices."""

    t_rka: int
    xi: float
    init: str = HYBRID
    schedule: str = RANDOMIZED
    shared_rows: bool = False

    def __post_init__(self):
        if self.t_rka < 1:
            raise ValueError("t_rka must be at least 1")
        if self.xi < 0.0:
            raise ValueError("xi must be nonnegative")
        if self.init not in (HYBRID, PLAIN):
            raise ValueError(f"unknown init mode {self.init!r}")
        if self.schedule not in (RANDOMIZED, CYCLIC):
            raise ValueError(f"unknown schedule {self.schedule!r}")

    @property
    def method_tag(self) -> str:
        if self.schedule == CYCLIC:
            return RKA_CYCLIC
        return RKA_HYBRID if self.init == HYBRID else RKA_PLAIN


@dataclass
class RkaTrace:
    """Per-iteration log of one parallel run, iterations stacked over all K solves."""

    rows: np.ndarray            # (T, K) selected row index per solve per iteration
    abs_eta: np.ndarray         # (T, K) residual magnitudes
    gap: np.ndarray | None      # (T+1, K) state gap to oracle incl. t=0, if oracle given
    u_history: np.ndarray | None = None  # (T+1, M, K) only when record_state=True
    z_history: np.ndarray | None = None  # (T+1, K, K)

    def to_csv_rows(self):
        """(t, k, r, abs_eta, gap) tuples matching the documented trace schema."""
        T, K = self.rows.shape
        for t in range(T):
            for k in range(K):
                g = float(self.gap[t + 1, k]) if self.gap is not None else math.nan
                yield (t, k, int(self.rows[t, k]), float(self.abs_eta[t, k]), g)


def rzf_combiner(Ghat: np.ndarray, xi: float) -> Combiner:
    """Regularized zero-forcing, V = Ghat (Ghat^H Ghat + xi I)^{-1}."""
    if xi < 0.0:
        raise ValueError("xi must be nonnegative")
    K = Ghat.shape[1]
    gram = Ghat.conj().T @ Ghat + xi * np.eye(K)
    if xi == 0.0:
        _check_rank(gram, K)
    D = np.linalg.solve(gram, np.eye(K, dtype=complex))
    return Combiner(V=Ghat @ D, method=RZF if xi > 0.0 else ZF, D=None)


def zf_combiner(Ghat: np.ndarray) -> Combiner:
    """Zero-forcing, the pseudo-inverse of Ghat^H; requires full column rank."""
    c = rzf_combiner(Ghat, 0.0)
    return Combiner(V=c.V, method=ZF)


def _check_rank(gram: np.ndarray, K: int) -> None:
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > 1e14:
        raise np.linalg.LinAlgError(
            f"rank-deficient channel estimate: Gram condition number {cond:.3e}")


def rzf_factor(Ghat: np.ndarray, xi: float) -> np.ndarray:
    """Closed-form D* = (Ghat^H Ghat + xi I)^{-1}, the oracle for the Kaczmarz factor."""
    K = Ghat.shape[1]
    return np.linalg.solve(Ghat.conj().T @ Ghat + xi * np.eye(K), np.eye(K, dtype=complex))


def sample_probabilities(Ghat: np.ndarray, xi: float) -> np.ndarray:
    """Row-sampling distribution p_r = (||ghat_r||^2 + xi) / (||Ghat||_F^2 + K xi)."""
    norms2 = np.sum(np.abs(Ghat) ** 2, axis=0)
    K = Ghat.shape[1]
    total = norms2.sum() + K * xi
    if total <= 0.0:
        raise ValueError("all-zero channel estimate with xi = 0: no sampling distribution")
    return (norms2 + xi) / total


def rka_parl(Ghat: np.ndarray, opts: RkaOptions, rng: np.random.Generator,
             snapshot_ts: tuple[int, ...] | None = None,
             oracle_D: np.ndarray | None = None,
             record_trace: bool = False,
             record_state: bool = False):
    """Parallel per-UE randomized Kaczmarz emulation of the RZF combining matrix.

    Solve k runs from u = 0, z = 0.  Each iteration picks a row r of Ghat^H
    (forced to k at t=0 under HYBRID, cyclic under CYCLIC, otherwise drawn from
    `sample_probabilities` by inverse-CDF sampling), computes the residual

        eta = ([e_k]_r - <ghat_r, u> - xi z_r) / (||ghat_r||^2 + xi)

    and updates u += eta ghat_r, z_r += eta.  Column k of D is the final z.

    All K solves are advanced together (vectorized over k); under
    ``shared_rows`` one random row stream drives every solve, otherwise each
    solve owns a child stream spawned from `rng`, so results are independent
    of execution order.

    Returns (Combiner, snapshots, trace); `snapshots` maps each requested
    iteration count to its D matrix, `trace` is an RkaTrace or None.
    """
    if not np.all(np.isfinite(Ghat)):
        raise ValueError("channel estimate contains non-finite entries")
    M, K = Ghat.shape
    T = opts.t_rka
    xi = opts.xi
    norms2 = np.sum(np.abs(Ghat) ** 2, axis=0)
    denom_all = norms2 + xi

    rows = _draw_rows(Ghat, opts, rng, T, K)
    # zero rows are legal while unselected (their sampling probability is 0);
    # a selected zero row has no defining hyperplane
    if np.any(denom_all[rows] <= 0.0):
        raise ValueError("selected row has zero norm with xi = 0: residual undefined")

    u = np.zeros((M, K), dtype=complex)
    z = np.zeros((K, K), dtype=complex)  # z[j, k] is entry j of solve k's state
    kk = np.arange(K)

    snapshots: dict[int, np.ndarray] = {}
    want = set(snapshot_ts or ())
    keep_trace = record_trace or record_state or oracle_D is not None
    abs_eta = np.empty((T, K)) if keep_trace else None
    gap = None
    if oracle_D is not None:
        u_star = Ghat @ oracle_D
        gap = np.empty((T + 1, K))
        gap[0] = _state_gap(u, z, u_star, oracle_D, xi)
    u_hist = z_hist = None
    if record_state:
        u_hist = np.empty((T + 1, M, K), dtype=complex)
        z_hist = np.empty((T + 1, K, K), dtype=complex)
        u_hist[0], z_hist[0] = u, z

    for t in range(T):
        r = rows[t]
        g_sel = Ghat[:, r]                                  # (M, K)
        inner = np.einsum("mk,mk->k", g_sel.conj(), u)      # <ghat_r, u> per solve
        target = (r == kk).astype(float)                    # [e_k]_r
        eta = (target - inner - xi * z[r, kk]) / denom_all[r]
        u += eta * g_sel
        z[r, kk] += eta
        if keep_trace:
            abs_eta[t] = np.abs(eta)
        if gap is not None:
            gap[t + 1] = _state_gap(u, z, u_star, oracle_D, xi)
        if record_state:
            u_hist[t + 1], z_hist[t + 1] = u.copy(), z.copy()
        if (t + 1) in want:
            snapshots[t + 1] = z.copy()

    D = z.copy()
    combiner = Combiner(V=Ghat @ D, method=opts.method_tag, D=D)
    trace = None
    if keep_trace:
        trace = RkaTrace(rows=rows, abs_eta=abs_eta, gap=gap,
                         u_history=u_hist, z_history=z_hist)
    return combiner, snapshots, trace


def _draw_rows(Ghat, opts, rng, T, K):
    """Row schedule for all T iterations and K solves, shape (T, K)."""
    if opts.schedule == CYCLIC:
        seq = (np.arange(T) % K)[:, None].repeat(K, axis=1)
        rows = seq.copy()
    else:
        p = sample_probabilities(Ghat, opts.xi)
        cdf = np.cumsum(p)
        cdf[-1] = 1.0
        if opts.shared_rows:
            draws = np.searchsorted(cdf, rng.random(T), side="right")
            rows = draws[:, None].repeat(K, axis=1)
        else:
            streams = rng.spawn(K)
            rows = np.empty((T, K), dtype=np.intp)
            for k, st in enumerate(streams):
                rows[:, k] = np.searchsorted(cdf, st.random(T), side="right")
    if opts.init == HYBRID:
        rows[0] = np.arange(K)
    return rows


def _state_gap(u, z, u_star, z_star, xi):
    """Per-solve distance in the concatenated state [u; sqrt(xi) z]."""
    du2 = np.sum(np.abs(u - u_star) ** 2, axis=0)
    dz2 = np.sum(np.abs(z - z_star) ** 2, axis=0)
    return np.sqrt(du2 + xi * dz2) if xi > 0.0 else np.sqrt(du2 + dz2)


def recover_signals(combiner: Combiner, y: np.ndarray) -> np.ndarray:
    """Symbol estimates s_hat = V^H y; V is materialized once per coherence block."""
    return combiner.V.conj().T @ y


def precoder_from_combiner(combiner: Combiner) -> np.ndarray:
    """UL-DL duality precoder, w_k = v_k / ||v_k||."""
    norms = np.linalg.norm(combiner.V, axis=0)
    if np.any(norms == 0.0):
        bad = np.flatnonzero(norms == 0.0)
        raise ValueError(f"zero combining column(s) {bad.tolist()}: combiner solve failed")
    return combiner.V / norms


def precode_signal(W: np.ndarray, symbols: np.ndarray) -> np.ndarray:
    """Transmit vector x = W @ symbols (unit-norm precoding columns expected)."""
    return W @ symbols


def dump_trace_csv(trace: RkaTrace, path) -> None:
    """Write the per-iteration trace as CSV with columns (t, k, r, abs_eta, gap)."""
    with open(path, "w") as fh:
        fh.write("t,k,r,abs_eta,gap\n")
        for t, k, r, ae, g in trace.to_csv_rows():
            fh.write(f"{t},{k},{r},{ae:.9g},{g:.9g}\n")
