"""Complex multiplication/division counts per coherence block and trade-off bounds."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

ZF = "ZF"
RZF = "RZF"
RKA = "RKA"

# flexible (single unit) vs time-saving (K parallel units) hardware accounting
# modes; operation counts are identical, only the wall-clock narrative changes.
FLS = "FLS"
TSS = "TSS"


@dataclass(frozen=True)
class ComplexityReport:
    """Operation counts per coherence block; exact rationals internally."""

    scheme: str
    combining_mults: Fraction
    combining_divs: Fraction
    reception_mults: Fraction
    dl_mults: Fraction = Fraction(0)
    mode: str = FLS

    @property
    def total(self) -> Fraction:
        return (self.combining_mults + self.combining_divs
                + self.reception_mults + self.dl_mults)


def _check_dims(M, K, tau_ul):
    if M < 1 or K < 1 or tau_ul < 1:
        raise ValueError("M, K and tau_ul must be at least 1")


def cost_zf(M: int, K: int, tau_ul: int, mode: str = FLS) -> ComplexityReport:
    """Zero-forcing combining: 3K^2M/2 + KM/2 + (K^3-K)/3 mults, K divisions."""
    _check_dims(M, K, tau_ul)
    mults = (Fraction(3 * K * K * M, 2) + Fraction(K * M, 2)
             + Fraction(K ** 3 - K, 3))
    return ComplexityReport(ZF, mults, Fraction(K), Fraction(tau_ul * M * K), mode=mode)


def cost_rzf(M: int, K: int, tau_ul: int, mode: str = FLS) -> ComplexityReport:
    """Regularized zero-forcing: ZF plus KM extra multiplications."""
    _check_dims(M, K, tau_ul)
    mults = (Fraction(3 * K * K * M, 2) + Fraction(3 * K * M, 2)
             + Fraction(K ** 3 - K, 3))
    return ComplexityReport(RZF, mults, Fraction(K), Fraction(tau_ul * M * K), mode=mode)


def cost_rka(M: int, K: int, T_rka: int, tau_ul: int, mode: str = FLS) -> ComplexityReport:
    """Parallel Kaczmarz emulation: M*T + 2MK combining, tau_ul*MK + MK^2 reception.

    The 2MK term is the once-per-block sampling-probability table; MK^2 is the
    one-off materialization of V from its K x K factor.  No divisions counted.
    """
    _check_dims(M, K, tau_ul)
    if T_rka < 0:
        raise ValueError("T_rka must be nonnegative")
    mults = Fraction(M * T_rka + 2 * M * K)
    return ComplexityReport(RKA, mults, Fraction(0),
                            Fraction(tau_ul * M * K + M * K * K), mode=mode)


def dl_cost(M: int, K: int, tau_dl: int) -> Fraction:
    """Downlink precoding cost MK + tau_dl*MK, identical for every scheme."""
    if M < 1 or K < 1 or tau_dl < 0:
        raise ValueError("M, K must be positive and tau_dl nonnegative")
    return Fraction(M * K + tau_dl * M * K)


def t_upper_fraction(M: int, K: int, target: str = RZF) -> Fraction:
    """Exact rational value of the iteration upper bound for integer M, K."""
    if M < 1 or K < 1:
        raise ValueError("M and K must be at least 1")
    lin = {ZF: 9, RZF: 3}.get(target)
    if lin is None:
        raise ValueError(f"target must be {ZF!r} or {RZF!r}")
    M, K = Fraction(M), Fraction(K)
    return K ** 3 / (3 * M) + K ** 2 / 2 + (4 * K - lin * K * M) / (6 * M)


def t_upper(M, K, target: str = RZF) -> float:
    """Iteration count at which the Kaczmarz emulation matches the canonical cost.

    Closed forms: K^3/(3M) + K^2/2 + (4K - 9KM)/(6M) against ZF and
    K^3/(3M) + K^2/2 + (4K - 3KM)/(6M) against RZF.  K may be non-integral
    (used by the loading-factor threshold search); integral inputs are
    evaluated in exact rational arithmetic.
    """
    if M < 1 or K < 1:
        raise ValueError("M and K must be at least 1")
    if target == ZF:
        lin = 9
    elif target == RZF:
        lin = 3
    else:
        raise ValueError(f"target must be {ZF!r} or {RZF!r}")
    if float(M).is_integer() and float(K).is_integer():
        M, K = Fraction(int(M)), Fraction(int(K))
    return float(K ** 3 / (3 * M) + K ** 2 / 2 + (4 * K - lin * K * M) / (6 * M))


def tradeoff_threshold(loading_factor: float, T_target: float, target: str = RZF) -> int:
    """Smallest antenna count M with t_upper(M, loading*M, target) >= T_target.

    K tracks the loading factor continuously (K = loading * M), matching the
    per-M construction of the trade-off frontier.
    """
    if not (0.0 < loading_factor <= 1.0):
        raise ValueError("loading factor must lie in (0, 1]")
    if T_target < 1:
        raise ValueError("T_target must be at least 1")
    M = 1
    while M < 10 ** 7:
        K = loading_factor * M
        if K >= 1 and t_upper(M, K, target) >= T_target:
            return M
        M += 1
    raise RuntimeError("no threshold found below M = 1e7")
