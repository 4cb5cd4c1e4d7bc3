"""System-level configuration for the single-cell uplink simulator."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

# Thermal noise floor over 20 MHz with a 10 dB receiver noise figure.
# The rounded value (-91 dBm) is the one usually quoted; the unrounded value
# is kept so that the SNR anchors at 35 m / 250 m come out at 17.63 / -14.47 dB.
DEFAULT_BANDWIDTH_HZ = 20e6
DEFAULT_NOISE_FIGURE_DB = 10.0
DEFAULT_NOISE_POWER_DBM = -174.0 + 10.0 * math.log10(DEFAULT_BANDWIDTH_HZ) + DEFAULT_NOISE_FIGURE_DB


@dataclass(frozen=True)
class SystemConfig:
    """Scenario scale, powers and propagation constants for one cell.

    Defaults describe a dense-urban NLoS square cell of 0.25 x 0.25 km with a
    center-located base station.
    """

    M: int = 100
    K: int = 10
    cell_side: float = 250.0
    min_distance: float = 35.0
    gamma_db: float = -35.3
    alpha: float = 3.76
    sigma_sf_db: float = 4.0
    r_corr: float = 0.5
    ul_power_dbm: float = 20.0
    noise_power_dbm: float = DEFAULT_NOISE_POWER_DBM
    tau_c: int = 200
    tau_p: int | None = None
    xi: float | None = None

    def __post_init__(self):
        if self.tau_p is None:
            object.__setattr__(self, "tau_p", self.K)
        if self.xi is None:
            object.__setattr__(self, "xi", 1.0 / self.rho_ul)
        self.validate()

    def validate(self) -> None:
        if not (1 <= self.K <= self.M):
            raise ValueError(f"need 1 <= K <= M, got K={self.K}, M={self.M}")
        if self.tau_p < self.K:
            raise ValueError(f"pilot length tau_p={self.tau_p} < K={self.K}")
        if self.tau_c <= self.tau_p:
            raise ValueError(f"tau_c={self.tau_c} must exceed tau_p={self.tau_p}")
        if not (0.0 <= self.r_corr <= 1.0):
            raise ValueError(f"r_corr={self.r_corr} outside [0, 1]")
        if self.min_distance <= 0.0:
            raise ValueError("min_distance must be positive")
        if self.xi < 0.0:
            raise ValueError("xi must be nonnegative")
        if self.rho_ul <= 0.0:
            raise ValueError("normalized UL SNR must be positive")

    @property
    def rho_ul(self) -> float:
        """Normalized uplink transmit SNR, 10^((P_tx - P_noise)/10)."""
        return 10.0 ** ((self.ul_power_dbm - self.noise_power_dbm) / 10.0)

    @property
    def tau_ul(self) -> int:
        return self.tau_c - self.tau_p

    def with_updates(self, **kwargs) -> "SystemConfig":
        """New config with some fields replaced; tau_p/xi re-derived if K or powers change."""
        if "K" in kwargs and "tau_p" not in kwargs:
            kwargs["tau_p"] = None
        if ("ul_power_dbm" in kwargs or "noise_power_dbm" in kwargs) and "xi" not in kwargs:
            kwargs["xi"] = None
        return replace(self, **kwargs)
