"""Randomized-Kaczmarz emulation of ZF/RZF receive combining for massive MIMO uplink."""

from .config import SystemConfig
from .channel import (ChannelRealization, CovarianceSet, UserDrop,
                      covariance_correlated, covariance_set,
                      covariance_uncorrelated, drop_users, pathloss_db,
                      sample_channel)
from .estimation import (ChannelEstimate, PilotObservation, ls_estimate,
                         mmse_estimate, nmse, observe_pilots)
from .combining import (Combiner, RkaOptions, precode_signal,
                        precoder_from_combiner, recover_signals, rka_parl,
                        rzf_combiner, sample_probabilities, zf_combiner)
from .analysis import (GainReport, Scenario, SeEstimate, average_gain_closed,
                       average_gain_generic, convergence_bound_check,
                       gap_percentage, iterations_to_gap, remark_bounds,
                       sample_prob_cdf, se_vs_iterations, sinr_se_montecarlo)
from .complexity import (ComplexityReport, cost_rka, cost_rzf, cost_zf,
                         dl_cost, t_upper, tradeoff_threshold)

__version__ = "0.1.0"
