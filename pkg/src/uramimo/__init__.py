"""Link-level simulator and analysis toolkit for pilot-based unsourced
random access over a quasi-static Rayleigh-fading massive-MIMO uplink.
"""

from .channel import (SystemConfig, LsfcModel, UserPopulation,
                      NoPowerControl, FullInversion, ImperfectInversion,
                      PartialInversion, corners_from_quantiles,
                      draw_population, synthesize_pilot_phase,
                      synthesize_data_phase)
from .pilots import PilotCodebook, build_pilots, bits_to_index, index_to_bits
from .amp import (AmpConfig, AmpResult, DetectionResult, MlDenoiser,
                  DiscretePmeDenoiser, GminAbsolute, GminTauMultiple,
                  run_amp, detect, detection_errors, select_top_k)
from .receiver import (ChannelEstimate, ReceiverResult, NoSic, FullSic,
                       GroupedSic, lmmse_estimate, mrc_soft_symbols,
                       run_receiver)
from .polar import PolarCodec, crc_bits, modulate, demodulate, measure_pe_curve
from .analysis import (NormalApprox, EmpiricalCurve, sigma2_orthogonal,
                       error_cov_diag, sinr_no_sic, sinr_full_sic,
                       sinr_grouped_sic, sinr_levels, required_sinr,
                       na_pe, na_rate, outage_quantile, pmd_outage_bound)
from .optimizer import (OptimizerScenario, PowerPlan, sci_baseline,
                        solve_equal_groups, solve_level_grid, power_gain_db)
from .harness import (Scenario, run_trial, run_campaign, ebn0_search,
                      wilson_interval, predict_pe, required_power_db, main)

__version__ = "0.1.0"
