"""System-level simulator of indoor/outdoor downlink spectrum sharing.

A licensed outdoor network and an unlicensed indoor network share one
downlink channel; five pluggable interference-control schemes set the indoor
BS powers, from static regulatory rules to closed-loop control driven by
per-UE interference reports collected in a radio environment map.
"""

from .controllers import (CalibrationResult, ProtectionBeltMargin, SchemeConfig,
                          calibrate_margin, cbrs_gaa_power, cbrs_pal_protection_area,
                          dynamic_update, lsa_max_power_at_point, lsa_static_power,
                          solve_beta)
from .errors import ConfigurationError, SolverError
from .link import (CqiTable, NoiseModel, RateMapper, SinrVector,
                   eesm_effective_sinr, rate_of_allocation, sinr_to_cqi,
                   thermal_noise_power_dbm)
from .optim import (PowerAllocation, PowerProblem, brute_force_power_oracle,
                    solve_log_sum, solve_max_min, solve_power_problem, solve_sum_power)
from .propagation import (CouplingMatrix, FadingProcess, LinkClass, PathlossModel,
                          build_coupling_matrix, coupling_gain, pathloss_db,
                          sample_fading)
from .rem import BetaReport, Quantizer, RemStore, due_for_update, perturb_location, quantize_beta
from .scenario import (BsConfig, PlacementCounts, ProtectionGeometry, Rect, Scenario,
                       UeConfig, default_scenario, generate_protection_belt,
                       place_users, restrict_to_protection_area)
from .scheduler import IcicMask, PfState, icic_power_mask, pf_schedule, update_average_rate
from .simcore import (CampaignConfig, MetricsSummary, MovingUeResult, UeTrace,
                      associate_ues, moving_ue_scenario, run_campaign,
                      run_campaign_detailed, step)

__version__ = "0.1.0"
