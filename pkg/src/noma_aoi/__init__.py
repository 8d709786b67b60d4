"""Average age of information of grant-free slotted access, OMA versus NOMA with SIC.

The package pairs an absorbing-Markov-chain analysis of one frame with a
Monte Carlo simulator and a brute-force single-slot oracle.
"""

from .asymptotics import (aoi_ratio_asymptotic, asymptotic_aoi, grid_optimize_ptx, optimal_policy,
                          optimal_ptx, solve_eta, special_case_aoi_noma, special_case_success)
from .config import (GAR, GAW, NOMA, OMA, SnrLadder, SystemConfig, TxPolicy, build_snr_ladder,
                     db_to_linear)
from .errors import InsufficientCyclesError, NoAbsorptionError
from .markov import (RenewalMoments, TransitionModel, aoi_gar, aoi_gaw, analytical_aoi, evaluate,
                     failure_probability, pmf_update_delay, renewal_moments, transitions)
from .oracle import enumerate_noma_slot, enumerate_oma_slot
from .simulation import TraceStats, empirical_aoi, empirical_renewal, simulate

__version__ = "0.1.0"

__all__ = [
    "GAR", "GAW", "NOMA", "OMA",
    "SnrLadder", "SystemConfig", "TxPolicy", "build_snr_ladder", "db_to_linear",
    "InsufficientCyclesError", "NoAbsorptionError",
    "RenewalMoments", "TransitionModel", "aoi_gar", "aoi_gaw", "analytical_aoi", "evaluate",
    "failure_probability", "pmf_update_delay", "renewal_moments", "transitions",
    "enumerate_noma_slot", "enumerate_oma_slot",
    "aoi_ratio_asymptotic", "asymptotic_aoi", "grid_optimize_ptx", "optimal_policy", "optimal_ptx",
    "solve_eta", "special_case_aoi_noma", "special_case_success",
    "TraceStats", "empirical_aoi", "empirical_renewal", "simulate",
]
