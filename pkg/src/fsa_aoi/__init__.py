"""Age of information in Poisson bipolar networks under locally adaptive frame slotted ALOHA."""

from .analytics import (NodePolicy, conditional_success_prob, conditional_time_avg_aoi, network_aoi_fixed_frame,
                        optimal_fixed_frame, success_probabilities)
from .distribution import ccdf_eta, framesize_pmf, mixture_network_aoi
from .geometry import (Deterministic, Empty, ObservationWindow, RadioConfig, RandomNearest, Topology,
                       build_window, build_windows, parse_window, sample_bipolar)
from .policy import PolicyAssignment, assign_fsa, assign_sa, phi, solve_update_rate, solve_update_rates
from .simulator import SimConfig, SimOutcome, run, run_replicated

__all__ = [
    "NodePolicy",
    "conditional_success_prob",
    "conditional_time_avg_aoi",
    "network_aoi_fixed_frame",
    "optimal_fixed_frame",
    "success_probabilities",
    "ccdf_eta",
    "framesize_pmf",
    "mixture_network_aoi",
    "Deterministic",
    "Empty",
    "ObservationWindow",
    "RadioConfig",
    "RandomNearest",
    "Topology",
    "build_window",
    "build_windows",
    "parse_window",
    "sample_bipolar",
    "PolicyAssignment",
    "assign_fsa",
    "assign_sa",
    "phi",
    "solve_update_rate",
    "solve_update_rates",
    "SimConfig",
    "SimOutcome",
    "run",
    "run_replicated",
]

__version__ = "0.1.0"
