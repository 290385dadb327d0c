"""Consensus-based distributed state estimation over sensor networks with known link delays."""
from .augment import build_augmented, build_augmented_pa, verify_delay_roots
from .estimator import run_augmented, run_distributed, simulate_plant
from .gain import (GainMatrix, StabilityReport, SynthesisError, TauStar, closed_loop_augmented,
                   closed_loop_delay_free, convergence_rate, design_gain,
                   design_gain_delay_tolerant, delay_test_bound, stability_report, tau_star)
from .harness import ExperimentConfig, MseCurve, build_instance, run_montecarlo
from .linalg import spectral_radius, verify_shift_roots
from .model import (DelayProfile, LtiSystem, SensorNetwork, assign_delays, generate_network,
                    generate_system)
from .observability import is_structurally_observable_networked, kalman_rank_test

__version__ = "0.1.0"
