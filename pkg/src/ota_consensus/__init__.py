"""Average consensus over non-coherent over-the-air aggregation."""

from .consensus import (
    ConsensusState,
    StepSchedule,
    build_wbar,
    build_wt,
    check_convergence_conditions,
    local_gradient,
    project,
    schedule_eval,
    step_ac,
    step_dpgd,
)
from .harness import ALGORITHMS, ExperimentSpec, MetricTrace, compare_algorithms, emit_csv, run_experiment
from .network import PathLossParams, NetworkTopology, draw_channel, generate_topology
from .ota import Codebook, combine, decode_energy, encode, expected_combined, precode, superpose
from .pcss import alternating_minimization, balance_residual, design, objective

__version__ = "0.1.0"

__all__ = [
    "ALGORITHMS", "Codebook", "ConsensusState", "ExperimentSpec", "MetricTrace", "NetworkTopology",
    "PathLossParams", "StepSchedule", "alternating_minimization", "balance_residual", "build_wbar",
    "build_wt", "check_convergence_conditions", "combine", "compare_algorithms", "decode_energy",
    "design", "draw_channel", "emit_csv", "encode", "expected_combined", "generate_topology",
    "local_gradient", "objective", "precode", "project", "run_experiment", "schedule_eval",
    "step_ac", "step_dpgd", "superpose",
]
