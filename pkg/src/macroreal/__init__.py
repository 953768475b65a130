"""Macrorealism test via high-order correlations of sequential weak measurements on a spin-1/2."""

__version__ = "0.1.0"

from .errors import ConfigError, DegenerateInputError, DomainError, InvariantError, MacrorealError
from .spin_algebra import ModelParams
from .schedule import BLUE_PRESET, RED_PRESET, MeasurementSchedule, PhaseDelays, eight_point, four_point, sequential
from .quantum_exact import exact_correlation, wsl_v_limit_quantum
from .classical_model import classical_v_limit
from .trajectory_mc import ReadoutModel, ShotDataset, simulate_dataset
from .inequality import CorrelationSet, NoiseBudget, TestStatistics, Verdict, compute_V

__all__ = [
    "BLUE_PRESET", "RED_PRESET", "ConfigError", "CorrelationSet", "DegenerateInputError", "DomainError",
    "InvariantError", "MacrorealError", "MeasurementSchedule", "ModelParams", "NoiseBudget", "PhaseDelays",
    "ReadoutModel", "ShotDataset", "TestStatistics", "Verdict", "classical_v_limit", "compute_V",
    "eight_point", "exact_correlation", "four_point", "sequential", "simulate_dataset", "wsl_v_limit_quantum",
]
