"""Rydberg wave packets kicked by half-cycle pulses, read out by covariance."""

__version__ = "0.1.0"

from .analysis import CoherenceAnalyzer, QuadratureFit, analytic_correlation, correlation_matrix
from .basis import BasisState, build_basis, rydberg_energy
from .config import ScenarioConfig, load_config
from .errors import (
    BasisMismatchError,
    ConfigError,
    DomainError,
    FitError,
    GridError,
    RydkickError,
    SolverError,
    TruncationError,
)
from .kick import KickOperator, build_kick_operator
from .measurement import NoiseModel, Scenario, ShotEnsemble, generate_ensemble
from .radial import GridSpec, solve_basis, solve_radial
from .wavepacket import WavePacket, WavePacketSpec, apply_kick, evolve, initial_wavepacket

__all__ = [
    "BasisMismatchError", "BasisState", "CoherenceAnalyzer", "ConfigError", "DomainError",
    "FitError", "GridError", "GridSpec", "KickOperator", "NoiseModel", "QuadratureFit",
    "RydkickError", "Scenario", "ScenarioConfig", "ShotEnsemble", "SolverError",
    "TruncationError", "WavePacket", "WavePacketSpec", "analytic_correlation", "apply_kick",
    "build_basis", "build_kick_operator", "correlation_matrix", "evolve", "generate_ensemble",
    "initial_wavepacket", "load_config", "rydberg_energy", "solve_basis", "solve_radial",
]
