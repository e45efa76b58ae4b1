"""Simulation of parallel coded-chunk downloads with thread scheduling policies."""
from .core import CodingParams, ConfigError, PolicySpec, SimConfig, load_config, validate_config
from .engine import PolicyViolation, SimulationError, Simulator, replicate, simulate
from .policies import FixedRedundancy, Greedy, RoundRobin, Sharing, make_policy
from .servicemodels import Deterministic, Empirical, Exponential, ShiftedExponential, TwoPoint
from .stats import DelayRecordSet, summarize

__all__ = [
    "CodingParams", "ConfigError", "PolicySpec", "SimConfig", "load_config", "validate_config",
    "PolicyViolation", "SimulationError", "Simulator", "replicate", "simulate",
    "FixedRedundancy", "Greedy", "RoundRobin", "Sharing", "make_policy",
    "Deterministic", "Empirical", "Exponential", "ShiftedExponential", "TwoPoint",
    "DelayRecordSet", "summarize",
]
