"""Bayesian hypothesis testing on a continuously monitored quantum emitter."""

from .dynamics import ConditionalState, SignalStep, TrajectoryRecord, simulate_record
from .inference import BayesTracker, helstrom_error, pure_bound, quantum_bound_curve
from .model import DetectionScheme, Hypothesis, HypothesisSet, rabi_set, two_level_rabi
from .montecarlo import ErrorCurve, ExperimentSpec, run_experiment

__all__ = [
    "BayesTracker",
    "ConditionalState",
    "DetectionScheme",
    "ErrorCurve",
    "ExperimentSpec",
    "Hypothesis",
    "HypothesisSet",
    "SignalStep",
    "TrajectoryRecord",
    "helstrom_error",
    "pure_bound",
    "quantum_bound_curve",
    "rabi_set",
    "run_experiment",
    "simulate_record",
    "two_level_rabi",
]
