"""
Core functionality for deintensify.
Contains the design models, survival laws, posterior machinery,
trial engine, calibration, comparators, simulation and file store.
"""

from .calibration import CalibrationResult, apply_calibration, calibrate_design
from .engine import BayesianDecider, replay_interim, run_trial
from .models import (
    ArmScenario,
    DesignConfig,
    DesignValidationError,
    MissingCalibrationError,
    Scenario,
    TrialRecord,
)
from .simulator import ScenarioSet, sample_size_search, simulate_oc
from .store import CalibrationMismatchError, DataFileError, load_design

__all__ = [
    "ArmScenario",
    "BayesianDecider",
    "CalibrationMismatchError",
    "CalibrationResult",
    "DataFileError",
    "DesignConfig",
    "DesignValidationError",
    "MissingCalibrationError",
    "Scenario",
    "ScenarioSet",
    "TrialRecord",
    "apply_calibration",
    "calibrate_design",
    "load_design",
    "replay_interim",
    "run_trial",
    "sample_size_search",
    "simulate_oc",
]
