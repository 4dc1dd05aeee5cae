"""Discrete-time autoscaling simulator with cold-start-aware predictive scaling."""
from .engine import RunResult, SimConfig, StepRecord, run
from .estimator import ColdStartEstimator, HorizonParams, derive_horizon
from .policy import CapacityModel, MpcWeights, hpa_decide, mpc_decide
from .trace import WorkloadTrace, generate, split

__version__ = "0.1.0"

__all__ = ["RunResult", "SimConfig", "StepRecord", "run", "ColdStartEstimator", "HorizonParams",
           "derive_horizon", "CapacityModel", "MpcWeights", "hpa_decide", "mpc_decide",
           "WorkloadTrace", "generate", "split"]
