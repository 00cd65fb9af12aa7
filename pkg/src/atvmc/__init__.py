"""Adaptive time-dependent variational Monte Carlo for transverse-field Ising quenches."""

__version__ = "0.1.0"

from .adaptive import AdaptiveController, AdaptivePolicy
from .ansatz import JastrowAnsatz, ParameterState, SymmetricRbmAnsatz, make_ansatz
from .estimator import EstimateBundle, ExactSumEstimator, MetropolisEstimator, SamplerConfig
from .groundstate import SrConfig, optimize_ground_state
from .kernels import BACKEND
from .model import TfiHamiltonian
from .simulation import QuenchSimulation, TrajectoryRecord
from .tvmc import SolverPolicy, StepSizeController, TvmcIntegrator

__all__ = [
    "AdaptiveController",
    "AdaptivePolicy",
    "BACKEND",
    "EstimateBundle",
    "ExactSumEstimator",
    "JastrowAnsatz",
    "MetropolisEstimator",
    "ParameterState",
    "QuenchSimulation",
    "SamplerConfig",
    "SolverPolicy",
    "SrConfig",
    "StepSizeController",
    "SymmetricRbmAnsatz",
    "TfiHamiltonian",
    "TrajectoryRecord",
    "TvmcIntegrator",
    "make_ansatz",
    "optimize_ground_state",
]
