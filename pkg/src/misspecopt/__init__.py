"""Data-driven stochastic optimization under local model misspecification.

Compares sample average approximation (SAA), estimate-then-optimize (ETO) and
integrated estimation-optimization (IEO) on newsvendor problems whose data law
is a tilt of a Gaussian model point, alongside the closed-form asymptotic
biases, variances and regrets of the three pipelines.
"""

__version__ = "0.1.0"

from .asymptotics import asymptotic_report, bias_vector, influence_functions, limit_regret, variance_matrix
from .config import ExperimentConfig, load
from .estimators import Method, fit_eto, fit_ieo, fit_saa
from .experiments import emit, regret, run_replication, simulate, sweep, true_optimum
from .model import GaussianScaledMeanFamily
from .perturbation import TiltedDistribution, make_direction
from .problems import NewsvendorProblem, sensitivity_matrices

__all__ = [
    "ExperimentConfig",
    "GaussianScaledMeanFamily",
    "Method",
    "NewsvendorProblem",
    "TiltedDistribution",
    "asymptotic_report",
    "bias_vector",
    "emit",
    "fit_eto",
    "fit_ieo",
    "fit_saa",
    "influence_functions",
    "limit_regret",
    "load",
    "make_direction",
    "regret",
    "run_replication",
    "sensitivity_matrices",
    "simulate",
    "sweep",
    "true_optimum",
    "variance_matrix",
]
