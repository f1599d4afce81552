"""splitopt: stochastic and batch Peaceman-Rachford / ADMM splitting solvers
for sparse regression, with numerical contraction certificates, synthetic
data pipelines, and a benchmark CLI."""

from . import bench, contraction, datasets, errors, linalg, problems, solvers
from .estimators import (
    SplittingGroupLasso,
    SplittingLasso,
    SplittingLogisticRegression,
)
from .solvers import (
    ProxMatrix,
    SolverConfig,
    StepSchedule,
    admm_config,
    prsm_config,
    scprsm_config,
    spb_scprsm_config,
    sto_admm_config,
    sto_spb_scprsm_config,
)

__version__ = "0.1.0"

__all__ = [
    "bench", "contraction", "datasets", "errors", "linalg", "problems", "solvers",
    "SplittingLasso", "SplittingGroupLasso", "SplittingLogisticRegression",
    "ProxMatrix", "SolverConfig", "StepSchedule",
    "admm_config", "prsm_config", "scprsm_config", "spb_scprsm_config",
    "sto_admm_config", "sto_spb_scprsm_config",
    "__version__",
]
