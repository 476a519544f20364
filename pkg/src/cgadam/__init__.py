"""CG-like adaptive moment estimation: optimizer, baselines, diagnostics."""

from .baselines import BaselineKind, baseline_step
from .errors import (CgadamError, ConfigurationError, ContractViolationError,
                     NonFiniteError)
from .optimizer import (HyperParams, OptimizerState, StepOutput,
                        cg_like_direction, conjugate_coefficient, reset, step)
from .problems import (GradientOracle, NoisyOracle, check_gradient,
                       logistic_regression, noisy_gradient, quadratic,
                       rosenbrock, tiny_mlp)

__version__ = "0.1.0"

__all__ = [
    "BaselineKind", "baseline_step", "CgadamError", "ConfigurationError",
    "ContractViolationError", "NonFiniteError", "HyperParams",
    "OptimizerState", "StepOutput", "cg_like_direction",
    "conjugate_coefficient", "reset", "step", "GradientOracle",
    "NoisyOracle", "check_gradient", "logistic_regression",
    "noisy_gradient", "quadratic", "rosenbrock", "tiny_mlp",
]
