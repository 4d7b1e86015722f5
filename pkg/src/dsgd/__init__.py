"""Stochastic and doubly stochastic gradient descent for simulated variational circuits."""
from .circuits import (ParamCircuit, build_amplitude_encoder, build_qaoa_ansatz, build_sigma_block_ansatz,
                       evaluate)
from .estimators import (EstimatorConfig, GradientEstimate, PolynomialEstimator, estimate_mse, estimate_vqe,
                         mse_cost, u_statistic, vqe_cost)
from .gradients import (ShiftRule, derive_shift_rule, exact_gradient, exact_partial, finite_difference_gradient,
                        lipschitz_bound)
from .optimizers import OptimizerConfig, OptimizerState, RunTrace, run, step
from .rng import RngStream

__version__ = "0.1.0"

__all__ = [
    "EstimatorConfig", "GradientEstimate", "OptimizerConfig", "OptimizerState", "ParamCircuit",
    "PolynomialEstimator", "RngStream", "RunTrace", "ShiftRule", "build_amplitude_encoder",
    "build_qaoa_ansatz", "build_sigma_block_ansatz", "derive_shift_rule", "estimate_mse", "estimate_vqe",
    "evaluate", "exact_gradient", "exact_partial", "finite_difference_gradient", "lipschitz_bound",
    "mse_cost", "run", "step", "u_statistic", "vqe_cost",
]
