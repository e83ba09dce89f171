"""IRM-TV objective, adaptive λ network and the primal-dual edit trainer."""

from .config import KernelConfig, TrainConfig
from .counterexample import OneDimReport, analytic_lambda, grid_worst_case, oned_counterexample
from .lambda_net import DualParams, LambdaNet, parameter_stats
from .objective import (
    EditObjective,
    Objective,
    OmegaTerms,
    OneDimObjective,
    lagrangian,
    omega_terms,
    ood_objective_grid,
    tv_penalty,
)
from .optim import SGD, Adam, make_optimizer
from .trainer import (
    PrimalDualState,
    dual_step,
    history_frame,
    omega_draws,
    primal_step,
    run_primal_dual,
    stream_seed,
    train_edit,
    write_history,
)

__all__ = [
    'Adam',
    'DualParams',
    'EditObjective',
    'KernelConfig',
    'LambdaNet',
    'Objective',
    'OmegaTerms',
    'OneDimObjective',
    'OneDimReport',
    'PrimalDualState',
    'SGD',
    'TrainConfig',
    'analytic_lambda',
    'dual_step',
    'grid_worst_case',
    'history_frame',
    'lagrangian',
    'make_optimizer',
    'omega_draws',
    'omega_terms',
    'oned_counterexample',
    'ood_objective_grid',
    'parameter_stats',
    'primal_step',
    'run_primal_dual',
    'stream_seed',
    'train_edit',
    'tv_penalty',
    'write_history',
]
