"""Tripartite edit risks and their Monte-Carlo expectation over ω."""

from .edit_risks import (
    COMPONENTS,
    PROB_FLOOR,
    HiddenCache,
    RiskReport,
    RiskWeights,
    TripletBatch,
    categorical_kl,
    edit_risk_total,
    expectation_over_omega,
    generality_risk,
    kl_from_logits,
    locality_risk,
    nll_from_logits,
    reliability_risk,
    risk_components,
    scaled_hidden,
    weighted_total,
)
from .kernels import (
    DEFAULT_MULTIPLIERS,
    ESTIMATORS,
    KernelSpec,
    kernel_matrix,
    kernel_multiscale,
    median_heuristic,
    mmd_generality_risk,
)

__all__ = [
    'COMPONENTS',
    'DEFAULT_MULTIPLIERS',
    'ESTIMATORS',
    'PROB_FLOOR',
    'HiddenCache',
    'KernelSpec',
    'RiskReport',
    'RiskWeights',
    'TripletBatch',
    'categorical_kl',
    'edit_risk_total',
    'expectation_over_omega',
    'generality_risk',
    'kernel_matrix',
    'kernel_multiscale',
    'kl_from_logits',
    'locality_risk',
    'median_heuristic',
    'mmd_generality_risk',
    'nll_from_logits',
    'reliability_risk',
    'risk_components',
    'scaled_hidden',
    'weighted_total',
]
