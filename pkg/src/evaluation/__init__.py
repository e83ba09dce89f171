"""Editing metrics, evaluation protocols and the embedding overlap statistic."""

from .harness import ablation_runner, one_step_harness, sequential_harness, sequential_reports
from .metrics import SPLITS, MetricsReport, compute_metrics
from .overlap import (
    OverlapReport,
    dump_embeddings,
    edited_overlap,
    embeddings,
    histogram_overlap,
    overlap_beta,
    principal_axes,
)
from .variants import (
    FIXED_LAMBDA_SWEEP,
    LAMBDA_DEPTH_SWEEP,
    LR_PRIMAL_SWEEP,
    VARIANTS,
    expand_variants,
    parse_variant,
    variant_config,
)

__all__ = [
    'FIXED_LAMBDA_SWEEP',
    'LAMBDA_DEPTH_SWEEP',
    'LR_PRIMAL_SWEEP',
    'SPLITS',
    'VARIANTS',
    'MetricsReport',
    'OverlapReport',
    'ablation_runner',
    'compute_metrics',
    'dump_embeddings',
    'edited_overlap',
    'embeddings',
    'expand_variants',
    'histogram_overlap',
    'one_step_harness',
    'overlap_beta',
    'parse_variant',
    'principal_axes',
    'sequential_harness',
    'sequential_reports',
    'variant_config',
]
