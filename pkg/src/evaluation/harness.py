"""One-step and sequential editing protocols and the ablation runner."""

from typing import Dict, List, Optional, Sequence, Tuple

import structlog

from ..irm import TrainConfig, train_edit
from ..model import EditDelta, ToyModel
from ..risks import RiskReport
from .metrics import MetricsReport, compute_metrics
from .overlap import edited_overlap
from .variants import expand_variants, variant_config

logger = structlog.get_logger(__name__)


def one_step_harness(
    model: ToyModel,
    triplets: Sequence,
    cfg: TrainConfig,
    rephrase_mode: str = "single",
    **metadata,
) -> Tuple[MetricsReport, List[EditDelta], List[List[RiskReport]]]:
    """Edit each record separately from the base model and pool the metric counts.

    Returns the pooled report, each record's delta and each record's history.
    ``beta`` is the overlap of src and rephrase states, each under its own record's edit.
    """
    if not triplets:
        raise ValueError("one-step harness needs at least one record")
    report = MetricsReport(T=1, **metadata)
    histories = []
    deltas: List[EditDelta] = []
    for triplet in triplets:
        delta, history = train_edit(model, [triplet], cfg)
        deltas.append(delta)
        histories.append(history)
        report = report.merge(compute_metrics(model, delta, [triplet], rephrase_mode))
    report.beta = edited_overlap(model, deltas, triplets).mean
    logger.info("one-step editing evaluated", records=len(triplets), beta=round(report.beta, 4), **report.fractions())
    return report, deltas, histories


def sequential_reports(
    model: ToyModel,
    triplets: Sequence,
    T_values: Sequence[int],
    cfg: TrainConfig,
    rephrase_mode: str = "single",
    **metadata,
) -> Tuple[Dict[int, MetricsReport], EditDelta, List[List[RiskReport]]]:
    """One chain of ``max(T_values)`` edits on an accumulated delta, evaluated after each requested ``T``.

    The report at ``T`` covers the first ``T`` records under the delta reached after edit ``T``.
    """
    steps = sorted(set(T_values))
    if not steps or steps[0] < 1:
        raise ValueError("T must be at least 1")
    if len(triplets) < steps[-1]:
        raise ValueError(f"stream holds {len(triplets)} records, fewer than T={steps[-1]}")
    delta: Optional[EditDelta] = None
    histories = []
    reports: Dict[int, MetricsReport] = {}
    for index, triplet in enumerate(triplets[: steps[-1]], start=1):
        delta, history = train_edit(model, [triplet], cfg, init_delta=delta)
        histories.append(history)
        if index in steps:
            edited = triplets[:index]
            report = compute_metrics(model, delta, edited, rephrase_mode, T=index, **metadata)
            report.beta = edited_overlap(model, delta, edited).mean
            reports[index] = report
            logger.info("sequential editing evaluated", T=index, **report.fractions())
    return reports, delta, histories


def sequential_harness(
    model: ToyModel,
    triplets: Sequence,
    T: int,
    cfg: TrainConfig,
    rephrase_mode: str = "single",
    **metadata,
) -> Tuple[MetricsReport, EditDelta, List[List[RiskReport]]]:
    """Apply ``T`` edits in order on one accumulated delta, then evaluate all ``T`` records."""
    if T < 1:
        raise ValueError("T must be at least 1")
    reports, delta, histories = sequential_reports(model, triplets, [T], cfg, rephrase_mode, **metadata)
    return reports[T], delta, histories


def ablation_runner(
    model: ToyModel,
    triplets: Sequence,
    cfg: TrainConfig,
    variants: Sequence[str],
    T: int = 1,
    rephrase_mode: str = "single",
    **metadata,
) -> Dict[str, MetricsReport]:
    """One report per variant, all on the same model, records and seed; insertion order follows ``variants``."""
    rows: Dict[str, MetricsReport] = {}
    for tag in expand_variants(variants):
        variant_cfg = variant_config(cfg, tag)
        if T == 1:
            report, _, _ = one_step_harness(model, triplets, variant_cfg, rephrase_mode, variant=tag, **metadata)
        else:
            report, _, _ = sequential_harness(model, triplets, T, variant_cfg, rephrase_mode, variant=tag, **metadata)
        rows[tag] = report
    return rows
