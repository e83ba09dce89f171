"""Aggregation of per-seed metric reports into mean ± std tables."""

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import pandas as pd
import structlog

from ..evaluation import SPLITS, MetricsReport

logger = structlog.get_logger(__name__)

STATISTICS = (*SPLITS, "beta")
# (statistic, direction the method should beat the baseline in)
ONE_STEP_COMPARISONS = (("rel", "at least"), ("gen", "higher"), ("t_loc", "higher"), ("beta", "at least"))
COMPARISON_COLUMNS = ["metric", "method", "baseline", "difference", "expected", "holds"]


@dataclass
class VariantSummary:
    """Seed statistics of one variant at one ``T``."""

    variant: str
    seeds: int
    failed: int
    mean: Dict[str, Optional[float]]
    std: Dict[str, Optional[float]]
    T: int = 1

    @property
    def label(self) -> str:
        return self.variant if self.T == 1 else f"{self.variant} (T={self.T})"

    def cell(self, split: str) -> str:
        mean, std = self.mean.get(split), self.std.get(split)
        if mean is None:
            return "n/a"
        return f"{100 * mean:.2f} ± {100 * (std or 0.0):.2f}"


class MetricsAggregator:
    """Aggregates MetricsReports across seeds, one row per variant and ``T``."""

    def __init__(self, splits: Sequence[str] = STATISTICS):
        self.splits = tuple(splits)
        logger.debug("metrics aggregator initialized", splits=self.splits)

    def frame(self, reports: Sequence[MetricsReport]) -> pd.DataFrame:
        """One row per report with its fractions, β and metadata."""
        rows = []
        for report in reports:
            row = {"variant": report.variant, "seed": report.seed, "T": report.T, "status": report.status}
            row.update(report.fractions())
            row["beta"] = report.beta
            rows.append(row)
        return pd.DataFrame(rows, columns=["variant", "seed", "T", "status", *STATISTICS])

    def aggregate(self, reports: Sequence[MetricsReport]) -> pd.DataFrame:
        """Mean and sample std per (variant, T) over successful seeds; row order follows first appearance."""
        frame = self.frame(reports)
        columns = ["variant", "T", "seeds", "failed"]
        for split in self.splits:
            columns.extend([f"{split}_mean", f"{split}_std"])
        if frame.empty:
            return pd.DataFrame(columns=columns)

        rows = []
        for (variant, T), group in frame.groupby(["variant", "T"], sort=False):
            ok = group[group["status"] == "ok"]
            row = {"variant": variant, "T": int(T), "seeds": len(ok), "failed": len(group) - len(ok)}
            for split in self.splits:
                values = pd.to_numeric(ok[split], errors="coerce").dropna()
                row[f"{split}_mean"] = float(values.mean()) if len(values) else None
                row[f"{split}_std"] = float(values.std(ddof=1)) if len(values) > 1 else (0.0 if len(values) else None)
            rows.append(row)
        table = pd.DataFrame(rows, columns=columns)
        logger.info("reports aggregated", reports=len(reports), rows=len(table))
        return table

    def summaries(self, reports: Sequence[MetricsReport]) -> List[VariantSummary]:
        table = self.aggregate(reports)
        return [
            VariantSummary(
                variant=row["variant"],
                seeds=int(row["seeds"]),
                failed=int(row["failed"]),
                mean={s: _optional(row[f"{s}_mean"]) for s in self.splits},
                std={s: _optional(row[f"{s}_std"]) for s in self.splits},
                T=int(row["T"]),
            )
            for _, row in table.iterrows()
        ]

    def compare(self, reports: Sequence[MetricsReport], method: str = "full", baseline: str = "naive") -> pd.DataFrame:
        """Seed means of ``method`` against ``baseline``.

        One-step rows cover Rel, Gen, T-Loc and β. When both variants were run
        sequentially at two or more ``T``, a row compares the Gen drop from the
        smallest to the largest of those ``T``; a smaller drop is better.
        A method already at the ceiling (a fraction of 1.0, or no drop) holds.
        """
        table = self.aggregate(reports).set_index(["variant", "T"])
        rows = []

        def mean(variant: str, T: int, split: str) -> Optional[float]:
            if (variant, T) not in table.index:
                return None
            return _optional(table.loc[(variant, T), f"{split}_mean"])

        for split, expected in ONE_STEP_COMPARISONS:
            ours, theirs = mean(method, 1, split), mean(baseline, 1, split)
            if ours is None or theirs is None:
                continue
            holds = _holds(ours, theirs, expected)
            rows.append([split, ours, theirs, ours - theirs, expected, holds])

        sequential = {variant: {T for v, T in table.index if v == variant and T > 1} for variant in (method, baseline)}
        shared = sorted(sequential[method] & sequential[baseline])
        if len(shared) >= 2:
            first, last = shared[0], shared[-1]
            drops = [_drop(mean(variant, first, "gen"), mean(variant, last, "gen")) for variant in (method, baseline)]
            if None not in drops:
                ours, theirs = drops
                holds = _holds(ours, theirs, "lower")
                rows.append([f"gen_drop_T{first}_T{last}", ours, theirs, ours - theirs, "lower", holds])

        comparison = pd.DataFrame(rows, columns=COMPARISON_COLUMNS)
        logger.info("variants compared", method=method, baseline=baseline, rows=len(comparison))
        return comparison


def _holds(ours: float, theirs: float, expected: str) -> bool:
    if expected == "higher":
        return ours > theirs or ours >= 1.0
    if expected == "lower":
        return ours < theirs or ours <= 0.0
    return ours >= theirs


def _drop(before: Optional[float], after: Optional[float]) -> Optional[float]:
    if before is None or after is None:
        return None
    return before - after


def _optional(value) -> Optional[float]:
    return None if value is None or pd.isna(value) else float(value)


def write_report(report: MetricsReport, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True), encoding="utf-8")
    return path


def load_reports(directory: Union[str, Path]) -> List[MetricsReport]:
    """Every ``metrics*.json`` below ``directory``, in sorted path order."""
    paths = sorted(Path(directory).rglob("metrics*.json"))
    reports = [MetricsReport.from_dict(json.loads(p.read_text(encoding="utf-8"))) for p in paths]
    logger.debug("reports loaded", directory=str(directory), count=len(reports))
    return reports
