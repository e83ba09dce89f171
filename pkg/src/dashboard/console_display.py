"""Console rendering of lab reports with rich tables."""

from typing import Iterable, Mapping, Optional, Sequence

import numpy as np
import pandas as pd
import structlog
from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from ..aggregator import VariantSummary

logger = structlog.get_logger(__name__)

SPLIT_TITLES = {"rel": "Rel", "gen": "Gen", "gen_acc": "Gen-acc", "t_loc": "T-Loc", "m_loc": "M-Loc", "beta": "β"}


class ReportDisplay:
    """Renders dataset summaries, metric tables and verification results."""

    def __init__(self, console: Optional[Console] = None, use_colors: bool = True):
        self.console = console or Console(no_color=not use_colors, highlight=False)

    def show_header(self, title: str, subtitle: str = "") -> None:
        self.console.print(Panel.fit(f"[bold cyan]{title}[/]\n{subtitle}".rstrip(), border_style="cyan"))

    def show_dataset_summary(self, counts: Mapping[str, int], path: str = "") -> None:
        table = Table(title=f"Dataset {path}".strip())
        table.add_column("Shift", style="bold")
        table.add_column("Records", justify="right")
        for kind, count in counts.items():
            table.add_row(kind, str(count))
        self.console.print(table)

    def show_metrics(self, summaries: Sequence[VariantSummary], title: str = "Editing metrics (mean ± std, %)") -> None:
        if not summaries:
            self.console.print("[yellow]No reports to show[/]")
            return
        splits = list(summaries[0].mean)
        table = Table(title=title)
        table.add_column("Variant", style="bold")
        table.add_column("Seeds", justify="right")
        for split in splits:
            table.add_column(SPLIT_TITLES.get(split, split), justify="right")
        for summary in summaries:
            seeds = str(summary.seeds) if not summary.failed else f"{summary.seeds} [red](+{summary.failed} failed)[/]"
            table.add_row(summary.label, seeds, *(summary.cell(s) for s in splits))
        self.console.print(table)

    def show_frame(self, frame: pd.DataFrame, title: str = "") -> None:
        """Any table, e.g. the method-vs-baseline comparison; booleans render as yes/no."""
        table = Table(title=title or None)
        for column in frame.columns:
            table.add_column(str(column), justify="right" if pd.api.types.is_numeric_dtype(frame[column]) else "left")
        for _, row in frame.iterrows():
            table.add_row(*(_format(v) for v in row.tolist()))
        self.console.print(table)

    def show_checks(self, checks: Iterable) -> None:
        """One row per verification check; each check has ``name``, ``passed`` and ``detail``."""
        table = Table(title="Verification")
        table.add_column("Check", style="bold")
        table.add_column("Result")
        table.add_column("Observed")
        for check in checks:
            mark = "[green]PASS[/]" if check.passed else "[red]FAIL[/]"
            table.add_row(check.name, mark, check.detail)
        self.console.print(table)


def _format(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "[green]yes[/]" if value else "[red]no[/]"
    if value is None or (isinstance(value, float) and pd.isna(value)):
        return "n/a"
    if isinstance(value, float):
        return f"{value:.4g}"
    return str(value)
