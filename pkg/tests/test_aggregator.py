import pandas as pd
import pytest
from rich.console import Console

from src.aggregator import MetricsAggregator, load_reports, write_report
from src.cli import CheckResult
from src.dashboard import ReportDisplay
from src.evaluation import MetricsReport


@pytest.fixture
def reports():
    return [
        MetricsReport(rel_matches=1, rel_n=2, t_loc_matches=2, t_loc_n=2, seed=0, variant="full"),
        MetricsReport(rel_matches=2, rel_n=2, t_loc_matches=2, t_loc_n=2, seed=1, variant="full"),
        MetricsReport(rel_matches=0, rel_n=2, seed=0, variant="naive"),
        MetricsReport(seed=1, variant="naive", status="failed", error="diverged"),
    ]


def test_aggregate_mean_and_sample_std(reports):
    table = MetricsAggregator().aggregate(reports)
    assert list(table["variant"]) == ["full", "naive"]
    full = table.iloc[0]
    assert full["rel_mean"] == pytest.approx(0.75)
    assert full["rel_std"] == pytest.approx(0.35355339, abs=1e-6)
    assert full["t_loc_std"] == 0.0
    naive = table.iloc[1]
    assert (naive["seeds"], naive["failed"]) == (1, 1)
    assert naive["rel_std"] == 0.0


def test_empty_aggregate_has_columns():
    table = MetricsAggregator().aggregate([])
    assert table.empty
    assert "rel_mean" in table.columns


def test_summary_cells(reports):
    full, naive = MetricsAggregator().summaries(reports)
    assert full.cell("rel") == "75.00 ± 35.36"
    assert naive.cell("gen") == "n/a"


def test_reports_round_trip_through_disk(reports, tmp_path):
    for report in reports:
        write_report(report, tmp_path / report.variant / f"seed_{report.seed}" / "metrics.json")
    loaded = load_reports(tmp_path)
    assert sorted((r.variant, r.seed) for r in loaded) == sorted((r.variant, r.seed) for r in reports)


def test_display_renders_tables(reports):
    console = Console(record=True, width=140)
    display = ReportDisplay(console=console)
    display.show_metrics(MetricsAggregator().summaries(reports))
    display.show_checks([CheckResult("kl axioms", True, "ok"), CheckResult("mmd", False, "1e-2")])
    display.show_dataset_summary({"easy": 3, "hard": 2, "total": 5})
    text = console.export_text()
    assert "75.00 ± 35.36" in text
    assert "FAIL" in text
    assert "hard" in text


def _gen_report(variant, seed, T, gen, beta=None, t_loc=1.0):
    return MetricsReport(
        rel_matches=10,
        rel_n=10,
        gen_matches=round(10 * gen),
        gen_n=10,
        t_loc_matches=round(10 * t_loc),
        t_loc_n=10,
        beta=beta,
        seed=seed,
        T=T,
        variant=variant,
    )


@pytest.fixture
def protocol_reports():
    reports = []
    for seed in (0, 1):
        reports += [
            _gen_report("full", seed, 1, 1.0, beta=0.8, t_loc=0.9),
            _gen_report("naive", seed, 1, 0.9, beta=0.5, t_loc=0.4),
            _gen_report("full", seed, 5, 1.0),
            _gen_report("full", seed, 10, 0.9),
            _gen_report("naive", seed, 5, 0.9),
            _gen_report("naive", seed, 10, 0.6),
        ]
    return reports


def test_aggregate_keeps_each_T_apart(protocol_reports):
    table = MetricsAggregator().aggregate(protocol_reports)
    assert list(zip(table["variant"], table["T"])) == [
        ("full", 1),
        ("naive", 1),
        ("full", 5),
        ("full", 10),
        ("naive", 5),
        ("naive", 10),
    ]
    assert table.iloc[0]["beta_mean"] == pytest.approx(0.8)
    assert table.iloc[2]["beta_mean"] is None or pd.isna(table.iloc[2]["beta_mean"])


def test_compare_method_with_baseline(protocol_reports):
    comparison = MetricsAggregator().compare(protocol_reports).set_index("metric")
    assert list(comparison.index) == ["rel", "gen", "t_loc", "beta", "gen_drop_T5_T10"]
    assert comparison.loc["gen", "difference"] == pytest.approx(0.1)
    assert comparison.loc["t_loc", "holds"]
    assert comparison.loc["beta", "holds"]
    drop = comparison.loc["gen_drop_T5_T10"]
    assert (drop["method"], drop["baseline"]) == (pytest.approx(0.1), pytest.approx(0.3))
    assert drop["expected"] == "lower" and drop["holds"]


def test_compare_counts_saturated_method_as_holding():
    reports = [
        _gen_report("full", 0, 1, 1.0, t_loc=0.8),
        _gen_report("naive", 0, 1, 1.0, t_loc=0.8),
        _gen_report("full", 0, 5, 1.0),
        _gen_report("full", 0, 10, 1.0),
        _gen_report("naive", 0, 5, 1.0),
        _gen_report("naive", 0, 10, 1.0),
    ]
    comparison = MetricsAggregator().compare(reports).set_index("metric")
    assert comparison.loc["gen", "difference"] == 0.0
    assert comparison.loc["gen", "holds"]
    assert comparison.loc["gen_drop_T5_T10", "holds"]
    assert not comparison.loc["t_loc", "holds"]
    assert comparison.loc["rel", "holds"]


def test_compare_without_baseline_rows_is_empty(reports):
    only_full = [r for r in reports if r.variant == "full"]
    assert MetricsAggregator().compare(only_full).empty


def test_display_renders_comparison(protocol_reports):
    console = Console(record=True, width=140)
    ReportDisplay(console=console).show_frame(MetricsAggregator().compare(protocol_reports), title="full vs naive")
    text = console.export_text()
    assert "gen_drop_T5_T10" in text
    assert "yes" in text
