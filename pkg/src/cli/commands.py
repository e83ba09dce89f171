"""Command implementations behind ``main.py``.

Each command returns ``True`` on full success. Library errors propagate except
per-seed training failures, which are recorded in that seed's report.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import structlog

from config.settings import AppSettings, RunConfig, config_hash, derive_seed, parse_run_config
from src.aggregator import MetricsAggregator, load_reports, write_report
from src.dashboard import ReportDisplay
from src.envgen import EditTriplet, WorldSpec, export_jsonl, generate_dataset, generate_world, import_jsonl, summarize
from src.errors import ConfigError, DivergenceError, NonFiniteError
from src.evaluation import (
    MetricsReport,
    ablation_runner,
    dump_embeddings,
    expand_variants,
    one_step_harness,
    sequential_reports,
    variant_config,
)
from src.irm import TrainConfig, history_frame
from src.model import ModelDims, init_model, save_checkpoint

from .manifest import RunManifest, read_manifest, write_manifest
from .verify import run_verify_suite

logger = structlog.get_logger(__name__)

TRAINING_FAILURES = (DivergenceError, NonFiniteError)


def apply_overrides(
    cfg: RunConfig,
    seeds: Optional[Sequence[int]] = None,
    variant: Optional[str] = None,
    T: Optional[int] = None,
    out: Optional[str] = None,
) -> RunConfig:
    """Command-line flags win over the file; the result is validated again."""
    data = cfg.model_dump()
    if seeds is not None:
        data["seeds"] = list(seeds)
    if variant is not None:
        data["variant"] = variant
    if T is not None:
        data["T"] = T
        evaluation = {**data["eval"], "report_at": [t for t in cfg.eval.report_at if t < T]}
        if T > cfg.eval.n_edit_records:
            evaluation["n_edit_records"] = T
        data["eval"] = evaluation
    if out is not None:
        data["output_dir"] = out
    return parse_run_config(data)


def parse_seeds(text: str) -> List[int]:
    """``"0,1,2"`` or ``"0-4"`` into a list of seeds."""
    seeds: List[int] = []
    try:
        for part in text.split(","):
            part = part.strip()
            if "-" in part[1:]:
                low, high = part.split("-", 1)
                seeds.extend(range(int(low), int(high) + 1))
            elif part:
                seeds.append(int(part))
    except ValueError as exc:
        raise ConfigError(f"seeds: cannot parse '{text}'") from exc
    return seeds


def lambda_tag(train: TrainConfig) -> str:
    return "adaptive" if train.lambda_mode == "adaptive" else f"{train.lambda_fixed:g}"


# ---------------------------------------------------------------- gen

def cmd_gen(
    cfg: RunConfig,
    settings: AppSettings,
    out: Optional[Path] = None,
    display: Optional[ReportDisplay] = None,
) -> bool:
    """Generate the world and the JSONL dataset with its world header."""
    path = Path(out) if out else cfg.dataset_path(settings)
    world = generate_world(cfg.world)
    records = generate_dataset(world, cfg.n_records, cfg.hard_fraction)
    export_jsonl(records, path, world=cfg.world)

    manifest = RunManifest(command="gen", config_hash=config_hash(cfg))
    manifest.add(path)
    write_manifest(manifest, path.parent)
    if display:
        display.show_dataset_summary(summarize(records), str(path))
    return True


# ---------------------------------------------------------------- per-seed jobs

@dataclass
class SeedJob:
    """Everything one worker needs to run one seed; picklable."""

    seed: int
    cfg: RunConfig
    dims: ModelDims
    records: List[EditTriplet]
    variants: List[str]
    out_dir: Path
    config_hash: str


@dataclass
class SeedResult:
    seed: int
    reports: List[MetricsReport]
    artifacts: List[str]


def choose_records(records: Sequence[EditTriplet], n: int, seed: int) -> List[EditTriplet]:
    """``n`` distinct records in a seed-dependent order."""
    if n > len(records):
        raise ConfigError(f"eval.n_edit_records: {n} exceeds the {len(records)} records in the dataset")
    rng = np.random.default_rng(derive_seed(seed, "batch"))
    return [records[i] for i in rng.choice(len(records), size=n, replace=False)]


def _seed_train_config(cfg: RunConfig, seed: int) -> TrainConfig:
    return cfg.train.model_copy(update={"seed": derive_seed(seed, "omega")})


def _failed_report(job: SeedJob, tag: str, exc: Exception) -> MetricsReport:
    logger.error("seed failed", seed=job.seed, variant=tag, error=str(exc))
    return MetricsReport(
        seed=job.seed, config_hash=job.config_hash, T=job.cfg.T, variant=tag, status="failed", error=str(exc)
    )


def _write_histories(histories, triplets, path: Path) -> Path:
    frames = []
    for history, triplet in zip(histories, triplets):
        frame = history_frame(history)
        frame.insert(0, "record_id", triplet.record_id)
        frames.append(frame)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.concat(frames, ignore_index=True).to_csv(path, index=False)
    return path


def _write_metrics(report: MetricsReport, run_dir: Path, stem: str = "metrics") -> List[Path]:
    json_path = write_report(report, run_dir / f"{stem}.json")
    csv_path = run_dir / f"{stem}.csv"
    MetricsAggregator().frame([report]).to_csv(csv_path, index=False)
    return [json_path, csv_path]


def run_edit_job(job: SeedJob) -> SeedResult:
    """Train and evaluate every variant of ``job`` on the seed's records.

    Sequential runs also write ``metrics_T<t>.json`` for every ``eval.report_at`` value.
    """
    cfg = job.cfg
    chosen = choose_records(job.records, cfg.eval.n_edit_records, job.seed)
    reports: List[MetricsReport] = []
    artifacts: List[str] = []
    for tag in job.variants:
        run_dir = job.out_dir / tag / f"seed_{job.seed}"
        model = init_model(job.dims, derive_seed(job.seed, "init"))
        train_cfg = variant_config(_seed_train_config(cfg, job.seed), tag)
        metadata = dict(seed=job.seed, config_hash=job.config_hash, variant=tag)
        try:
            if cfg.T == 1:
                report, deltas, histories = one_step_harness(
                    model, chosen, train_cfg, cfg.eval.rephrase_mode, **metadata
                )
                delta, edited, early = deltas[-1], chosen, {}
            else:
                by_T, delta, histories = sequential_reports(
                    model, chosen, [*cfg.eval.report_at, cfg.T], train_cfg, cfg.eval.rephrase_mode, **metadata
                )
                report, edited, deltas = by_T.pop(cfg.T), chosen[: cfg.T], delta
                early = by_T
        except TRAINING_FAILURES as exc:
            report = _failed_report(job, tag, exc)
            reports.append(report)
            artifacts.extend(str(p) for p in _write_metrics(report, run_dir))
            continue

        paths = [_write_histories(histories, edited, run_dir / "history.csv")]
        paths.extend(_write_metrics(report, run_dir))
        for T, early_report in early.items():
            paths.extend(_write_metrics(early_report, run_dir, stem=f"metrics_T{T}"))
            reports.append(early_report)
        paths.append(save_checkpoint(run_dir / "checkpoint.json", model, delta))
        if cfg.eval.dump_embeddings:
            embeddings_path, _ = dump_embeddings(model, deltas, edited, run_dir / "embeddings.csv")
            paths.extend([embeddings_path, embeddings_path.with_name("embeddings_overlap.json")])
        reports.append(report)
        artifacts.extend(str(p) for p in paths)
    return SeedResult(job.seed, reports, artifacts)


def run_ablate_job(job: SeedJob) -> SeedResult:
    """All variants of ``job`` on one model, one record set and one seed."""
    cfg = job.cfg
    chosen = choose_records(job.records, cfg.eval.n_edit_records, job.seed)
    model = init_model(job.dims, derive_seed(job.seed, "init"))
    try:
        rows = ablation_runner(
            model,
            chosen,
            _seed_train_config(cfg, job.seed),
            job.variants,
            T=cfg.T,
            rephrase_mode=cfg.eval.rephrase_mode,
            seed=job.seed,
            config_hash=job.config_hash,
        )
        reports = list(rows.values())
    except TRAINING_FAILURES as exc:
        reports = [_failed_report(job, tag, exc) for tag in expand_variants(job.variants)]
    artifacts: List[str] = []
    for report in reports:
        run_dir = job.out_dir / "ablate" / report.variant / f"seed_{job.seed}"
        artifacts.extend(str(p) for p in _write_metrics(report, run_dir))
    return SeedResult(job.seed, reports, artifacts)


def run_jobs(worker: Callable[[SeedJob], SeedResult], jobs: List[SeedJob], workers: int) -> List[SeedResult]:
    """Run jobs in a process pool when ``workers > 1``; results keep job order."""
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            return list(pool.map(worker, jobs))
    return [worker(job) for job in jobs]


def load_dataset(cfg: RunConfig, settings: AppSettings) -> Tuple[WorldSpec, List[EditTriplet]]:
    path = cfg.dataset_path(settings)
    if not path.exists():
        raise FileNotFoundError(f"dataset not found: {path} (run 'gen' first)")
    world, records = import_jsonl(path)
    if world is None:
        world = cfg.world
    elif world != cfg.world:
        logger.warning("dataset world differs from config; using the dataset header", path=str(path))
    return world, records


def _make_jobs(cfg: RunConfig, settings: AppSettings, variants: List[str]) -> List[SeedJob]:
    world, records = load_dataset(cfg, settings)
    dims = cfg.model.dims(world)
    digest = config_hash(cfg)
    out_dir = cfg.resolve_output_dir(settings)
    return [SeedJob(seed, cfg, dims, records, variants, out_dir, digest) for seed in cfg.seeds]


def _collect(results: List[SeedResult]) -> Tuple[List[MetricsReport], List[str]]:
    reports = [r for result in results for r in result.reports]
    artifacts = [a for result in results for a in result.artifacts]
    return reports, artifacts


# ---------------------------------------------------------------- edit / ablate

def cmd_edit(cfg: RunConfig, settings: AppSettings, display: Optional[ReportDisplay] = None) -> bool:
    """Train the configured variant (and the naive baseline) for every seed."""
    variants = [cfg.variant]
    if cfg.eval.compare_naive and cfg.variant != "naive":
        variants.append("naive")
    jobs = _make_jobs(cfg, settings, variants)
    logger.info("edit run started", seeds=len(jobs), variants=variants, T=cfg.T)
    reports, artifacts = _collect(run_jobs(run_edit_job, jobs, settings.workers))

    out_dir = cfg.resolve_output_dir(settings)
    out_dir.mkdir(parents=True, exist_ok=True)
    aggregator = MetricsAggregator()
    aggregate_path = out_dir / "aggregate.csv"
    aggregator.aggregate(reports).to_csv(aggregate_path, index=False)
    if display:
        display.show_metrics(aggregator.summaries(reports), title=f"Editing metrics, T={cfg.T} (mean ± std, %)")
    artifacts.append(str(aggregate_path))
    if "naive" in variants and cfg.variant != "naive":
        comparison_path = write_comparison(reports, out_dir, method=cfg.variant, display=display)
        if comparison_path:
            artifacts.append(str(comparison_path))
    return _finish("edit", cfg, out_dir, reports, artifacts)


def ablation_table(reports: Sequence[MetricsReport], train: TrainConfig) -> pd.DataFrame:
    """Aggregate plus each row's λ, learning rate and λ-net depth, in the variant order of ``reports``."""
    table = MetricsAggregator().aggregate(reports)
    configs = [variant_config(train, tag) for tag in table["variant"]]
    table.insert(1, "lambda", [lambda_tag(c) for c in configs])
    table.insert(2, "lr_primal", [c.lr_primal for c in configs])
    table.insert(3, "lambda_depth", [c.lambda_depth if c.lambda_mode == "adaptive" else None for c in configs])
    return table


def cmd_ablate(cfg: RunConfig, settings: AppSettings, display: Optional[ReportDisplay] = None) -> bool:
    """Every configured variant per seed, fixed-λ sweep included; writes ``ablation.csv``."""
    jobs = _make_jobs(cfg, settings, list(cfg.variants))
    logger.info("ablation started", seeds=len(jobs), variants=expand_variants(cfg.variants))
    reports, artifacts = _collect(run_jobs(run_ablate_job, jobs, settings.workers))

    out_dir = cfg.resolve_output_dir(settings)
    out_dir.mkdir(parents=True, exist_ok=True)
    table = ablation_table(reports, cfg.train)
    table_path = out_dir / "ablation.csv"
    table.to_csv(table_path, index=False)
    if display:
        display.show_metrics(MetricsAggregator().summaries(reports), title="Ablation (mean ± std, %)")
    return _finish("ablate", cfg, out_dir, reports, [*artifacts, str(table_path)])


def _finish(command: str, cfg: RunConfig, out_dir: Path, reports: Sequence[MetricsReport], artifacts) -> bool:
    failed = [(r.variant, r.seed) for r in reports if r.failed]
    if failed:
        logger.error("run finished with failures; no manifest written", command=command, failed=failed)
        return False
    manifest = RunManifest(command=command, config_hash=config_hash(cfg), artifacts=list(artifacts))
    write_manifest(manifest, out_dir)
    return True


# ---------------------------------------------------------------- verify / report

def cmd_verify(
    settings: AppSettings,
    out: Optional[Path] = None,
    display: Optional[ReportDisplay] = None,
    gradient_instances: int = 20,
) -> bool:
    """Run the verification suite; writes ``verify.csv`` and, when all pass, a manifest."""
    results = run_verify_suite(gradient_instances)
    out_dir = Path(out) if out else settings.output_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "verify.csv"
    pd.DataFrame([vars(r) for r in results], columns=["name", "passed", "detail"]).to_csv(path, index=False)
    if display:
        display.show_checks(results)
    failed = [r for r in results if not r.passed]
    for result in failed:
        logger.error("check failed", check=result.name, observed=result.detail)
    if failed:
        return False
    manifest = RunManifest(command="verify", artifacts=[str(path)])
    write_manifest(manifest, out_dir)
    return True


def write_comparison(
    reports: Sequence[MetricsReport],
    out_dir: Path,
    method: str = "full",
    display: Optional[ReportDisplay] = None,
) -> Optional[Path]:
    """``comparison.csv`` of ``method`` against the naive baseline; ``None`` when they share no row."""
    comparison = MetricsAggregator().compare(reports, method=method, baseline="naive")
    if comparison.empty:
        return None
    path = Path(out_dir) / "comparison.csv"
    comparison.to_csv(path, index=False)
    if display:
        display.show_frame(comparison, title=f"{method} vs naive (seed means)")
    return path


def check_manifests(directory: Path) -> List[str]:
    """Artifacts listed by earlier manifests in ``directory`` that no longer exist."""
    missing: List[str] = []
    for path in sorted(Path(directory).glob("manifest_*.json")):
        manifest = read_manifest(path)
        if manifest.command == "report":
            continue
        gone = manifest.missing()
        if gone:
            logger.warning("manifest lists missing artifacts", manifest=str(path), missing=len(gone))
        missing.extend(gone)
    return missing


def cmd_report(directory: Path, display: Optional[ReportDisplay] = None) -> bool:
    """Re-aggregate every per-seed ``metrics*.json`` below ``directory`` and compare full with naive."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"report directory not found: {directory}")
    check_manifests(directory)
    reports = load_reports(directory)
    aggregator = MetricsAggregator()
    path = directory / "report.csv"
    aggregator.aggregate(reports).to_csv(path, index=False)
    if display:
        display.show_metrics(aggregator.summaries(reports))
    artifacts = [str(path)]
    comparison_path = write_comparison(reports, directory, display=display)
    if comparison_path:
        artifacts.append(str(comparison_path))
    hashes = {r.config_hash for r in reports}
    digest = hashes.pop() if len(hashes) == 1 else None
    manifest = RunManifest(command="report", config_hash=digest, artifacts=artifacts)
    write_manifest(manifest, directory)
    return True
