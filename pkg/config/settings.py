"""Configuration management for the edit lab.

Process settings come from the environment (and an optional ``.env`` file);
experiments are described by one TOML file per run.
"""

import hashlib
import json
import sys
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
import structlog

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - Python 3.10 fallback
    import tomli as tomllib
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from src.envgen import WorldSpec
from src.errors import ConfigError
from src.evaluation import VARIANTS, parse_variant
from src.irm import TrainConfig
from src.model import DEFAULT_EDIT_LAYERS, LAYERS, ModelDims

logger = structlog.get_logger(__name__)

ENV_PATH = Path(__file__).parent.parent / ".env"
SEED_STREAMS = ("world", "init", "omega", "batch", "lambda")
DEFAULT_ABLATION = ("full", "naive", "no_rel", "no_loc", "no_gen", "no_tv", "fixed_lambda")


class AppSettings(BaseSettings):
    """Process-level settings, read from ``ODEDIT_*`` variables."""

    model_config = SettingsConfigDict(env_prefix="ODEDIT_", extra="ignore")

    log_level: str = "INFO"
    log_format: str = "console"
    output_dir: Path = Path("artifacts")
    workers: int = Field(1, ge=1)

    @field_validator("log_level")
    @classmethod
    def _level(cls, value: str) -> str:
        value = value.upper()
        if value not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            raise ValueError(f"unknown log level '{value}'")
        return value

    @field_validator("log_format")
    @classmethod
    def _format(cls, value: str) -> str:
        if value not in ("console", "json"):
            raise ValueError("log_format must be 'console' or 'json'")
        return value


def load_settings(env_path: Optional[Path] = None) -> AppSettings:
    """Load ``.env`` (when present) into the environment, then read settings from it."""
    env_path = env_path or ENV_PATH
    if env_path.exists():
        load_dotenv(env_path)
    try:
        return AppSettings()
    except ValidationError as exc:
        raise ConfigError(_describe(exc, prefix="ODEDIT_")) from exc


class ModelConfig(BaseModel):
    """Hidden width and edit layers; input and answer sizes come from the world."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    d_h: int = Field(32, gt=0)
    logit_scale: float = Field(8.0, gt=0.0)
    edit_layers: Tuple[str, ...] = DEFAULT_EDIT_LAYERS

    @field_validator("edit_layers")
    @classmethod
    def _known(cls, value: Tuple[str, ...]) -> Tuple[str, ...]:
        unknown = [layer for layer in value if layer not in LAYERS]
        if unknown or not value:
            raise ValueError(f"edit_layers must be a non-empty subset of {LAYERS}")
        return tuple(value)

    def dims(self, world: WorldSpec) -> ModelDims:
        return ModelDims(
            d_img=world.d_img,
            d_txt=world.d_txt,
            d_h=self.d_h,
            V=world.V,
            logit_scale=self.logit_scale,
            edit_layers=self.edit_layers,
        )


class EvalConfig(BaseModel):
    """Evaluation protocol settings.

    ``report_at`` lists extra edit counts below ``T`` at which a sequential run is
    also evaluated, from the same chain of edits.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    rephrase_mode: str = "single"
    n_edit_records: int = Field(10, ge=1)
    report_at: List[int] = []
    dump_embeddings: bool = True
    compare_naive: bool = True

    @field_validator("rephrase_mode")
    @classmethod
    def _mode(cls, value: str) -> str:
        if value not in ("single", "multi"):
            raise ValueError("rephrase_mode must be 'single' or 'multi'")
        return value


class RunConfig(BaseModel):
    """One experiment: world, model, training, evaluation and the seeds to run."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    world: WorldSpec = WorldSpec()
    model: ModelConfig = ModelConfig()
    train: TrainConfig = TrainConfig()
    eval: EvalConfig = EvalConfig()
    variant: str = "full"
    variants: List[str] = list(DEFAULT_ABLATION)
    seeds: List[int] = [0]
    T: int = Field(1, ge=1)
    n_records: int = Field(100, ge=1)
    hard_fraction: float = Field(0.5, ge=0.0, le=1.0)
    output_dir: Optional[str] = None
    dataset: Optional[str] = None

    @field_validator("variant")
    @classmethod
    def _variant(cls, value: str) -> str:
        parse_variant(value)
        return value

    @field_validator("variants")
    @classmethod
    def _variants(cls, value: List[str]) -> List[str]:
        if not value:
            raise ValueError(f"variants must name at least one of {VARIANTS}")
        for tag in value:
            parse_variant(tag)
        return value

    @field_validator("seeds")
    @classmethod
    def _seeds(cls, value: List[int]) -> List[int]:
        if not value:
            raise ValueError("seeds must be non-empty")
        if len(set(value)) != len(value):
            raise ValueError("seeds must be distinct")
        return value

    @model_validator(mode="after")
    def _enough_records(self) -> "RunConfig":
        if self.T > self.eval.n_edit_records:
            raise ValueError(f"T={self.T} exceeds eval.n_edit_records={self.eval.n_edit_records}")
        if self.eval.n_edit_records > self.n_records:
            raise ValueError("eval.n_edit_records exceeds n_records")
        early = [t for t in self.eval.report_at if not 1 <= t < self.T]
        if early:
            raise ValueError(f"eval.report_at values {early} must lie in [1, T={self.T})")
        return self

    def dims(self) -> ModelDims:
        return self.model.dims(self.world)

    def resolve_output_dir(self, settings: Optional[AppSettings] = None) -> Path:
        if self.output_dir:
            return Path(self.output_dir)
        return (settings or AppSettings()).output_dir

    def dataset_path(self, settings: Optional[AppSettings] = None) -> Path:
        if self.dataset:
            return Path(self.dataset)
        return self.resolve_output_dir(settings) / "dataset.jsonl"


def _describe(exc: ValidationError, prefix: str = "") -> str:
    parts = []
    for error in exc.errors():
        location = ".".join(str(p) for p in error["loc"]) or "<root>"
        parts.append(f"{prefix}{location}: {error['msg']}")
    return "; ".join(parts)


def parse_run_config(data: dict) -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_describe(exc)) from exc


def load_run_config(path: Union[str, Path]) -> RunConfig:
    """Parse and validate a TOML run file.

    Raises:
        ConfigError: unreadable file, TOML syntax error or invalid field (named in the message).
    """
    path = Path(path)
    try:
        with path.open("rb") as handle:
            data = tomllib.load(handle)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    cfg = parse_run_config(data)
    logger.debug("run config loaded", path=str(path), hash=config_hash(cfg)[:12])
    return cfg


def config_hash(cfg: RunConfig) -> str:
    """SHA-256 of the canonical JSON form of the validated config."""
    canonical = json.dumps(cfg.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def derive_seed(base_seed: int, stream: str) -> int:
    """Independent sub-seed for a named stream of ``base_seed``."""
    if stream not in SEED_STREAMS:
        raise ValueError(f"unknown seed stream '{stream}'; expected one of {SEED_STREAMS}")
    sequence = np.random.SeedSequence(base_seed, spawn_key=(SEED_STREAMS.index(stream),))
    return int(sequence.generate_state(1)[0])
