"""Training configuration of an edit run."""

from typing import Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ..model import OmegaDistribution
from ..risks import DEFAULT_MULTIPLIERS, KernelSpec, RiskWeights, median_heuristic

PENALTY_TARGETS = ("full_edit_risk", "gen_risk_only")
OPTIMIZERS = ("sgd", "adam")
LR_SCHEDULES = ("constant", "inverse_sqrt")
LAMBDA_MODES = ("adaptive", "fixed")
REPHRASE_MODES = ("single", "multi")
OMEGA_GRAD_MODES = ("exact", "central")


class KernelConfig(BaseModel):
    """How generality-risk bandwidths are chosen."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    rule: str = "median-heuristic"
    multipliers: Tuple[float, ...] = DEFAULT_MULTIPLIERS
    bandwidths: Optional[Tuple[float, ...]] = None
    estimator: str = "biased"

    @model_validator(mode="after")
    def _consistent(self) -> "KernelConfig":
        if self.rule not in ("median-heuristic", "fixed"):
            raise ValueError(f"unknown bandwidth rule '{self.rule}'")
        if self.rule == "fixed" and not self.bandwidths:
            raise ValueError("fixed rule needs explicit bandwidths")
        if self.estimator not in ("biased", "unbiased"):
            raise ValueError(f"unknown estimator '{self.estimator}'")
        if any(m <= 0 for m in self.multipliers) or not self.multipliers:
            raise ValueError("multipliers must be positive and non-empty")
        return self

    def resolve(self, pooled: np.ndarray) -> KernelSpec:
        if self.rule == "fixed":
            return KernelSpec(tuple(self.bandwidths), rule="fixed")
        return median_heuristic(pooled, self.multipliers)


class TrainConfig(BaseModel):
    """Primal-dual training settings.

    ``lr_primal`` and ``lr_dual`` are the step sizes of the descent on the edit
    and the ascent on the dual parameters. ``lambda_init`` is the adaptive λ
    before the first dual step.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    lr_primal: float = Field(1e-2, gt=0.0)
    lr_dual: float = Field(1e-3, gt=0.0)
    n_omega: int = Field(8, ge=1)
    max_steps: int = Field(500, ge=0)
    seed: int = 0
    weights: RiskWeights = RiskWeights()
    kernel: KernelConfig = KernelConfig()
    omega: OmegaDistribution = OmegaDistribution()
    penalty_target: str = "full_edit_risk"
    optimizer: str = "sgd"
    lr_schedule: str = "constant"
    lr_decay_steps: int = Field(100, ge=1)
    lambda_mode: str = "adaptive"
    lambda_fixed: float = Field(0.0, ge=0.0)
    lambda_init: float = Field(0.01, gt=0.0)
    lambda_depth: int = Field(3, ge=2)
    lambda_hidden: int = Field(16, ge=1)
    dual_dim: int = Field(8, ge=1)
    rephrase_mode: str = "single"
    omega_grad_mode: str = "exact"
    omega_fd_step: float = Field(1e-4, gt=0.0)
    plateau_tol: float = Field(1e-5, ge=0.0)
    plateau_window: int = Field(20, ge=1)
    divergence_threshold: float = Field(1e6, gt=0.0)

    @field_validator("penalty_target")
    @classmethod
    def _penalty_target(cls, value: str) -> str:
        return _one_of("penalty_target", value, PENALTY_TARGETS)

    @field_validator("optimizer")
    @classmethod
    def _optimizer(cls, value: str) -> str:
        return _one_of("optimizer", value, OPTIMIZERS)

    @field_validator("lr_schedule")
    @classmethod
    def _lr_schedule(cls, value: str) -> str:
        return _one_of("lr_schedule", value, LR_SCHEDULES)

    @field_validator("lambda_mode")
    @classmethod
    def _lambda_mode(cls, value: str) -> str:
        return _one_of("lambda_mode", value, LAMBDA_MODES)

    @field_validator("rephrase_mode")
    @classmethod
    def _rephrase_mode(cls, value: str) -> str:
        return _one_of("rephrase_mode", value, REPHRASE_MODES)

    @field_validator("omega_grad_mode")
    @classmethod
    def _omega_grad_mode(cls, value: str) -> str:
        return _one_of("omega_grad_mode", value, OMEGA_GRAD_MODES)

    @property
    def uses_penalty(self) -> bool:
        return self.lambda_mode == "adaptive" or self.lambda_fixed > 0

    def learning_rates(self, step: int) -> Tuple[float, float]:
        """(primal, dual) step sizes at ``step``."""
        if self.lr_schedule == "constant":
            return self.lr_primal, self.lr_dual
        factor = 1.0 / np.sqrt(1.0 + step / self.lr_decay_steps)
        return self.lr_primal * factor, self.lr_dual * factor


def _one_of(name: str, value: str, allowed: Sequence[str]) -> str:
    if value not in allowed:
        raise ValueError(f"{name} must be one of {tuple(allowed)}, got '{value}'")
    return value
