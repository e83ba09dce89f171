"""Reliability, locality and generality risks of an edited model.

All risks are graph nodes: they stay differentiable in the edit delta and, when
ω is passed as a leaf, in ω.
"""

from dataclasses import dataclass
from typing import Callable, Dict, Optional, Sequence, Union

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..autodiff import Tensor, ops
from ..model import OmegaDistribution, PromptBatch, PromptVec, ToyModel
from ..model.toy_model import DeltaLike
from .kernels import KernelSpec, mmd_generality_risk

logger = structlog.get_logger(__name__)

PROB_FLOOR = 1e-12
COMPONENTS = ("rel", "loc", "gen")

OmegaLike = Union[float, Tensor]


class RiskWeights(BaseModel):
    """Weights of the three edit risks in the total."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    w_rel: float = Field(1.0, ge=0.0)
    w_loc: float = Field(1.0, ge=0.0)
    w_gen: float = Field(1.0, ge=0.0)

    @model_validator(mode="after")
    def _not_all_zero(self) -> "RiskWeights":
        if self.w_rel == 0 and self.w_loc == 0 and self.w_gen == 0:
            raise ValueError("at least one risk weight must be positive")
        return self

    def weight(self, component: str) -> float:
        return {"rel": self.w_rel, "loc": self.w_loc, "gen": self.w_gen}[component]

    def active(self) -> Sequence[str]:
        return [c for c in COMPONENTS if self.weight(c) > 0]


@dataclass
class RiskReport:
    """Expected risk components of one training step."""

    step: int
    r_rel: float = 0.0
    r_loc: float = 0.0
    r_gen: float = 0.0
    r_total: float = 0.0
    tv_penalty: float = 0.0
    lambda_value: float = 0.0

    def __post_init__(self) -> None:
        if self.r_rel < 0 or self.r_loc < -1e-12 or self.tv_penalty < 0:
            raise ValueError(f"negative risk in report: {self}")

    @property
    def objective(self) -> float:
        return self.r_total + self.lambda_value * self.tv_penalty

    def as_row(self) -> Dict[str, float]:
        return {
            "step": self.step,
            "r_rel": self.r_rel,
            "r_loc": self.r_loc,
            "r_gen": self.r_gen,
            "tv_penalty": self.tv_penalty,
            "lambda": self.lambda_value,
            "r_total": self.r_total,
        }


@dataclass
class TripletBatch:
    """Prompt splits used by the edit risks.

    ``edit`` carries the source prompts labelled with the edit targets,
    ``rephrase`` the semantic-shift prompts and ``out`` the out-of-scope prompts.
    """

    edit: PromptBatch
    rephrase: PromptBatch
    out: PromptBatch

    @classmethod
    def from_triplets(cls, triplets: Sequence, rephrase_mode: str = "single") -> "TripletBatch":
        if not triplets:
            raise ValueError("triplet batch needs at least one record")
        edit = [t.edit_prompt() for t in triplets]
        rephrase = [p for t in triplets for p in t.rephrases(rephrase_mode)]
        out = [p for t in triplets for p in (t.loc, t.m_loc)]
        return cls(PromptBatch.from_prompts(edit), PromptBatch.from_prompts(rephrase), PromptBatch.from_prompts(out))

    @classmethod
    def from_prompts(
        cls, edit: Sequence[PromptVec], rephrase: Sequence[PromptVec], out: Sequence[PromptVec]
    ) -> "TripletBatch":
        return cls(PromptBatch.from_prompts(edit), PromptBatch.from_prompts(rephrase), PromptBatch.from_prompts(out))


# ---------------------------------------------------------------- primitives on logits

def nll_from_logits(logits: Tensor, targets: Sequence[int]) -> Tensor:
    """Mean of ``-log softmax(logits)[target]`` with a probability floor."""
    probs = ops.softmax_logits(ops.as_tensor(logits))
    picked = ops.pick(probs, targets)
    return ops.neg(ops.mean(ops.log(ops.clamp_min(picked, PROB_FLOOR))))


def kl_from_logits(logits_p: Tensor, logits_q: Tensor) -> Tensor:
    """Mean over rows of KL(softmax(p) ‖ softmax(q)) in nats."""
    p = ops.softmax_logits(ops.as_tensor(logits_p))
    q = ops.softmax_logits(ops.as_tensor(logits_q))
    log_ratio = ops.sub(ops.log(ops.clamp_min(p, PROB_FLOOR)), ops.log(ops.clamp_min(q, PROB_FLOOR)))
    return ops.mean(ops.sum(ops.mul(p, log_ratio), axis=-1))


def categorical_kl(p: np.ndarray, q: np.ndarray) -> float:
    """KL(p ‖ q) for explicit probability vectors, with the same floor."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    return float(np.sum(p * (np.log(np.maximum(p, PROB_FLOOR)) - np.log(np.maximum(q, PROB_FLOOR)))))


# ---------------------------------------------------------------- risks

def reliability_risk(
    model: ToyModel,
    delta: DeltaLike,
    omega: OmegaLike,
    batch: PromptBatch,
    hidden: Optional[Tensor] = None,
) -> Tensor:
    """NLL of the edit targets ``batch.y`` under the edited model at ω."""
    if len(batch) == 0:
        raise ValueError("reliability risk needs a non-empty batch")
    if hidden is None:
        hidden = model.hidden(batch, delta)
    return nll_from_logits(model.head_logits(hidden, omega, delta), batch.y)


def locality_risk(
    base_model: ToyModel,
    model: ToyModel,
    delta: DeltaLike,
    omega: OmegaLike,
    batch: PromptBatch,
    hidden: Optional[Tensor] = None,
    base_hidden: Optional[np.ndarray] = None,
) -> Tensor:
    """KL(edited ‖ base) on out-of-scope prompts, both under the same ω.

    The base distribution depends on ω only; no gradient reaches the edit.
    """
    if len(batch) == 0:
        raise ValueError("locality risk needs a non-empty batch")
    if hidden is None:
        hidden = model.hidden(batch, delta)
    if base_hidden is None:
        base_hidden = base_model.last_hidden(None, batch)
    base_logits = base_model.head_logits(Tensor(base_hidden), omega, None)
    return kl_from_logits(model.head_logits(hidden, omega, delta), base_logits)


def scaled_hidden(hidden: Tensor, omega: OmegaLike) -> Tensor:
    return ops.mul(hidden, ops.add(1.0, omega))


def generality_risk(
    model: ToyModel,
    delta: DeltaLike,
    omega: OmegaLike,
    edit_batch: PromptBatch,
    rephrase_batch: PromptBatch,
    spec: KernelSpec,
    estimator: str = "biased",
    edit_hidden: Optional[Tensor] = None,
    rephrase_hidden: Optional[Tensor] = None,
) -> Tensor:
    """MMD between ω-scaled hidden states of edit and rephrase prompts."""
    if edit_hidden is None:
        edit_hidden = model.hidden(edit_batch, delta)
    if rephrase_hidden is None:
        rephrase_hidden = model.hidden(rephrase_batch, delta)
    return mmd_generality_risk(scaled_hidden(edit_hidden, omega), scaled_hidden(rephrase_hidden, omega), spec, estimator)


@dataclass
class HiddenCache:
    """Per-split last hidden states of one forward pass, plus base-model states."""

    edit: Tensor
    rephrase: Tensor
    out: Tensor
    base_out: np.ndarray

    @classmethod
    def compute(
        cls,
        model: ToyModel,
        delta: DeltaLike,
        batch: TripletBatch,
        base_out: Optional[np.ndarray] = None,
        features: Optional[Dict[str, Tensor]] = None,
    ) -> "HiddenCache":
        features = features or {}
        return cls(
            edit=model.hidden(batch.edit, delta, features.get("edit")),
            rephrase=model.hidden(batch.rephrase, delta, features.get("rephrase")),
            out=model.hidden(batch.out, delta, features.get("out")),
            base_out=model.last_hidden(None, batch.out) if base_out is None else base_out,
        )


def risk_components(
    model: ToyModel,
    delta: DeltaLike,
    omega: OmegaLike,
    batch: TripletBatch,
    weights: "RiskWeights",
    spec: Optional[KernelSpec],
    estimator: str = "biased",
    cache: Optional[HiddenCache] = None,
) -> Dict[str, Tensor]:
    """Unweighted risks for every component with positive weight."""
    if cache is None:
        cache = HiddenCache.compute(model, delta, batch)
    components: Dict[str, Tensor] = {}
    if weights.w_rel > 0:
        components["rel"] = reliability_risk(model, delta, omega, batch.edit, hidden=cache.edit)
    if weights.w_loc > 0:
        components["loc"] = locality_risk(
            model, model, delta, omega, batch.out, hidden=cache.out, base_hidden=cache.base_out
        )
    if weights.w_gen > 0:
        if spec is None:
            raise ValueError("generality risk needs a kernel spec")
        components["gen"] = generality_risk(
            model,
            delta,
            omega,
            batch.edit,
            batch.rephrase,
            spec,
            estimator,
            edit_hidden=cache.edit,
            rephrase_hidden=cache.rephrase,
        )
    return components


def weighted_total(components: Dict[str, Tensor], weights: "RiskWeights") -> Tensor:
    total: Optional[Tensor] = None
    for name, value in components.items():
        term = ops.mul(value, weights.weight(name))
        total = term if total is None else ops.add(total, term)
    return total if total is not None else Tensor(0.0)


def edit_risk_total(
    model: ToyModel,
    delta: DeltaLike,
    omega: OmegaLike,
    batch: TripletBatch,
    weights: "RiskWeights",
    spec: Optional[KernelSpec],
    estimator: str = "biased",
) -> Tensor:
    """``w_rel·R_rel + w_loc·R_loc + w_gen·R_gen`` as one node."""
    return weighted_total(risk_components(model, delta, omega, batch, weights, spec, estimator), weights)


def expectation_over_omega(
    f: Callable[[float], Union[Tensor, float]],
    distribution: OmegaDistribution,
    n_samples: int,
    seed: int,
) -> Tensor:
    """Monte-Carlo mean of ``f`` over ``n_samples`` seeded draws of ω."""
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    total: Optional[Tensor] = None
    for sample in distribution.sample(n_samples, seed):
        value = ops.as_tensor(f(sample.value))
        total = value if total is None else ops.add(total, value)
    return ops.mul(total, 1.0 / n_samples)
