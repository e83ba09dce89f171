"""Alternating primal-dual training of an edit delta."""

from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import structlog

from ..autodiff import Graph, ParamSet, Tensor, backward, ops
from ..errors import DivergenceError
from ..model import EditDelta, ToyModel
from ..risks import RiskReport, TripletBatch
from .config import TrainConfig
from .lambda_net import DualParams, LambdaNet
from .objective import EditObjective, Objective, lagrangian, omega_terms
from .optim import make_optimizer

logger = structlog.get_logger(__name__)

OMEGA_STREAM = 1
LAMBDA_STREAM = 2
HISTORY_COLUMNS = ["step", "r_rel", "r_loc", "r_gen", "tv_penalty", "lambda", "r_total"]


def stream_seed(seed: int, *keys: int) -> int:
    return int(np.random.SeedSequence([seed, *keys]).generate_state(1)[0])


def omega_draws(cfg: TrainConfig, step: int) -> List[float]:
    """The ω draws shared by both halves of ``step``."""
    return [s.value for s in cfg.omega.sample(cfg.n_omega, stream_seed(cfg.seed, OMEGA_STREAM, step))]


@dataclass
class PrimalDualState:
    """Everything one run owns: edit parameters, dual parameters and optimizer buffers."""

    objective: Objective
    edit: ParamSet
    cfg: TrainConfig
    net: Optional[LambdaNet] = None
    dual: Optional[DualParams] = None
    optimizers: dict = field(default_factory=dict)

    @classmethod
    def create(cls, objective: Objective, edit: ParamSet, cfg: TrainConfig) -> "PrimalDualState":
        state = cls(objective=objective, edit=edit.copy(), cfg=cfg)
        if cfg.lambda_mode == "adaptive":
            shapes = {name: value.shape for name, value in edit.values.items()}
            state.net = LambdaNet.for_edit(shapes, cfg.dual_dim, cfg.lambda_depth, cfg.lambda_hidden)
            state.dual = state.net.init(cfg.dual_dim, stream_seed(cfg.seed, LAMBDA_STREAM), cfg.lambda_init)
        state.optimizers = {
            "primal": make_optimizer(cfg.optimizer),
            "delta": make_optimizer(cfg.optimizer, ascend=True),
            "net": make_optimizer(cfg.optimizer, ascend=True),
        }
        return state

    def penalty_weight(self, edit_values) -> Union[float, Tensor]:
        if self.net is None:
            return self.cfg.lambda_fixed
        return self.net.forward(self.dual.delta.values["delta"], self.dual.net.values, edit_values)

    def needs_tangent(self) -> bool:
        return self.cfg.uses_penalty and self.cfg.omega_grad_mode == "exact"


def primal_step(state: PrimalDualState, omegas: Sequence[float], lr: float, step: int = 0) -> RiskReport:
    """``φ_e ← φ_e − γ1 ∂G/∂φ_e`` at the current dual parameters; returns the pre-update report."""
    graph = Graph(tangent=state.needs_tangent())
    leaves = state.edit.attach(graph)
    lam = state.penalty_weight(leaves)
    objective_value, report = lagrangian(graph, state.objective, leaves, lam, omegas, state.cfg, step)
    if objective_value.attached:
        grads = state.edit.grads_from(backward(graph, objective_value))
        state.optimizers["primal"].step(state.edit, grads, lr)
    return report


def current_penalty(state: PrimalDualState, omegas: Sequence[float]) -> float:
    graph = Graph(tangent=state.cfg.omega_grad_mode == "exact")
    terms = omega_terms(
        graph, state.objective, state.edit.values, omegas, True, state.cfg.omega_grad_mode, state.cfg.omega_fd_step
    )
    return terms.tv().item()


def dual_step(state: PrimalDualState, omegas: Sequence[float], lr: float) -> float:
    """``δ ← δ + γ2 ∇_δ G`` at the updated edit.

    Only the λ·penalty term depends on the dual parameters, so the gradient is
    the penalty value times ∇λ.  Returns the penalty; a zero penalty skips the step.
    """
    if state.net is None:
        return 0.0
    penalty = current_penalty(state, omegas)
    if penalty == 0.0:
        return penalty
    graph = Graph()
    delta_leaves = state.dual.delta.attach(graph)
    net_leaves = state.dual.net.attach(graph)
    lam = state.net.forward(delta_leaves["delta"], net_leaves, state.edit.values)
    grads = backward(graph, ops.mul(lam, penalty))
    state.optimizers["delta"].step(state.dual.delta, state.dual.delta.grads_from(grads), lr)
    state.optimizers["net"].step(state.dual.net, state.dual.net.grads_from(grads), lr)
    return penalty


def _plateaued(history: Sequence[RiskReport], window: int, tol: float) -> bool:
    if len(history) <= window:
        return False
    previous = history[-1 - window].r_total
    change = abs(history[-1].r_total - previous) / max(abs(previous), 1e-12)
    return change < tol


def run_primal_dual(
    objective: Objective, edit: ParamSet, cfg: TrainConfig
) -> Tuple[PrimalDualState, List[RiskReport]]:
    """Alternate primal and dual steps until ``max_steps``, a plateau or divergence."""
    state = PrimalDualState.create(objective, edit, cfg)
    history: List[RiskReport] = []
    for step in range(cfg.max_steps):
        omegas = omega_draws(cfg, step)
        lr_primal, lr_dual = cfg.learning_rates(step)
        report = primal_step(state, omegas, lr_primal, step)
        if not np.isfinite(report.r_total) or report.r_total > cfg.divergence_threshold:
            raise DivergenceError(f"r_total={report.r_total:.6g} at step {step} exceeds {cfg.divergence_threshold:g}")
        history.append(report)
        dual_step(state, omegas, lr_dual)
        logger.debug(
            "training step",
            step=step,
            r_total=report.r_total,
            tv_penalty=report.tv_penalty,
            lam=report.lambda_value,
        )
        if _plateaued(history, cfg.plateau_window, cfg.plateau_tol):
            logger.debug("training plateaued", step=step)
            break
    return state, history


def train_edit(
    model: ToyModel,
    triplets: Sequence,
    cfg: TrainConfig,
    init_delta: Optional[EditDelta] = None,
) -> Tuple[EditDelta, List[RiskReport]]:
    """Train an edit delta on ``triplets``; deterministic given ``cfg.seed``.

    ``init_delta`` continues from an earlier edit (sequential editing).
    """
    if not triplets:
        raise ValueError("train_edit needs at least one triplet")
    batch = TripletBatch.from_triplets(triplets, cfg.rephrase_mode)
    delta = init_delta if init_delta is not None else EditDelta.zeros(model.dims)
    delta.validate(model.dims)

    spec = None
    if cfg.weights.w_gen > 0:
        pooled = np.concatenate([model.last_hidden(delta, batch.edit), model.last_hidden(delta, batch.rephrase)])
        spec = cfg.kernel.resolve(pooled)

    objective = EditObjective(model, batch, cfg, spec)
    state, history = run_primal_dual(objective, delta.to_paramset(), cfg)
    trained = EditDelta.from_paramset(state.edit)
    if history:
        last = history[-1]
        logger.info(
            "edit trained",
            records=len(triplets),
            steps=len(history),
            r_total=round(last.r_total, 6),
            lam=round(last.lambda_value, 6),
        )
    return trained, history


def history_frame(history: Sequence[RiskReport]) -> pd.DataFrame:
    return pd.DataFrame([r.as_row() for r in history], columns=HISTORY_COLUMNS)


def write_history(history: Sequence[RiskReport], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    history_frame(history).to_csv(path, index=False)
    return path
