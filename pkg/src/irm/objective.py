"""The IRM-TV objective: expected edit risk, TV-ℓ1 penalty over ω and the Lagrangian."""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from ..autodiff import Graph, Tensor, directional_derivative, ops
from ..model import OmegaDistribution, ToyModel
from ..risks import HiddenCache, KernelSpec, RiskReport, RiskWeights, TripletBatch, risk_components, weighted_total
from .config import TrainConfig

TensorLike = Union[Tensor, np.ndarray]
EditValues = Mapping[str, TensorLike]


class Objective:
    """Risk family R(ω; φ_e) seen by the primal-dual optimizer.

    Subclasses return unweighted components keyed by ``rel``/``loc``/``gen``.
    """

    weights: RiskWeights
    penalty_target: str = "full_edit_risk"

    def prepare(self, edit: EditValues) -> Any:
        """Work shared by every ω draw of one evaluation."""
        return None

    def components(self, prepared: Any, edit: EditValues, omega: Union[float, Tensor]) -> Dict[str, Tensor]:
        raise NotImplementedError

    def penalized(self, components: Dict[str, Tensor]) -> Tensor:
        """The risk whose ω-derivative enters the TV penalty."""
        if self.penalty_target == "gen_risk_only":
            if "gen" not in components:
                return Tensor(0.0)
            return ops.mul(components["gen"], self.weights.w_gen)
        return weighted_total(components, self.weights)


class EditObjective(Objective):
    """Edit risks of a toy model on one triplet batch."""

    def __init__(self, model: ToyModel, batch: TripletBatch, cfg: TrainConfig, spec: Optional[KernelSpec]):
        self.model = model
        self.batch = batch
        self.weights = cfg.weights
        self.penalty_target = cfg.penalty_target
        self.estimator = cfg.kernel.estimator
        self.spec = spec
        self.base_out = model.last_hidden(None, batch.out)
        self.features: Dict[str, Tensor] = {}
        if not model.encoders_edited():
            # encoder outputs do not depend on the edit
            self.features = {
                "edit": model.branch_features(batch.edit),
                "rephrase": model.branch_features(batch.rephrase),
                "out": model.branch_features(batch.out),
            }

    def prepare(self, edit: EditValues) -> HiddenCache:
        return HiddenCache.compute(self.model, edit, self.batch, base_out=self.base_out, features=self.features)

    def components(self, prepared: HiddenCache, edit: EditValues, omega: Union[float, Tensor]) -> Dict[str, Tensor]:
        return risk_components(
            self.model, edit, omega, self.batch, self.weights, self.spec, self.estimator, cache=prepared
        )


class OneDimObjective(Objective):
    """Scalar edit φ with risk ``|ω·φ + 1|``, the closed-form check case."""

    def __init__(self, penalty_target: str = "full_edit_risk"):
        self.weights = RiskWeights(w_rel=1.0, w_loc=0.0, w_gen=0.0)
        self.penalty_target = penalty_target

    def components(self, prepared: Any, edit: EditValues, omega: Union[float, Tensor]) -> Dict[str, Tensor]:
        return {"rel": ops.abs(ops.add(ops.mul(omega, edit["phi"]), 1.0))}


@dataclass
class OmegaTerms:
    """Monte-Carlo terms of one evaluation at fixed draws of ω."""

    expected: Dict[str, Tensor]
    expected_total: Tensor
    abs_grads: List[Tensor] = field(default_factory=list)

    def tv(self) -> Optional[Tensor]:
        if not self.abs_grads:
            return None
        total = self.abs_grads[0]
        for term in self.abs_grads[1:]:
            total = ops.add(total, term)
        return ops.square(ops.mul(total, 1.0 / len(self.abs_grads)))


def omega_terms(
    graph: Graph,
    objective: Objective,
    edit: EditValues,
    omegas: Sequence[float],
    with_penalty: bool = True,
    mode: str = "exact",
    fd_step: float = 1e-4,
) -> OmegaTerms:
    """Expected components over ``omegas`` and, optionally, |∂_ω R| at each draw."""
    if not omegas:
        raise ValueError("need at least one draw of omega")
    if with_penalty and mode == "exact" and not graph.tangent_active:
        graph.enable_tangent()
    prepared = objective.prepare(edit)
    sums: Dict[str, Tensor] = {}
    abs_grads: List[Tensor] = []
    for i, value in enumerate(omegas):
        if with_penalty and mode == "exact":
            name = f"omega:{len(graph)}:{i}"
            omega: Union[float, Tensor] = graph.leaf(name, value)
            graph.seed(name, 1.0)
        else:
            omega = float(value)
        components = objective.components(prepared, edit, omega)
        for key, term in components.items():
            sums[key] = term if key not in sums else ops.add(sums[key], term)
        if not with_penalty:
            continue
        if mode == "exact":
            slope = directional_derivative(graph, objective.penalized(components), name)
        else:
            plus = objective.penalized(objective.components(prepared, edit, value + fd_step))
            minus = objective.penalized(objective.components(prepared, edit, value - fd_step))
            slope = ops.mul(ops.sub(plus, minus), 1.0 / (2.0 * fd_step))
        abs_grads.append(ops.abs(slope))
    expected = {key: ops.mul(total, 1.0 / len(omegas)) for key, total in sums.items()}
    return OmegaTerms(expected, weighted_total(expected, objective.weights), abs_grads)


def tv_penalty(
    objective: Objective,
    edit: EditValues,
    distribution: OmegaDistribution,
    n_omega: int,
    seed: int,
    graph: Optional[Graph] = None,
    mode: str = "exact",
    fd_step: float = 1e-4,
) -> Tensor:
    """``(E_ω |∂_ω R(ω; φ_e)|)²`` over ``n_omega`` seeded draws, differentiable in φ_e."""
    graph = graph if graph is not None else Graph(tangent=True)
    omegas = [s.value for s in distribution.sample(n_omega, seed)]
    return omega_terms(graph, objective, edit, omegas, True, mode, fd_step).tv()


def lagrangian(
    graph: Graph,
    objective: Objective,
    edit: EditValues,
    lam: Union[float, Tensor],
    omegas: Sequence[float],
    cfg: TrainConfig,
    step: int = 0,
) -> Tuple[Tensor, RiskReport]:
    """``G = E_ω[R] + λ·TV`` and the step's risk report.

    With λ identically zero the penalty is neither computed nor reported.
    """
    lam = ops.as_tensor(lam)
    with_penalty = lam.attached or lam.item() != 0.0
    terms = omega_terms(graph, objective, edit, omegas, with_penalty, cfg.omega_grad_mode, cfg.omega_fd_step)
    penalty = terms.tv()
    objective_value = terms.expected_total
    if penalty is not None:
        objective_value = ops.add(objective_value, ops.mul(lam, penalty))
    report = RiskReport(
        step=step,
        r_rel=_value(terms.expected.get("rel")),
        r_loc=max(_value(terms.expected.get("loc")), 0.0),
        r_gen=_value(terms.expected.get("gen")),
        r_total=terms.expected_total.item(),
        tv_penalty=_value(penalty),
        lambda_value=lam.item(),
    )
    return objective_value, report


def _value(tensor: Optional[Tensor]) -> float:
    return 0.0 if tensor is None else tensor.item()


def ood_objective_grid(objective: Objective, edit: EditValues, omega_grid: Sequence[float]) -> float:
    """Worst total risk over a grid of ω; evaluation only."""
    if len(omega_grid) == 0:
        raise ValueError("omega grid must be non-empty")
    constants = {name: ops.as_tensor(value).detach() for name, value in edit.items()}
    prepared = objective.prepare(constants)
    return max(
        weighted_total(objective.components(prepared, constants, float(w)), objective.weights).item()
        for w in omega_grid
    )
