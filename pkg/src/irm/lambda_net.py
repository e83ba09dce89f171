"""Adaptive penalty weight λ(δ, φ_e): a small MLP over δ and edit-parameter statistics."""

from dataclasses import dataclass
from typing import Dict, List, Mapping, Union

import numpy as np

from ..autodiff import ParamSet, Tensor, ops

STAT_EPS = 1e-12
STATS_PER_TENSOR = 4

TensorLike = Union[Tensor, np.ndarray]


def parameter_stats(value: TensorLike) -> List[Tensor]:
    """Mean, std, L2 norm and max-abs of one parameter tensor, each a 0-d node."""
    x = ops.as_tensor(value)
    mean = ops.mean(x)
    centred = ops.sub(x, mean)
    std = ops.sqrt(ops.add(ops.mean(ops.square(centred)), STAT_EPS))
    l2 = ops.sqrt(ops.add(ops.sum(ops.square(x)), STAT_EPS))
    max_abs = ops.take_flat(ops.abs(x), int(np.argmax(np.abs(x.data))))
    return [mean, std, l2, max_abs]


@dataclass
class DualParams:
    """Dual vector δ and the λ-network weights; both ascend in the dual step."""

    delta: ParamSet
    net: ParamSet

    def copy(self) -> "DualParams":
        return DualParams(self.delta.copy(), self.net.copy())


class LambdaNet:
    """Fully-connected ReLU network with a Softplus output, so λ > 0 for finite inputs."""

    def __init__(self, input_dim: int, depth: int = 3, hidden: int = 16):
        if depth < 2:
            raise ValueError("lambda network needs at least two layers")
        self.input_dim = input_dim
        self.depth = depth
        self.hidden = hidden
        self.sizes = [input_dim] + [hidden] * (depth - 1) + [1]

    @classmethod
    def for_edit(cls, edit_shapes: Mapping[str, tuple], dual_dim: int, depth: int = 3, hidden: int = 16) -> "LambdaNet":
        return cls(dual_dim + STATS_PER_TENSOR * len(edit_shapes), depth, hidden)

    def init(self, dual_dim: int, seed: int, initial: float = 0.01) -> DualParams:
        """Xavier-uniform hidden layers, a small random δ and λ = ``initial`` at the start.

        The output layer starts with zero weights and the bias softplus⁻¹(initial).
        """
        if initial <= 0:
            raise ValueError("initial lambda must be positive")
        if self.input_dim < dual_dim:
            raise ValueError("input dimension smaller than the dual vector")
        rng = np.random.default_rng(seed)
        weights: Dict[str, np.ndarray] = {}
        for i, (fan_in, fan_out) in enumerate(zip(self.sizes[:-1], self.sizes[1:])):
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            weights[f"L{i}.W"] = rng.uniform(-bound, bound, size=(fan_in, fan_out))
            weights[f"L{i}.b"] = np.zeros(fan_out)
        last = len(self.sizes) - 2
        weights[f"L{last}.W"] = np.zeros_like(weights[f"L{last}.W"])
        weights[f"L{last}.b"] = np.array([np.log(np.expm1(initial))])
        delta = rng.normal(scale=0.1, size=dual_dim)
        return DualParams(ParamSet("dual", {"delta": delta}), ParamSet("lambda", weights))

    def features(self, delta: TensorLike, edit: Mapping[str, TensorLike]) -> Tensor:
        parts = [ops.as_tensor(delta)]
        for name in sorted(edit):
            parts.extend(ops.reshape(stat, (1,)) for stat in parameter_stats(edit[name]))
        features = ops.concat(parts, axis=0)
        if features.shape != (self.input_dim,):
            raise ValueError(f"lambda input has {features.shape[0]} features, expected {self.input_dim}")
        return features

    def forward(self, delta: TensorLike, net: Mapping[str, TensorLike], edit: Mapping[str, TensorLike]) -> Tensor:
        """λ(δ, φ_e) as a 0-d node."""
        h = self.features(delta, edit)
        last = len(self.sizes) - 2
        for i in range(last + 1):
            h = ops.add(ops.matmul(h, net[f"L{i}.W"]), net[f"L{i}.b"])
            h = ops.softplus(h) if i == last else ops.relu(h)
        return ops.take_flat(h, 0)

    def value(self, dual: DualParams, edit: Mapping[str, np.ndarray]) -> float:
        return self.forward(dual.delta.values["delta"], dual.net.values, edit).item()
