"""Central finite-difference oracle for reverse-mode gradients."""

from dataclasses import dataclass, field
from typing import Callable, Dict, Mapping

import numpy as np

from .graph import Graph, Tensor, backward

LossFn = Callable[[Graph, Dict[str, Tensor]], Tensor]


@dataclass
class GradCheckReport:
    """Per-parameter max relative error between backward and central differences."""

    tolerance: float
    h: float
    max_rel_error: Dict[str, float] = field(default_factory=dict)

    @property
    def worst(self) -> float:
        return max(self.max_rel_error.values(), default=0.0)

    @property
    def passed(self) -> bool:
        return self.worst < self.tolerance


def _evaluate(loss_fn: LossFn, params: Mapping[str, np.ndarray]) -> float:
    graph = Graph(tangent=True)
    leaves = {name: graph.leaf(name, value) for name, value in params.items()}
    return loss_fn(graph, leaves).item()


def finite_diff_check(
    loss_fn: LossFn,
    params: Mapping[str, np.ndarray],
    h: float = 1e-5,
    tolerance: float = 1e-4,
    floor: float = 1e-7,
) -> GradCheckReport:
    """Compare ``backward`` gradients of ``loss_fn`` with central differences.

    ``loss_fn`` receives a fresh graph (tangent channel enabled) and the
    parameters registered as leaves under their own names.  The relative error
    of an entry is ``|a - b| / max(|a|, |b|, floor)``.
    """
    if h <= 0:
        raise ValueError("finite-difference step must be positive")
    base = {name: np.array(value, dtype=np.float64) for name, value in params.items()}

    graph = Graph(tangent=True)
    leaves = {name: graph.leaf(name, value) for name, value in base.items()}
    grads = backward(graph, loss_fn(graph, leaves))

    report = GradCheckReport(tolerance=tolerance, h=h)
    for name, value in base.items():
        analytic = grads[name].data.ravel()
        worst = 0.0
        for i in range(value.size):
            shifted = dict(base)
            plus = value.copy().ravel()
            minus = value.copy().ravel()
            plus[i] += h
            minus[i] -= h
            shifted[name] = plus.reshape(value.shape)
            f_plus = _evaluate(loss_fn, shifted)
            shifted[name] = minus.reshape(value.shape)
            f_minus = _evaluate(loss_fn, shifted)
            numeric = (f_plus - f_minus) / (2.0 * h)
            scale = max(abs(analytic[i]), abs(numeric), floor)
            worst = max(worst, abs(analytic[i] - numeric) / scale)
        report.max_rel_error[name] = worst
    return report
