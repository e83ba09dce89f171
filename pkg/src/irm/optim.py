"""First-order updates for the primal (descent) and dual (ascent) parameter sets."""

from typing import Dict, Mapping

import numpy as np

from ..autodiff import ParamSet
from ..errors import NonFiniteError


class SGD:
    """Plain gradient step; ``ascend`` flips the direction."""

    def __init__(self, ascend: bool = False):
        self.ascend = ascend

    def step(self, params: ParamSet, grads: Mapping[str, np.ndarray], lr: float) -> None:
        _check_finite(params, grads)
        sign = 1.0 if self.ascend else -1.0
        for name, grad in grads.items():
            params.values[name] = params.values[name] + sign * lr * grad


class Adam:
    """Adam with bias correction; one instance per parameter set."""

    def __init__(self, ascend: bool = False, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.ascend = ascend
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: Dict[str, np.ndarray] = {}
        self.v: Dict[str, np.ndarray] = {}

    def step(self, params: ParamSet, grads: Mapping[str, np.ndarray], lr: float) -> None:
        _check_finite(params, grads)
        self.t += 1
        sign = 1.0 if self.ascend else -1.0
        for name, grad in grads.items():
            m = self.beta1 * self.m.get(name, np.zeros_like(grad)) + (1.0 - self.beta1) * grad
            v = self.beta2 * self.v.get(name, np.zeros_like(grad)) + (1.0 - self.beta2) * grad * grad
            self.m[name], self.v[name] = m, v
            m_hat = m / (1.0 - self.beta1**self.t)
            v_hat = v / (1.0 - self.beta2**self.t)
            params.values[name] = params.values[name] + sign * lr * m_hat / (np.sqrt(v_hat) + self.eps)


def make_optimizer(kind: str, ascend: bool = False):
    if kind == "sgd":
        return SGD(ascend=ascend)
    if kind == "adam":
        return Adam(ascend=ascend)
    raise ValueError(f"unknown optimizer '{kind}'")


def _check_finite(params: ParamSet, grads: Mapping[str, np.ndarray]) -> None:
    for name, grad in grads.items():
        if name not in params.values:
            raise KeyError(f"gradient for unknown parameter '{params.qualified(name)}'")
        if not np.all(np.isfinite(grad)):
            raise NonFiniteError(f"non-finite gradient for '{params.qualified(name)}'")
