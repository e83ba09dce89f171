"""Multi-scale Gaussian kernels and the MMD generality risk."""

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from ..autodiff import Tensor, ops
from ..errors import ShapeError

DEFAULT_MULTIPLIERS = (0.25, 0.5, 1.0, 2.0, 4.0)
ESTIMATORS = ("biased", "unbiased")


@dataclass(frozen=True)
class KernelSpec:
    """Bandwidths of a sum of Gaussian kernels and the rule that produced them."""

    bandwidths: Tuple[float, ...]
    rule: str = "fixed"

    def __post_init__(self) -> None:
        if not self.bandwidths:
            raise ValueError("kernel needs at least one bandwidth")
        if any(not np.isfinite(s) or s <= 0 for s in self.bandwidths):
            raise ValueError(f"bandwidths must be positive, got {self.bandwidths}")
        if self.rule not in ("median-heuristic", "fixed"):
            raise ValueError(f"unknown bandwidth rule '{self.rule}'")

    @property
    def n_scales(self) -> int:
        return len(self.bandwidths)


def median_heuristic(pooled: np.ndarray, multipliers: Sequence[float] = DEFAULT_MULTIPLIERS) -> KernelSpec:
    """Median pairwise distance of ``pooled`` times each multiplier.

    Falls back to a unit base bandwidth when all points coincide.
    """
    pooled = np.atleast_2d(np.asarray(pooled, dtype=np.float64))
    if len(pooled) >= 2:
        diff = pooled[:, None, :] - pooled[None, :, :]
        dist = np.sqrt(np.sum(diff * diff, axis=-1))[np.triu_indices(len(pooled), k=1)]
        positive = dist[dist > 0]
        base = float(np.median(positive)) if positive.size else 1.0
    else:
        base = 1.0
    return KernelSpec(tuple(base * m for m in multipliers), rule="median-heuristic")


def kernel_multiscale(a: np.ndarray, b: np.ndarray, spec: KernelSpec) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"kernel arguments differ in shape: {a.shape} vs {b.shape}")
    sq = float(np.sum((a - b) ** 2))
    return float(sum(np.exp(-sq / (2.0 * s * s)) for s in spec.bandwidths))


def kernel_matrix(A: Tensor, B: Tensor, spec: KernelSpec) -> Tensor:
    """Gram matrix ``K[i, j] = k(A[i], B[j])`` as a graph node; the diagonal of ``K(A, A)`` is exact."""
    A, B = ops.as_tensor(A), ops.as_tensor(B)
    if A.ndim != 2 or B.ndim != 2 or A.shape[1] != B.shape[1]:
        raise ShapeError(f"kernel_matrix: {A.shape} vs {B.shape}")
    n, d = A.shape
    m = B.shape[0]
    diff = ops.sub(ops.reshape(A, (n, 1, d)), ops.reshape(B, (1, m, d)))
    sq = ops.sum(ops.square(diff), axis=2)
    total = None
    for sigma in spec.bandwidths:
        term = ops.exp(ops.mul(sq, -1.0 / (2.0 * sigma * sigma)))
        total = term if total is None else ops.add(total, term)
    return total


def mmd_generality_risk(Z_E: Tensor, Z_R: Tensor, spec: KernelSpec, estimator: str = "biased") -> Tensor:
    """Squared MMD between edit-prompt and rephrase-prompt hidden states."""
    Z_E, Z_R = ops.as_tensor(Z_E), ops.as_tensor(Z_R)
    if estimator not in ESTIMATORS:
        raise ValueError(f"estimator must be one of {ESTIMATORS}, got '{estimator}'")
    n, m = Z_E.shape[0], Z_R.shape[0]
    if n == 0 or m == 0:
        raise ShapeError("MMD needs non-empty sample sets")
    k_ee = kernel_matrix(Z_E, Z_E, spec)
    k_rr = kernel_matrix(Z_R, Z_R, spec)
    k_er = kernel_matrix(Z_E, Z_R, spec)
    cross = ops.mul(ops.mean(k_er), 2.0)
    if estimator == "biased":
        return ops.sub(ops.add(ops.mean(k_ee), ops.mean(k_rr)), cross)
    if n < 2 or m < 2:
        raise ShapeError("unbiased MMD needs at least two samples per set")
    # each diagonal entry is exactly n_scales
    within_e = ops.mul(ops.sub(ops.sum(k_ee), n * spec.n_scales), 1.0 / (n * (n - 1)))
    within_r = ops.mul(ops.sub(ops.sum(k_rr), m * spec.n_scales), 1.0 / (m * (m - 1)))
    return ops.sub(ops.add(within_e, within_r), cross)
