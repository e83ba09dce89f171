"""Closed-form one-dimensional case: fixed λ does not recover the worst-case optimum, adaptive λ does.

Risk ``R(ω; φ) = |ω·φ + 1|`` with ω ~ U[-0.9, 0.1] and φ ∈ [-1, 1]:
expected risk ``1 - 0.4φ``, TV penalty ``φ²`` and worst case
``1 + 0.1φ`` for φ ≥ 0, ``1 - 0.9φ`` for φ < 0.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..errors import DegeneratePenaltyError

OMEGA_LOW = -0.9
OMEGA_HIGH = 0.1
PHI_RANGE = (-1.0, 1.0)


def analytic_lambda(max_risk: float, expected_risk_sum: float, expected_abs_grad: float) -> float:
    """λ making ``E[R] + λ·(E|∂_ω R|)²`` equal the worst-case risk.

    Raises:
        DegeneratePenaltyError: when the penalty vanishes; λ is then arbitrary.
    """
    denominator = expected_abs_grad * expected_abs_grad
    if denominator == 0.0:
        raise DegeneratePenaltyError("expected |dR/dω| is zero; lambda is undetermined")
    return max(0.0, (max_risk - expected_risk_sum) / denominator)


def expected_risk(phi: np.ndarray) -> np.ndarray:
    return 1.0 + 0.5 * (OMEGA_LOW + OMEGA_HIGH) * phi


def penalty(phi: np.ndarray) -> np.ndarray:
    return np.square(phi)


def worst_case_risk(phi: np.ndarray) -> np.ndarray:
    phi = np.asarray(phi, dtype=np.float64)
    return np.where(phi >= 0, 1.0 + OMEGA_HIGH * phi, 1.0 + OMEGA_LOW * phi)


def grid_worst_case(phi: float, resolution: int = 20001) -> float:
    """Worst case by direct maximization over an ω grid."""
    omegas = np.linspace(OMEGA_LOW, OMEGA_HIGH, resolution)
    return float(np.max(np.abs(omegas * phi + 1.0)))


@dataclass
class OneDimReport:
    """Grid minimizers of the IRM-TV objective and of the worst-case objective."""

    lam: Optional[float]
    phi_star: float
    value: float
    ood_phi_star: float
    ood_value: float

    @property
    def mode(self) -> str:
        return "adaptive" if self.lam is None else "fixed"


def irm_tv_objective(phi: np.ndarray, lam: Optional[float]) -> np.ndarray:
    """Objective over a φ grid; ``lam=None`` uses the analytic λ per φ (worst case at φ = 0)."""
    phi = np.asarray(phi, dtype=np.float64)
    if lam is not None:
        return expected_risk(phi) + lam * penalty(phi)
    values = np.empty_like(phi)
    for i, p in enumerate(phi):
        if p == 0.0:
            values[i] = worst_case_risk(p)
            continue
        lam_p = analytic_lambda(float(worst_case_risk(p)), float(expected_risk(p)), abs(p))
        values[i] = expected_risk(p) + lam_p * penalty(p)
    return values


def oned_counterexample(lam: Optional[float] = None, resolution: int = 20001) -> OneDimReport:
    if resolution < 2:
        raise ValueError("grid needs at least two points")
    phi = np.linspace(PHI_RANGE[0], PHI_RANGE[1], resolution)
    objective = irm_tv_objective(phi, lam)
    ood = worst_case_risk(phi)
    best = int(np.argmin(objective))
    ood_best = int(np.argmin(ood))
    return OneDimReport(
        lam=lam,
        phi_star=float(phi[best]),
        value=float(objective[best]),
        ood_phi_star=float(phi[ood_best]),
        ood_value=float(ood[ood_best]),
    )
