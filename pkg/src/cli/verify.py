"""Self-contained verification suite: closed-form checks, gradient contract and risk axioms."""

import time
from dataclasses import dataclass
from typing import Callable, Dict, List

import numpy as np
import structlog

from ..autodiff import Graph, finite_diff_check, ops
from ..irm import (
    EditObjective,
    LambdaNet,
    OneDimObjective,
    TrainConfig,
    analytic_lambda,
    grid_worst_case,
    omega_terms,
    oned_counterexample,
)
from ..model import EditDelta, ModelDims, OmegaDistribution, PromptVec, init_model
from ..risks import (
    KernelSpec,
    TripletBatch,
    categorical_kl,
    expectation_over_omega,
    locality_risk,
    median_heuristic,
    mmd_generality_risk,
    reliability_risk,
)

logger = structlog.get_logger(__name__)

GRAD_TOLERANCE = 1e-4
MIXED_TOLERANCE = 1e-3
REL_FLOOR = 1e-6


@dataclass
class CheckResult:
    """Outcome of one verification check."""

    name: str
    passed: bool
    detail: str


# ---------------------------------------------------------------- closed-form case

def check_counterexample() -> List[CheckResult]:
    results = []
    for lam in (0.25, 0.4, 1.0, 0.05, 0.1, 0.2):
        report = oned_counterexample(lam)
        phi_expected = min(0.2 / lam, 1.0)
        value_expected = 1.0 - 0.04 / lam if 0.2 / lam <= 1.0 else 0.6 + lam
        ok = abs(report.phi_star - phi_expected) < 1e-3 and abs(report.value - value_expected) < 1e-3
        results.append(
            CheckResult(
                f"fixed lambda={lam:g} minimizer",
                ok,
                f"phi*={report.phi_star:.4f} value={report.value:.4f} "
                f"(expected {phi_expected:.4f}, {value_expected:.4f})",
            )
        )
    report = oned_counterexample(0.4)
    ok = abs(report.ood_phi_star) < 1e-6 and abs(report.ood_value - 1.0) < 1e-6
    results.append(
        CheckResult("worst-case minimizer", ok, f"phi*={report.ood_phi_star:.2e} value={report.ood_value:.9f}")
    )
    for lam in (0.0, 0.05, 0.1, 0.2, 0.4, 1.0):
        report = oned_counterexample(lam)
        ok = abs(report.phi_star) > 0.1 and abs(report.value - 1.0) > 1e-6
        results.append(
            CheckResult(f"fixed lambda={lam:g} misses worst case", ok, f"phi*={report.phi_star:.4f}")
        )
    return results


def check_analytic_lambda(n: int = 100, seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    drawn = 0
    while drawn < n:
        phi = float(rng.uniform(-1.0, 1.0))
        if abs(phi) <= 1e-3:
            continue
        drawn += 1
        max_risk = grid_worst_case(phi)
        expected = 1.0 - 0.4 * phi
        lam = analytic_lambda(max_risk, expected, abs(phi))
        worst = max(worst, abs(expected + lam * phi * phi - max_risk))
    return CheckResult("analytic lambda equivalence", worst < 1e-9, f"max |G - max R| = {worst:.2e}")


def check_monte_carlo(n_samples: int = 20_000, seed: int = 0) -> CheckResult:
    """The engine's expectation and penalty agree with the closed forms at φ = 1.

    The expectation is also taken through ``expectation_over_omega`` on the same draws;
    both routes must agree to rounding.
    """
    objective = OneDimObjective()
    distribution = OmegaDistribution()
    omegas = [s.value for s in distribution.sample(n_samples, seed)]
    graph = Graph(tangent=True)
    phi = graph.leaf("edit:phi", 1.0)
    terms = omega_terms(graph, objective, {"phi": phi}, omegas, with_penalty=True)
    expected = terms.expected_total.item()
    penalty = terms.tv().item()
    direct = expectation_over_omega(lambda w: abs(w + 1.0), distribution, n_samples, seed).item()
    ok = abs(expected - 0.6) < 0.01 and abs(penalty - 1.0) < 1e-9 and abs(direct - expected) < 1e-9
    return CheckResult(
        "monte-carlo expectation", ok, f"E[R]={expected:.4f} direct={direct:.4f} penalty={penalty:.6f}"
    )


# ---------------------------------------------------------------- gradient contract

def random_instance(seed: int):
    """Tiny model, delta and triplet batch for gradient checks."""
    rng = np.random.default_rng(seed)
    dims = ModelDims(d_img=3, d_txt=3, d_h=4, V=3, logit_scale=1.0)
    model = init_model(dims, seed)

    def prompt() -> PromptVec:
        return PromptVec(rng.normal(size=3), rng.normal(size=3), int(rng.integers(3)))

    batch = TripletBatch.from_prompts([prompt(), prompt()], [prompt(), prompt()], [prompt(), prompt()])
    delta = EditDelta({k: rng.normal(scale=0.3, size=v.shape) for k, v in EditDelta.zeros(dims).values.items()})
    omega = float(rng.uniform(-0.9, 0.1))
    return model, batch, delta, omega


def _edit_param_names(delta: EditDelta) -> Dict[str, np.ndarray]:
    return {f"edit:{name}": value for name, value in delta.values.items()}


def _unqualify(leaves):
    return {name.split(":", 1)[1]: leaf for name, leaf in leaves.items()}


def gradient_checks(seed: int) -> Dict[str, float]:
    """Worst relative error per risk on one random instance."""
    model, batch, delta, omega = random_instance(seed)
    pooled = np.concatenate([model.last_hidden(delta, batch.edit), model.last_hidden(delta, batch.rephrase)])
    spec = median_heuristic(pooled)
    params = _edit_param_names(delta)

    losses: Dict[str, Callable] = {
        "reliability": lambda g, leaves: reliability_risk(model, _unqualify(leaves), omega, batch.edit),
        "locality": lambda g, leaves: locality_risk(model, model, _unqualify(leaves), omega, batch.out),
        "generality": lambda g, leaves: mmd_generality_risk(
            model.hidden(batch.edit, _unqualify(leaves)), model.hidden(batch.rephrase, _unqualify(leaves)), spec
        ),
    }
    errors = {}
    for name, loss in losses.items():
        errors[name] = finite_diff_check(loss, params, tolerance=GRAD_TOLERANCE, floor=REL_FLOOR).worst

    cfg = TrainConfig(n_omega=3)
    objective = EditObjective(model, batch, cfg, spec)
    omegas = [omega, omega * 0.5, omega + 0.05]

    def tv_loss(graph, leaves):
        return omega_terms(graph, objective, _unqualify(leaves), omegas, with_penalty=True).tv()

    errors["tv_penalty"] = finite_diff_check(tv_loss, params, tolerance=MIXED_TOLERANCE, floor=REL_FLOOR).worst
    return errors


def check_gradients(instances: int = 5) -> List[CheckResult]:
    worst: Dict[str, float] = {}
    for seed in range(instances):
        for name, error in gradient_checks(seed).items():
            worst[name] = max(worst.get(name, 0.0), error)
    results = []
    for name, error in worst.items():
        tolerance = MIXED_TOLERANCE if name == "tv_penalty" else GRAD_TOLERANCE
        results.append(
            CheckResult(f"gradient {name}", error < tolerance, f"max rel error {error:.2e} (< {tolerance:g})")
        )
    return results


# ---------------------------------------------------------------- risk axioms

def check_kl_axioms(pairs: int = 1000, seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    lowest = np.inf
    self_max = 0.0
    for _ in range(pairs):
        p = rng.dirichlet(np.ones(6))
        q = rng.dirichlet(np.ones(6))
        lowest = min(lowest, categorical_kl(p, q))
        self_max = max(self_max, abs(categorical_kl(p, p)))
    ok = lowest >= 0.0 and self_max == 0.0
    return CheckResult("KL non-negative, zero at equality", ok, f"min KL={lowest:.3e} max KL(p,p)={self_max:.1e}")


def _mmd(A: np.ndarray, B: np.ndarray, spec: KernelSpec) -> float:
    return mmd_generality_risk(ops.as_tensor(A), ops.as_tensor(B), spec).item()


def check_mmd_axioms(pairs: int = 200, seed: int = 0) -> List[CheckResult]:
    rng = np.random.default_rng(seed)
    lowest, asymmetry, self_max = np.inf, 0.0, 0.0
    for _ in range(pairs):
        A = rng.normal(size=(int(rng.integers(1, 6)), 3))
        B = rng.normal(loc=rng.normal(), size=(int(rng.integers(1, 6)), 3))
        spec = median_heuristic(np.vstack([A, B]))
        ab, ba = _mmd(A, B, spec), _mmd(B, A, spec)
        lowest = min(lowest, ab)
        asymmetry = max(asymmetry, abs(ab - ba))
        self_max = max(self_max, abs(_mmd(A, A, spec)))
    results = [
        CheckResult("MMD non-negative", lowest >= -1e-12, f"min={lowest:.3e}"),
        CheckResult("MMD symmetric", asymmetry < 1e-12, f"max |AB-BA|={asymmetry:.1e}"),
        CheckResult("MMD zero on identical sets", self_max == 0.0, f"max={self_max:.1e}"),
    ]
    holds = 0
    for s in range(20):
        local = np.random.default_rng([seed, s])
        base = local.normal(size=(30, 2))
        shifted_samples = local.normal(size=(30, 2))
        spec = KernelSpec((0.25, 0.5, 1.0, 2.0, 4.0))
        values = [_mmd(base, shifted_samples + mu, spec) for mu in (0.0, 0.5, 1.0, 2.0)]
        holds += all(b > a for a, b in zip(values, values[1:]))
    results.append(CheckResult("MMD grows with mean shift", holds >= 18, f"{holds}/20 seeds monotone"))
    return results


def check_lambda_positivity(n: int = 10_000, seed: int = 0) -> CheckResult:
    net = LambdaNet(input_dim=8, depth=3, hidden=16)
    dual = net.init(8, seed)
    rng = np.random.default_rng(seed)
    # the output layer starts at zero; give it weights so λ varies with the input
    dual.net.values["L2.W"] = rng.normal(size=dual.net.values["L2.W"].shape)
    lowest = min(
        net.forward(rng.normal(scale=3.0, size=8), dual.net.values, {}).item() for _ in range(n)
    )
    return CheckResult("lambda network positive", lowest > 0.0, f"min lambda={lowest:.3e}")


def run_verify_suite(gradient_instances: int = 5) -> List[CheckResult]:
    started = time.perf_counter()
    results: List[CheckResult] = []
    results.extend(check_counterexample())
    results.append(check_analytic_lambda())
    results.append(check_monte_carlo())
    results.extend(check_gradients(gradient_instances))
    results.append(check_kl_axioms())
    results.extend(check_mmd_axioms())
    results.append(check_lambda_positivity())
    failed = [r.name for r in results if not r.passed]
    logger.info(
        "verification finished",
        checks=len(results),
        failed=len(failed),
        seconds=round(time.perf_counter() - started, 2),
    )
    return results
