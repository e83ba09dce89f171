import numpy as np
import pytest
from pydantic import ValidationError

from src.autodiff import Graph, ParamSet, Tensor, backward, ops
from src.cli.verify import MIXED_TOLERANCE, check_monte_carlo, gradient_checks, random_instance
from src.errors import DegeneratePenaltyError, DivergenceError, NonFiniteError
from src.evaluation import compute_metrics
from src.irm import (
    SGD,
    Adam,
    EditObjective,
    LambdaNet,
    Objective,
    OneDimObjective,
    PrimalDualState,
    TrainConfig,
    analytic_lambda,
    dual_step,
    grid_worst_case,
    lagrangian,
    omega_draws,
    omega_terms,
    oned_counterexample,
    ood_objective_grid,
    primal_step,
    run_primal_dual,
    train_edit,
    tv_penalty,
)
from src.irm.counterexample import expected_risk, worst_case_risk
from src.model import EditDelta, OmegaDistribution
from src.risks import RiskWeights, TripletBatch, median_heuristic

GRID = list(np.linspace(-0.9, 0.1, 1001))


class ConstantObjective(Objective):
    """Risk that ignores ω."""

    def __init__(self):
        self.weights = RiskWeights(w_rel=1.0, w_loc=0.0, w_gen=0.0)

    def components(self, prepared, edit, omega):
        return {"rel": ops.add(ops.mul(edit["phi"], 2.0), 1.0)}


# ---------------------------------------------------------------- penalty and Lagrangian

def test_tv_penalty_closed_form():
    value = tv_penalty(OneDimObjective(), {"phi": Tensor(0.5)}, OmegaDistribution(), n_omega=16, seed=0)
    assert value.item() == pytest.approx(0.25, abs=1e-12)


def test_tv_penalty_zero_for_omega_free_risk():
    value = tv_penalty(ConstantObjective(), {"phi": Tensor(0.5)}, OmegaDistribution(), n_omega=5, seed=0)
    assert value.item() == 0.0


def test_central_differences_agree_with_exact_mode(tiny):
    model, batch = tiny
    delta = EditDelta({k: np.full(v.shape, 0.1) for k, v in EditDelta.zeros(model.dims).values.items()})
    pooled = np.vstack([model.last_hidden(delta, batch.edit), model.last_hidden(delta, batch.rephrase)])
    objective = EditObjective(model, batch, TrainConfig(), median_heuristic(pooled))
    exact = tv_penalty(objective, delta.values, OmegaDistribution(), 4, seed=1).item()
    central = tv_penalty(objective, delta.values, OmegaDistribution(), 4, seed=1, mode="central").item()
    assert central == pytest.approx(exact, rel=1e-4)


def test_lagrangian_one_dimensional_value():
    graph = Graph(tangent=True)
    phi = graph.leaf("edit:phi", 0.5)
    G, report = lagrangian(graph, OneDimObjective(), {"phi": phi}, 0.4, GRID, TrainConfig())
    assert G.item() == pytest.approx(0.9, abs=1e-9)
    assert G.item() == pytest.approx(report.r_total + 0.4 * report.tv_penalty, abs=1e-12)
    assert report.tv_penalty == pytest.approx(0.25)
    assert report.lambda_value == 0.4


def test_lagrangian_without_penalty_weight():
    graph = Graph()
    phi = graph.leaf("edit:phi", 0.5)
    G, report = lagrangian(graph, OneDimObjective(), {"phi": phi}, 0.0, GRID, TrainConfig())
    assert report.tv_penalty == 0.0
    assert G.item() == pytest.approx(report.r_total)
    assert G.item() == pytest.approx(0.8, abs=1e-9)


def test_ood_grid():
    grid = OmegaDistribution().grid(20001)
    assert ood_objective_grid(OneDimObjective(), {"phi": 0.5}, grid) == pytest.approx(1.05)
    assert ood_objective_grid(ConstantObjective(), {"phi": 0.25}, grid) == pytest.approx(1.5)
    with pytest.raises(ValueError):
        ood_objective_grid(OneDimObjective(), {"phi": 0.5}, [])


def test_grid_max_bounds_monte_carlo_mean():
    rng = np.random.default_rng(0)
    grid = OmegaDistribution().grid(2001)
    for phi in rng.uniform(-1.0, 1.0, size=10):
        omegas = [s.value for s in OmegaDistribution().sample(32, seed=int(rng.integers(1000)))]
        terms = omega_terms(Graph(), OneDimObjective(), {"phi": Tensor(phi)}, omegas, with_penalty=False)
        assert ood_objective_grid(OneDimObjective(), {"phi": phi}, grid) >= terms.expected_total.item()


def test_monte_carlo_check_matches_direct_expectation():
    result = check_monte_carlo()
    assert result.passed
    direct = float(result.detail.split("direct=")[1].split()[0])
    assert direct == pytest.approx(0.6, abs=0.01)


# ---------------------------------------------------------------- closed-form case

@pytest.mark.parametrize(
    "lam, phi_star, value",
    [(0.25, 0.8, 0.84), (0.4, 0.5, 0.9), (1.0, 0.2, 0.96), (0.05, 1.0, 0.65), (0.1, 1.0, 0.7), (0.2, 1.0, 0.8)],
)
def test_fixed_lambda_minimizers(lam, phi_star, value):
    report = oned_counterexample(lam)
    assert report.phi_star == pytest.approx(phi_star, abs=1e-3)
    assert report.value == pytest.approx(value, abs=1e-3)
    assert report.ood_phi_star == pytest.approx(0.0, abs=1e-6)
    assert report.ood_value == pytest.approx(1.0, abs=1e-6)


def test_adaptive_lambda_recovers_worst_case_optimum():
    report = oned_counterexample(None)
    assert report.mode == "adaptive"
    assert report.phi_star == pytest.approx(0.0, abs=1e-6)
    assert report.value == pytest.approx(1.0, abs=1e-9)


def test_analytic_lambda_examples():
    lam = analytic_lambda(grid_worst_case(1.0), 0.6, 1.0)
    assert lam == pytest.approx(0.5)
    assert 0.6 + lam * 1.0 == pytest.approx(1.1)
    assert analytic_lambda(0.8, 0.8, 0.3) == 0.0
    with pytest.raises(DegeneratePenaltyError):
        analytic_lambda(1.0, 0.5, 0.0)


def test_analytic_lambda_matches_worst_case():
    rng = np.random.default_rng(42)
    phis = [p for p in rng.uniform(-1.0, 1.0, size=200) if abs(p) > 1e-3][:100]
    for phi in phis:
        max_risk = grid_worst_case(phi)
        lam = analytic_lambda(max_risk, float(expected_risk(phi)), abs(phi))
        assert abs(float(expected_risk(phi)) + lam * phi * phi - max_risk) < 1e-9
        assert max_risk == pytest.approx(float(worst_case_risk(phi)), abs=1e-12)


# ---------------------------------------------------------------- gradient contract

@pytest.mark.parametrize("seed", range(20))
def test_risk_gradients_match_finite_differences(seed):
    errors = gradient_checks(seed)
    for name in ("reliability", "locality", "generality"):
        assert errors[name] < 1e-4, (name, errors[name])
    assert errors["tv_penalty"] < MIXED_TOLERANCE


def test_flipped_subgradient_breaks_tv_gradient(mocker):
    mocker.patch("src.autodiff.ops._subgradient_sign", lambda x: -np.sign(x))
    errors = gradient_checks(0)
    assert errors["tv_penalty"] > MIXED_TOLERANCE
    assert errors["reliability"] < 1e-4


def test_random_instance_is_deterministic():
    _, _, a, omega_a = random_instance(3)
    _, _, b, omega_b = random_instance(3)
    assert omega_a == omega_b
    assert all(np.array_equal(a.values[k], b.values[k]) for k in a.values)


# ---------------------------------------------------------------- lambda network

def test_lambda_network_is_positive_and_deterministic():
    net = LambdaNet(input_dim=8, depth=3, hidden=16)
    a, b = net.init(8, seed=5), net.init(8, seed=5)
    assert np.array_equal(a.delta.values["delta"], b.delta.values["delta"])
    rng = np.random.default_rng(0)
    a.net.values["L2.W"] = rng.normal(size=a.net.values["L2.W"].shape)
    for _ in range(200):
        assert net.forward(rng.normal(scale=5.0, size=8), a.net.values, {}).item() > 0.0


def test_lambda_network_starts_at_initial_value():
    net = LambdaNet(input_dim=8, depth=3, hidden=16)
    dual = net.init(8, seed=2, initial=0.01)
    rng = np.random.default_rng(1)
    for _ in range(10):
        assert net.forward(rng.normal(size=8), dual.net.values, {}).item() == pytest.approx(0.01)
    with pytest.raises(ValueError):
        net.init(8, seed=2, initial=0.0)


def test_adaptive_state_uses_configured_initial_lambda():
    cfg = TrainConfig(lambda_mode="adaptive", lambda_init=0.05)
    state = PrimalDualState.create(OneDimObjective(), ParamSet("edit", {"phi": np.array(0.5)}), cfg)
    assert state.net.value(state.dual, state.edit.values) == pytest.approx(0.05)


def test_lambda_network_depth_validated():
    with pytest.raises(ValueError):
        LambdaNet(input_dim=4, depth=1)


def test_lambda_input_includes_edit_statistics():
    net = LambdaNet.for_edit({"w": (2, 2), "b": (2,)}, dual_dim=3)
    assert net.input_dim == 3 + 8
    dual = net.init(3, seed=0)
    edit = {"w": np.ones((2, 2)), "b": np.zeros(2)}
    assert net.forward(dual.delta.values["delta"], dual.net.values, edit).shape == ()


# ---------------------------------------------------------------- primal-dual steps

def test_primal_step_decreases_reliability(model, dims, records):
    cfg = TrainConfig(
        weights=RiskWeights(w_rel=1.0, w_loc=0.0, w_gen=0.0), lambda_mode="fixed", lambda_fixed=0.0, lr_primal=1e-3
    )
    objective = EditObjective(model, TripletBatch.from_triplets(records[:1]), cfg, None)
    state = PrimalDualState.create(objective, EditDelta.zeros(dims).to_paramset(), cfg)
    omegas = [-0.3, 0.0]
    before = primal_step(state, omegas, 1e-3).r_total
    after = primal_step(state, omegas, 1e-3).r_total
    assert after < before


def test_dual_step_skips_zero_penalty():
    cfg = TrainConfig(lambda_mode="adaptive")
    state = PrimalDualState.create(ConstantObjective(), ParamSet("edit", {"phi": np.array(0.5)}), cfg)
    before = state.dual.copy()
    assert dual_step(state, [-0.5, 0.0], 0.1) == 0.0
    for name, value in before.net.values.items():
        assert np.array_equal(state.dual.net.values[name], value)
    assert np.array_equal(state.dual.delta.values["delta"], before.delta.values["delta"])


def test_dual_ascent_never_lowers_lambda():
    cfg = TrainConfig(lambda_mode="adaptive", optimizer="sgd")
    state = PrimalDualState.create(OneDimObjective(), ParamSet("edit", {"phi": np.array(0.5)}), cfg)
    previous = state.net.value(state.dual, state.edit.values)
    for step in range(100):
        penalty = dual_step(state, omega_draws(cfg, step), 1e-3)
        assert penalty == pytest.approx(0.25)
        current = state.net.value(state.dual, state.edit.values)
        assert current >= previous - 1e-12
        previous = current


def test_fixed_lambda_training_reaches_closed_form_minimizer():
    cfg = TrainConfig(
        lambda_mode="fixed", lambda_fixed=0.4, lr_primal=0.05, n_omega=64, max_steps=400, plateau_tol=0.0
    )
    state, history = run_primal_dual(OneDimObjective(), ParamSet("edit", {"phi": np.array(0.0)}), cfg)
    assert len(history) == 400
    assert float(state.edit.values["phi"]) == pytest.approx(0.5, abs=0.05)


def test_omega_draws_shared_per_step():
    cfg = TrainConfig(seed=9, n_omega=4)
    assert omega_draws(cfg, 3) == omega_draws(cfg, 3)
    assert omega_draws(cfg, 3) != omega_draws(cfg, 4)


# ---------------------------------------------------------------- train_edit

def test_zero_steps_keep_delta_zero(model, records):
    delta, history = train_edit(model, records[:1], TrainConfig(max_steps=0))
    assert delta.is_zero()
    assert history == []


def test_training_is_deterministic(model, records, fast_cfg):
    _, first = train_edit(model, records[:2], fast_cfg)
    _, second = train_edit(model, records[:2], fast_cfg)
    assert [r.as_row() for r in first] == [r.as_row() for r in second]


def test_single_edit_converges(model, records):
    cfg = TrainConfig(optimizer="adam", lr_primal=0.05, n_omega=4, max_steps=150)
    delta, history = train_edit(model, records[:1], cfg)
    assert compute_metrics(model, delta, records[:1]).rel == 1.0
    assert history[-1].r_rel < history[0].r_rel


def test_divergence_is_reported(model, records):
    with pytest.raises(DivergenceError):
        train_edit(model, records[:1], TrainConfig(max_steps=3, divergence_threshold=1e-6))


def test_empty_stream_rejected(model):
    with pytest.raises(ValueError):
        train_edit(model, [], TrainConfig())


# ---------------------------------------------------------------- config and optimizers

def test_inverse_sqrt_schedule():
    cfg = TrainConfig(lr_schedule="inverse_sqrt", lr_decay_steps=100)
    assert cfg.learning_rates(0) == (0.01, 0.001)
    assert cfg.learning_rates(300) == pytest.approx((0.005, 0.0005))


def test_invalid_train_config():
    with pytest.raises(ValidationError):
        TrainConfig(optimizer="rmsprop")
    with pytest.raises(ValidationError):
        TrainConfig(lr_primal=0.0)


def test_sgd_descends_and_ascends():
    params = ParamSet("edit", {"w": np.array([1.0])})
    SGD().step(params, {"w": np.array([2.0])}, 0.1)
    assert params.values["w"] == pytest.approx([0.8])
    SGD(ascend=True).step(params, {"w": np.array([2.0])}, 0.1)
    assert params.values["w"] == pytest.approx([1.0])


def test_adam_first_step_moves_by_learning_rate():
    params = ParamSet("edit", {"w": np.array([1.0, -1.0])})
    Adam().step(params, {"w": np.array([3.0, -0.5])}, 0.01)
    assert params.values["w"] == pytest.approx([0.99, -0.99], abs=1e-6)


def test_optimizer_rejects_non_finite_gradient():
    params = ParamSet("edit", {"w": np.array([1.0])})
    with pytest.raises(NonFiniteError):
        SGD().step(params, {"w": np.array([np.nan])}, 0.1)


def test_replayed_step_gives_bit_identical_gradients(model, dims, records):
    cfg = TrainConfig(seed=4, n_omega=3)
    batch = TripletBatch.from_triplets(records[:2])
    pooled = np.concatenate([model.last_hidden(None, batch.edit), model.last_hidden(None, batch.rephrase)])
    objective = EditObjective(model, batch, cfg, cfg.kernel.resolve(pooled))
    rng = np.random.default_rng(8)
    start = EditDelta({k: rng.normal(scale=0.05, size=v.shape) for k, v in EditDelta.zeros(dims).values.items()})

    def step_gradients(step):
        state = PrimalDualState.create(objective, start.to_paramset(), cfg)
        graph = Graph(tangent=True)
        leaves = state.edit.attach(graph)
        value, _ = lagrangian(graph, objective, leaves, state.penalty_weight(leaves), omega_draws(cfg, step), cfg)
        return state.edit.grads_from(backward(graph, value))

    first, replay, other = step_gradients(5), step_gradients(5), step_gradients(6)
    assert all(np.array_equal(first[name], replay[name]) for name in first)
    assert any(not np.array_equal(first[name], other[name]) for name in first)
