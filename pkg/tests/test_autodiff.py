import numpy as np
import pytest

from src.autodiff import Graph, ParamSet, Tensor, backward, directional_derivative, finite_diff_check, ops
from src.errors import GraphError, NonFiniteError, ShapeError


def test_forward_values():
    assert np.array_equal(ops.relu(Tensor([-1.0, 2.0])).data, [0.0, 2.0])
    assert ops.softplus(Tensor(0.0)).item() == pytest.approx(np.log(2.0))
    assert np.allclose(ops.softmax_logits(Tensor([0.0, 0.0])).data, [0.5, 0.5])


def test_backward_square_and_product():
    graph = Graph()
    x = graph.leaf("x", 3.0)
    assert backward(graph, ops.square(x))["x"].item() == pytest.approx(6.0)

    graph = Graph()
    x, y = graph.leaf("x", 2.0), graph.leaf("y", 5.0)
    grads = backward(graph, ops.mul(x, y))
    assert grads["x"].item() == pytest.approx(5.0)
    assert grads["y"].item() == pytest.approx(2.0)


def test_softplus_chain_rule():
    graph = Graph()
    w = graph.leaf("w", 1.0)
    grads = backward(graph, ops.softplus(ops.mul(w, 2.0)))
    assert grads["w"].item() == pytest.approx(1.7616, abs=1e-4)


def test_unreached_leaf_gets_zero_gradient():
    graph = Graph()
    x = graph.leaf("x", np.ones(3))
    graph.leaf("unused", np.ones((2, 2)))
    grads = backward(graph, ops.sum(x))
    assert np.array_equal(grads["unused"].data, np.zeros((2, 2)))


def test_directional_derivative_linear_and_square():
    graph = Graph(tangent=True)
    omega = graph.leaf("omega", 0.0)
    graph.seed("omega", 1.0)
    out = ops.add(ops.mul(omega, 0.7), 1.0)
    assert directional_derivative(graph, out, "omega").item() == pytest.approx(0.7)

    graph = Graph(tangent=True)
    omega = graph.leaf("omega", 3.0)
    graph.seed("omega", 1.0)
    assert directional_derivative(graph, ops.square(omega), "omega").item() == pytest.approx(6.0)


def test_tangent_is_differentiable():
    graph = Graph(tangent=True)
    phi = graph.leaf("phi", 0.5)
    omega = graph.leaf("omega", 0.0)
    graph.seed("omega", 1.0)
    risk = ops.abs(ops.add(ops.mul(omega, phi), 1.0))
    slope = directional_derivative(graph, risk, "omega")
    assert slope.item() == pytest.approx(0.5)
    assert backward(graph, slope)["phi"].item() == pytest.approx(1.0)


def test_seed_requires_tangent_channel():
    graph = Graph()
    graph.leaf("x", 1.0)
    with pytest.raises(GraphError):
        graph.seed("x", 1.0)


def test_unseeded_leaf_is_rejected():
    graph = Graph(tangent=True)
    x = graph.leaf("x", 1.0)
    with pytest.raises(GraphError):
        directional_derivative(graph, ops.square(x), "x")


def test_backward_needs_scalar():
    graph = Graph()
    x = graph.leaf("x", np.ones(2))
    with pytest.raises(GraphError):
        backward(graph, ops.mul(x, 2.0))


def test_duplicate_leaf_rejected():
    graph = Graph()
    graph.leaf("x", 1.0)
    with pytest.raises(GraphError):
        graph.leaf("x", 2.0)


def test_shape_mismatch_raises():
    with pytest.raises(ShapeError):
        ops.add(Tensor(np.ones((2, 3))), Tensor(np.ones(4)))


def test_non_finite_result_raises():
    with pytest.raises(NonFiniteError):
        ops.log(Tensor(0.0))


def test_operands_from_two_graphs_rejected():
    a = Graph().leaf("a", 1.0)
    b = Graph().leaf("b", 1.0)
    with pytest.raises(GraphError):
        ops.add(a, b)


UNARY = {
    "square": (ops.square, False),
    "sqrt": (ops.sqrt, True),
    "exp": (ops.exp, False),
    "log": (ops.log, True),
    "abs": (ops.abs, False),
    "relu": (ops.relu, False),
    "sigmoid": (ops.sigmoid, False),
    "softplus": (ops.softplus, False),
    "softmax": (ops.softmax_logits, False),
}


@pytest.mark.parametrize("name", sorted(UNARY))
def test_unary_gradients_match_finite_differences(name):
    fn, positive = UNARY[name]
    rng = np.random.default_rng(sum(map(ord, name)))
    for _ in range(20):
        shape = tuple(int(s) for s in rng.integers(1, 4, size=2))
        value = rng.uniform(0.2, 2.0, size=shape) if positive else rng.normal(size=shape)
        if name in ("abs", "relu"):
            value = np.where(np.abs(value) < 0.05, 0.5, value)
        weights = rng.normal(size=shape)
        report = finite_diff_check(
            lambda g, leaves: ops.sum(ops.mul(fn(leaves["x"]), weights)), {"x": value}, floor=1e-6
        )
        assert report.passed, (name, report.max_rel_error)


def test_binary_and_structural_gradients():
    rng = np.random.default_rng(3)
    params = {"a": rng.normal(size=(3, 4)), "b": rng.normal(size=(4, 2)), "c": rng.uniform(1.0, 2.0, size=(3, 2))}

    def loss(graph, leaves):
        product = ops.matmul(leaves["a"], leaves["b"])
        ratio = ops.div(product, leaves["c"])
        stacked = ops.concat([ratio, ops.transpose(ops.reshape(leaves["c"], (2, 3)))], axis=0)
        picked = ops.pick(ops.softmax_logits(stacked), [0, 1, 1, 0, 1, 0])
        return ops.sub(ops.mean(ops.log(picked)), ops.take_flat(leaves["a"], 5))

    assert finite_diff_check(loss, params, floor=1e-6).passed


def test_quadratic_check_is_tight():
    report = finite_diff_check(lambda g, leaves: ops.sum(ops.square(leaves["x"])), {"x": np.array([0.3, -1.2, 2.0])})
    assert report.worst < 1e-6


def test_paramset_roles_and_grads():
    params = ParamSet("edit", {"w": np.ones(2)})
    graph = Graph()
    leaves = params.attach(graph)
    assert graph.leaf_names == ["edit:w"]
    grads = params.grads_from(backward(graph, ops.sum(ops.square(leaves["w"]))))
    assert np.array_equal(grads["w"], [2.0, 2.0])
    with pytest.raises(ValueError):
        ParamSet("other", {})
