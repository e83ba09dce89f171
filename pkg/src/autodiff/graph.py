"""Recorded computation graph with a reverse pass and a forward-tangent channel.

A :class:`Graph` is an append-only list of primitive records.  Tensors that
take part in a recorded computation carry the id of the node that produced
them.  When the tangent channel is enabled, every primitive also derives the
output tangent from its inputs' tangents *using recorded primitives*, so a
directional derivative is itself a node that ``backward`` can differentiate
(forward-over-reverse).
"""

from contextlib import contextmanager
from dataclasses import dataclass
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..errors import GraphError, NonFiniteError

ArrayLike = Union[float, int, Sequence[float], np.ndarray]
VJP = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


class Tensor:
    """Dense float64 array, optionally attached to a :class:`Graph`."""

    __slots__ = ("data", "node_id", "graph", "tangent")

    def __init__(self, data: ArrayLike):
        self.data = np.array(data, dtype=np.float64)
        self.node_id: Optional[int] = None
        self.graph: Optional["Graph"] = None
        self.tangent: Optional["Tensor"] = None

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def attached(self) -> bool:
        return self.node_id is not None

    def item(self) -> float:
        return float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self) -> str:
        where = f", node={self.node_id}" if self.attached else ""
        return f"Tensor(shape={self.shape}{where})"


@dataclass
class Node:
    """One primitive record: op kind, input node ids and its vector-Jacobian product."""

    op: str
    inputs: Tuple[Optional[int], ...]
    vjp: Optional[VJP]
    name: Optional[str] = None


class Graph:
    """Append-only computation record owned by a single execution context."""

    def __init__(self, tangent: bool = False):
        self.nodes: List[Node] = []
        self.tangent_active = tangent
        self._leaves: Dict[str, Tensor] = {}
        self._seeded: Dict[str, np.ndarray] = {}
        self._tangent_suppressed = 0

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def leaf_names(self) -> List[str]:
        return list(self._leaves)

    def enable_tangent(self) -> None:
        self.tangent_active = True

    def leaf(self, name: str, value: ArrayLike) -> Tensor:
        """Register a named differentiable input."""
        if name in self._leaves:
            raise GraphError(f"leaf '{name}' already registered")
        tensor = Tensor(value)
        if not np.all(np.isfinite(tensor.data)):
            raise NonFiniteError(f"leaf '{name}' holds non-finite values")
        tensor.node_id = self._append(Node("leaf", (), None, name))
        tensor.graph = self
        self._leaves[name] = tensor
        return tensor

    def seed(self, name: str, direction: ArrayLike) -> None:
        """Attach a tangent direction to a leaf; must precede the forward pass."""
        if not self.tangent_active:
            raise GraphError("tangent channel not enabled on this graph")
        leaf = self._leaves.get(name)
        if leaf is None:
            raise GraphError(f"cannot seed unknown leaf '{name}'")
        direction = np.broadcast_to(np.asarray(direction, dtype=np.float64), leaf.shape)
        leaf.tangent = Tensor(direction)
        self._seeded[name] = np.array(direction)

    def is_seeded(self, name: str) -> bool:
        return name in self._seeded

    @contextmanager
    def tangent_rules(self) -> Iterator[None]:
        # ops recorded while deriving a tangent do not get tangents of their own
        self._tangent_suppressed += 1
        try:
            yield
        finally:
            self._tangent_suppressed -= 1

    @property
    def propagating_tangents(self) -> bool:
        return self.tangent_active and self._tangent_suppressed == 0

    def _append(self, node: Node) -> int:
        for input_id in node.inputs:
            assert input_id is None or input_id < len(self.nodes), "graph must stay topologically ordered"
        self.nodes.append(node)
        return len(self.nodes) - 1


def record(
    op: str,
    data: np.ndarray,
    inputs: Sequence[Tensor],
    vjp: VJP,
    jvp: Optional[Callable[[Tensor], Optional[Tensor]]] = None,
) -> Tensor:
    """Wrap a primitive's result, recording it when any input is attached."""
    if not np.all(np.isfinite(data)):
        raise NonFiniteError(f"{op} produced non-finite values")
    out = Tensor(data)
    graph = _graph_of(inputs)
    if graph is None:
        return out
    out.node_id = graph._append(Node(op, tuple(t.node_id for t in inputs), vjp))
    out.graph = graph
    if jvp is not None and graph.propagating_tangents and any(t.tangent is not None for t in inputs):
        with graph.tangent_rules():
            tangent = jvp(out)
            if tangent is not None and tangent.shape != out.shape:
                from .ops import broadcast_to

                tangent = broadcast_to(tangent, out.shape)
        out.tangent = tangent
    return out


def _graph_of(inputs: Sequence[Tensor]) -> Optional[Graph]:
    graph = None
    for tensor in inputs:
        if tensor.graph is None:
            continue
        if graph is None:
            graph = tensor.graph
        elif tensor.graph is not graph:
            raise GraphError("operands belong to different graphs")
    return graph


def backward(graph: Graph, output: Tensor) -> Dict[str, Tensor]:
    """Reverse pass from a 0-dimensional output.

    Returns:
        Gradient for every leaf of ``graph``; leaves with no path to ``output``
        receive zeros.
    """
    if output.ndim != 0:
        raise GraphError(f"backward needs a 0-dimensional output, got shape {output.shape}")
    grads: Dict[int, np.ndarray] = {}
    if output.attached:
        if output.graph is not graph:
            raise GraphError("output was recorded on another graph")
        grads[output.node_id] = np.ones((), dtype=np.float64)

    leaf_grads: Dict[int, np.ndarray] = {}
    start = output.node_id if output.attached else -1
    for node_id in range(start, -1, -1):
        upstream = grads.pop(node_id, None)
        if upstream is None:
            continue
        node = graph.nodes[node_id]
        if node.vjp is None:
            leaf_grads[node_id] = upstream
            continue
        for input_id, contribution in zip(node.inputs, node.vjp(upstream)):
            if input_id is None or contribution is None:
                continue
            assert input_id < node_id, "graph cycle"
            if input_id in grads:
                grads[input_id] = grads[input_id] + contribution
            else:
                grads[input_id] = contribution

    result: Dict[str, Tensor] = {}
    for name, leaf in graph._leaves.items():
        grad = leaf_grads.get(leaf.node_id)
        if grad is None:
            grad = np.zeros(leaf.shape)
        grad = np.broadcast_to(grad, leaf.shape)
        if not np.all(np.isfinite(grad)):
            raise NonFiniteError(f"non-finite gradient for '{name}'")
        result[name] = Tensor(grad)
    return result


def directional_derivative(
    graph: Graph, output: Tensor, seed_param: str, seed_direction: Optional[ArrayLike] = None
) -> Tensor:
    """d/dt f(θ + t·dir) at t = 0, as a node that stays differentiable.

    The seed must have been placed with :meth:`Graph.seed` before the forward
    pass; ``seed_direction``, when given, must match it.
    """
    if not graph.tangent_active:
        raise GraphError("tangent channel not enabled on this graph")
    if not graph.is_seeded(seed_param):
        raise GraphError(f"leaf '{seed_param}' was not seeded before the forward pass")
    if seed_direction is not None:
        expected = graph._seeded[seed_param]
        if not np.array_equal(np.broadcast_to(np.asarray(seed_direction, dtype=np.float64), expected.shape), expected):
            raise GraphError(f"direction for '{seed_param}' differs from the seeded one")
    if output.graph is not None and output.graph is not graph:
        raise GraphError("output was recorded on another graph")
    if output.tangent is None:
        return Tensor(np.zeros(output.shape))
    return output.tangent
