"""Primitive tensor operations.

Each primitive computes its value with numpy, supplies a vector-Jacobian
product for the reverse pass and a tangent rule written with other primitives,
so tangents stay on the graph.
"""

from typing import Optional, Sequence, Tuple, Union

import numpy as np

from ..errors import ShapeError
from .graph import Tensor, record

Operand = Union[Tensor, float, int, np.ndarray]


def as_tensor(value: Operand) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_shape(op: str, a: Tensor, b: Tensor) -> Tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError as exc:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} do not broadcast") from exc


def _tsum(*terms: Optional[Tensor]) -> Optional[Tensor]:
    present = [t for t in terms if t is not None]
    if not present:
        return None
    total = present[0]
    for term in present[1:]:
        total = add(total, term)
    return total


def _subgradient_sign(x: np.ndarray) -> np.ndarray:
    # sign(0) = 0 picks the zero subgradient of |x| at the kink
    return np.sign(x)


# ---------------------------------------------------------------- elementwise

def add(a: Operand, b: Operand) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("add", a, b)
    return record(
        "add",
        a.data + b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
        lambda out: _tsum(a.tangent, b.tangent),
    )


def sub(a: Operand, b: Operand) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("sub", a, b)
    return record(
        "sub",
        a.data - b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)),
        lambda out: _tsum(a.tangent, neg(b.tangent) if b.tangent is not None else None),
    )


def mul(a: Operand, b: Operand) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("mul", a, b)
    return record(
        "mul",
        a.data * b.data,
        (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
        lambda out: _tsum(
            mul(a.tangent, b) if a.tangent is not None else None,
            mul(a, b.tangent) if b.tangent is not None else None,
        ),
    )


def div(a: Operand, b: Operand) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("div", a, b)
    out_data = a.data / b.data

    def jvp(out: Tensor) -> Optional[Tensor]:
        numerator = _tsum(a.tangent, neg(mul(out, b.tangent)) if b.tangent is not None else None)
        return div(numerator, b) if numerator is not None else None

    out = record(
        "div",
        out_data,
        (a, b),
        lambda g: (_unbroadcast(g / b.data, a.shape), _unbroadcast(-g * out_data / b.data, b.shape)),
        jvp,
    )
    return out


def neg(x: Operand) -> Tensor:
    x = as_tensor(x)
    return record("neg", -x.data, (x,), lambda g: (-g,), lambda out: neg(x.tangent))


def square(x: Operand) -> Tensor:
    x = as_tensor(x)
    return record(
        "square",
        x.data * x.data,
        (x,),
        lambda g: (2.0 * g * x.data,),
        lambda out: mul(mul(x, x.tangent), 2.0),
    )


def sqrt(x: Operand) -> Tensor:
    x = as_tensor(x)
    out_data = np.sqrt(x.data)
    out = record(
        "sqrt",
        out_data,
        (x,),
        lambda g: (g / (2.0 * out_data),),
        lambda out: div(x.tangent, mul(out, 2.0)),
    )
    return out


def exp(x: Operand) -> Tensor:
    x = as_tensor(x)
    out_data = np.exp(x.data)
    out = record("exp", out_data, (x,), lambda g: (g * out_data,), lambda out: mul(x.tangent, out))
    return out


def log(x: Operand) -> Tensor:
    x = as_tensor(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        out_data = np.log(x.data)
    return record("log", out_data, (x,), lambda g: (g / x.data,), lambda out: div(x.tangent, x))


def abs(x: Operand) -> Tensor:  # noqa: A001 - mirrors numpy naming
    x = as_tensor(x)
    return record(
        "abs",
        np.abs(x.data),
        (x,),
        lambda g: (g * _subgradient_sign(x.data),),
        lambda out: mul(x.tangent, Tensor(_subgradient_sign(x.data))),
    )


def relu(x: Operand) -> Tensor:
    x = as_tensor(x)
    mask = (x.data > 0).astype(np.float64)
    return record(
        "relu",
        x.data * mask,
        (x,),
        lambda g: (g * mask,),
        lambda out: mul(x.tangent, Tensor(mask)),
    )


def _logistic(x: np.ndarray) -> np.ndarray:
    return 0.5 * (np.tanh(0.5 * x) + 1.0)


def sigmoid(x: Operand) -> Tensor:
    x = as_tensor(x)
    out_data = _logistic(x.data)
    out = record(
        "sigmoid",
        out_data,
        (x,),
        lambda g: (g * out_data * (1.0 - out_data),),
        lambda out: mul(x.tangent, mul(out, sub(1.0, out))),
    )
    return out


def softplus(x: Operand) -> Tensor:
    x = as_tensor(x)
    return record(
        "softplus",
        np.logaddexp(0.0, x.data),
        (x,),
        lambda g: (g * _logistic(x.data),),
        lambda out: mul(x.tangent, sigmoid(x)),
    )


def clamp_min(x: Operand, floor: float) -> Tensor:
    x = as_tensor(x)
    mask = (x.data > floor).astype(np.float64)
    return record(
        "clamp_min",
        np.maximum(x.data, floor),
        (x,),
        lambda g: (g * mask,),
        lambda out: mul(x.tangent, Tensor(mask)),
    )


# ---------------------------------------------------------------- reductions

def sum(x: Operand, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:  # noqa: A001
    x = as_tensor(x)

    def vjp(g: np.ndarray) -> Tuple[np.ndarray]:
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return record(
        "sum",
        np.sum(x.data, axis=axis, keepdims=keepdims),
        (x,),
        vjp,
        lambda out: sum(x.tangent, axis=axis, keepdims=keepdims),
    )


def mean(x: Operand, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    count = x.data.size if axis is None else x.shape[axis]
    if count == 0:
        raise ShapeError("mean over an empty axis")
    return mul(sum(x, axis=axis, keepdims=keepdims), 1.0 / count)


def take_flat(x: Operand, index: int) -> Tensor:
    """Element ``index`` of the row-major flattening of ``x``."""
    x = as_tensor(x)
    if not 0 <= index < x.data.size:
        raise ShapeError(f"take_flat: index {index} outside size {x.data.size}")

    def vjp(g: np.ndarray) -> Tuple[np.ndarray]:
        grad = np.zeros(x.data.size)
        grad[index] = g
        return (grad.reshape(x.shape),)

    return record("take_flat", x.data.reshape(-1)[index], (x,), vjp, lambda out: take_flat(x.tangent, index))


def pick(x: Operand, indices: Sequence[int]) -> Tensor:
    """Row-wise gather on the last axis of a matrix: out[i] = x[i, indices[i]]."""
    x = as_tensor(x)
    idx = np.asarray(indices, dtype=np.int64)
    if x.ndim != 2 or idx.shape != (x.shape[0],):
        raise ShapeError(f"pick: matrix {x.shape} with {idx.shape} indices")
    if np.any(idx < 0) or np.any(idx >= x.shape[1]):
        raise ShapeError("pick: index out of range")
    rows = np.arange(x.shape[0])

    def vjp(g: np.ndarray) -> Tuple[np.ndarray]:
        grad = np.zeros(x.shape)
        grad[rows, idx] = g
        return (grad,)

    return record("pick", x.data[rows, idx], (x,), vjp, lambda out: pick(x.tangent, idx))


# ---------------------------------------------------------------- structure

def matmul(a: Operand, b: Operand) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim not in (1, 2) or b.ndim != 2 or a.shape[-1] != b.shape[0]:
        raise ShapeError(f"matmul: {a.shape} @ {b.shape}")

    def vjp(g: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        if a.ndim == 1:
            return b.data @ g, np.outer(a.data, g)
        return g @ b.data.T, a.data.T @ g

    return record(
        "matmul",
        a.data @ b.data,
        (a, b),
        vjp,
        lambda out: _tsum(
            matmul(a.tangent, b) if a.tangent is not None else None,
            matmul(a, b.tangent) if b.tangent is not None else None,
        ),
    )


def transpose(x: Operand) -> Tensor:
    x = as_tensor(x)
    if x.ndim != 2:
        raise ShapeError(f"transpose expects a matrix, got {x.shape}")
    return record("transpose", x.data.T.copy(), (x,), lambda g: (g.T,), lambda out: transpose(x.tangent))


def reshape(x: Operand, shape: Tuple[int, ...]) -> Tensor:
    x = as_tensor(x)
    try:
        out_data = x.data.reshape(shape)
    except ValueError as exc:
        raise ShapeError(f"reshape {x.shape} -> {shape}") from exc
    return record(
        "reshape", out_data.copy(), (x,), lambda g: (g.reshape(x.shape),), lambda out: reshape(x.tangent, shape)
    )


def broadcast_to(x: Operand, shape: Tuple[int, ...]) -> Tensor:
    x = as_tensor(x)
    try:
        out_data = np.broadcast_to(x.data, shape).copy()
    except ValueError as exc:
        raise ShapeError(f"broadcast_to {x.shape} -> {shape}") from exc
    return record(
        "broadcast_to",
        out_data,
        (x,),
        lambda g: (_unbroadcast(g, x.shape),),
        lambda out: broadcast_to(x.tangent, shape),
    )


def concat(tensors: Sequence[Operand], axis: int = 0) -> Tensor:
    parts = [as_tensor(t) for t in tensors]
    if not parts:
        raise ShapeError("concat of nothing")
    try:
        out_data = np.concatenate([p.data for p in parts], axis=axis)
    except ValueError as exc:
        raise ShapeError(f"concat: {[p.shape for p in parts]} on axis {axis}") from exc
    bounds = np.cumsum([p.shape[axis] for p in parts])[:-1]

    def vjp(g: np.ndarray) -> Sequence[np.ndarray]:
        return np.split(g, bounds, axis=axis)

    def jvp(out: Tensor) -> Tensor:
        return concat(
            [p.tangent if p.tangent is not None else Tensor(np.zeros(p.shape)) for p in parts], axis=axis
        )

    return record("concat", out_data, parts, vjp, jvp)


# ---------------------------------------------------------------- distributions

def softmax_logits(x: Operand) -> Tensor:
    """Softmax over the last axis."""
    x = as_tensor(x)
    shifted = x.data - np.max(x.data, axis=-1, keepdims=True)
    e = np.exp(shifted)
    out_data = e / np.sum(e, axis=-1, keepdims=True)

    def vjp(g: np.ndarray) -> Tuple[np.ndarray]:
        return (out_data * (g - np.sum(g * out_data, axis=-1, keepdims=True)),)

    def jvp(out: Tensor) -> Tensor:
        centred = sub(x.tangent, sum(mul(out, x.tangent), axis=-1, keepdims=True))
        return mul(out, centred)

    out = record("softmax", out_data, (x,), vjp, jvp)
    return out


# ---------------------------------------------------------------- operators

def _rsub(a: Tensor, b: Operand) -> Tensor:
    return sub(b, a)


def _rdiv(a: Tensor, b: Operand) -> Tensor:
    return div(b, a)


Tensor.__add__ = add
Tensor.__radd__ = add
Tensor.__sub__ = sub
Tensor.__rsub__ = _rsub
Tensor.__mul__ = mul
Tensor.__rmul__ = mul
Tensor.__truediv__ = div
Tensor.__rtruediv__ = _rdiv
Tensor.__neg__ = neg
Tensor.__matmul__ = matmul
