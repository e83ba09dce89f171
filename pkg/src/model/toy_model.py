"""Two-branch multimodal classifier standing in for the edited model.

Image and text features pass through their own 2-layer encoders, a linear
fusion layer produces the last hidden state ``h``, and a linear head maps it to
``V`` answer logits.  Edits are additive deltas on designated layers; the
environment variable ω scales the last hidden state, ``h <- (1 + ω) h``.
"""

from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, Field, field_validator

from ..autodiff import ParamSet, Tensor, ops
from ..errors import ShapeError

logger = structlog.get_logger(__name__)

LAYERS = ("img1", "img2", "txt1", "txt2", "fusion", "head")
# uniform-init gain per layer: He for layers feeding a ReLU, LeCun for the linear ones
INIT_GAINS = {
    "img1": np.sqrt(6.0),
    "img2": np.sqrt(6.0),
    "txt1": np.sqrt(6.0),
    "txt2": np.sqrt(6.0),
    "fusion": np.sqrt(3.0),
    "head": np.sqrt(3.0),
}
DEFAULT_EDIT_LAYERS = ("fusion", "head")

WeightLike = Union[Tensor, np.ndarray]
DeltaLike = Union["EditDelta", Mapping[str, WeightLike], None]


class ModelDims(BaseModel):
    """Layer sizes of the toy model.

    ``logit_scale`` widens the head initialization; at the default the base
    model answers with clear margins between its top logits.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    d_img: int = Field(16, gt=0)
    d_txt: int = Field(16, gt=0)
    d_h: int = Field(32, gt=0)
    V: int = Field(16, ge=2)
    logit_scale: float = Field(8.0, gt=0.0)
    edit_layers: Tuple[str, ...] = DEFAULT_EDIT_LAYERS

    @field_validator("edit_layers")
    @classmethod
    def _known_layers(cls, value: Tuple[str, ...]) -> Tuple[str, ...]:
        unknown = [name for name in value if name not in LAYERS]
        if unknown or not value:
            raise ValueError(f"edit_layers must be a non-empty subset of {LAYERS}, got {value}")
        return tuple(value)

    def layer_shapes(self) -> Dict[str, Tuple[int, int]]:
        return {
            "img1": (self.d_img, self.d_h),
            "img2": (self.d_h, self.d_h),
            "txt1": (self.d_txt, self.d_h),
            "txt2": (self.d_h, self.d_h),
            "fusion": (2 * self.d_h, self.d_h),
            "head": (self.d_h, self.V),
        }

    def param_shapes(self, layers: Iterable[str] = LAYERS) -> Dict[str, Tuple[int, ...]]:
        shapes: Dict[str, Tuple[int, ...]] = {}
        for layer in layers:
            fan_in, fan_out = self.layer_shapes()[layer]
            shapes[f"{layer}.W"] = (fan_in, fan_out)
            shapes[f"{layer}.b"] = (fan_out,)
        return shapes

    def parameter_count(self) -> int:
        return int(sum(np.prod(shape) for shape in self.param_shapes().values()))


@dataclass(frozen=True)
class PromptVec:
    """One prompt: image-feature surrogate ``m``, text-feature surrogate ``x``, answer ``y``."""

    m: np.ndarray
    x: np.ndarray
    y: int


@dataclass
class PromptBatch:
    """Row-stacked prompts."""

    M: np.ndarray
    X: np.ndarray
    y: np.ndarray

    def __post_init__(self) -> None:
        self.M = np.atleast_2d(np.asarray(self.M, dtype=np.float64))
        self.X = np.atleast_2d(np.asarray(self.X, dtype=np.float64))
        self.y = np.asarray(self.y, dtype=np.int64).reshape(-1)
        if not (len(self.M) == len(self.X) == len(self.y)):
            raise ShapeError(f"prompt batch rows differ: {len(self.M)}, {len(self.X)}, {len(self.y)}")
        if not (np.all(np.isfinite(self.M)) and np.all(np.isfinite(self.X))):
            raise ValueError("prompt features must be finite")

    @classmethod
    def from_prompts(cls, prompts: Sequence[PromptVec]) -> "PromptBatch":
        if not prompts:
            raise ValueError("empty prompt list")
        return cls(
            M=np.stack([p.m for p in prompts]),
            X=np.stack([p.x for p in prompts]),
            y=np.array([p.y for p in prompts]),
        )

    def __len__(self) -> int:
        return len(self.y)


class OmegaDistribution(BaseModel):
    """Environment distribution of the scalar classifier perturbation ω."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: str = "uniform"
    low: float = -0.9
    high: float = 0.1

    @field_validator("kind")
    @classmethod
    def _supported(cls, value: str) -> str:
        if value != "uniform":
            raise ValueError("only the uniform environment distribution is supported")
        return value

    def sample(self, n: int, seed: int) -> List["OmegaSample"]:
        rng = np.random.default_rng(seed)
        return [OmegaSample(float(v), self.tag) for v in rng.uniform(self.low, self.high, size=n)]

    def mean(self) -> float:
        return 0.5 * (self.low + self.high)

    def grid(self, resolution: int) -> np.ndarray:
        return np.linspace(self.low, self.high, resolution)

    @property
    def tag(self) -> str:
        return f"uniform[{self.low:g},{self.high:g}]"


@dataclass(frozen=True)
class OmegaSample:
    """One draw of ω and the distribution it came from."""

    value: float
    distribution: str = "uniform[-0.9,0.1]"


@dataclass
class EditDelta:
    """Additive parameter deltas restricted to the model's edit layers."""

    values: Dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def zeros(cls, dims: ModelDims) -> "EditDelta":
        return cls({name: np.zeros(shape) for name, shape in dims.param_shapes(dims.edit_layers).items()})

    @classmethod
    def from_paramset(cls, params: ParamSet) -> "EditDelta":
        return cls({name: v.copy() for name, v in params.values.items()})

    def to_paramset(self) -> ParamSet:
        return ParamSet("edit", {name: v.copy() for name, v in self.values.items()})

    def validate(self, dims: ModelDims) -> None:
        allowed = dims.param_shapes(dims.edit_layers)
        for name, value in self.values.items():
            if name not in allowed:
                raise ShapeError(f"delta touches '{name}', outside edit layers {dims.edit_layers}")
            if value.shape != allowed[name]:
                raise ShapeError(f"delta '{name}' has shape {value.shape}, expected {allowed[name]}")

    def norm(self) -> float:
        return float(np.sqrt(sum(float(np.sum(v * v)) for v in self.values.values())))

    def is_zero(self) -> bool:
        return all(not np.any(v) for v in self.values.values())


def _as_weights(delta: DeltaLike) -> Mapping[str, WeightLike]:
    if delta is None:
        return {}
    if isinstance(delta, EditDelta):
        return delta.values
    return delta


class ToyModel:
    """Base parameters φ plus the forward pass used by every risk."""

    def __init__(self, dims: ModelDims, params: ParamSet, seed: Optional[int] = None):
        if params.role != "base":
            raise ValueError("model parameters must carry the 'base' role")
        expected = dims.param_shapes()
        for name, shape in expected.items():
            if name not in params.values or params.values[name].shape != shape:
                raise ShapeError(f"parameter '{name}' missing or not shaped {shape}")
        self.dims = dims
        self.params = params
        self.seed = seed

    # ------------------------------------------------------------ weights

    def _weight(self, name: str, delta: Mapping[str, WeightLike]) -> WeightLike:
        base = self.params.values[name]
        extra = delta.get(name)
        if extra is None:
            return base
        return ops.add(base, extra)

    def _linear(self, inputs, layer: str, delta: Mapping[str, WeightLike]):
        W = self._weight(f"{layer}.W", delta)
        b = self._weight(f"{layer}.b", delta)
        return ops.add(ops.matmul(inputs, W), b)

    def encoders_edited(self) -> bool:
        return any(layer in self.dims.edit_layers for layer in ("img1", "img2", "txt1", "txt2"))

    # ------------------------------------------------------------ forward

    def _check_batch(self, batch: PromptBatch) -> None:
        if batch.M.shape[1] != self.dims.d_img or batch.X.shape[1] != self.dims.d_txt:
            raise ShapeError(
                f"prompt features {batch.M.shape[1]}/{batch.X.shape[1]} do not match "
                f"d_img={self.dims.d_img}, d_txt={self.dims.d_txt}"
            )
        if np.any(batch.y < 0) or np.any(batch.y >= self.dims.V):
            raise ShapeError(f"answer index outside [0, {self.dims.V})")

    def branch_features(self, batch: PromptBatch, delta: DeltaLike = None) -> Tensor:
        """Concatenated encoder outputs, shape (n, 2·d_h)."""
        self._check_batch(batch)
        weights = _as_weights(delta)
        img = ops.relu(self._linear(ops.relu(self._linear(Tensor(batch.M), "img1", weights)), "img2", weights))
        txt = ops.relu(self._linear(ops.relu(self._linear(Tensor(batch.X), "txt1", weights)), "txt2", weights))
        return ops.concat([img, txt], axis=1)

    def hidden(self, batch: PromptBatch, delta: DeltaLike = None, features: Optional[Tensor] = None) -> Tensor:
        """Last hidden state before ω, shape (n, d_h)."""
        weights = _as_weights(delta)
        if features is None:
            features = self.branch_features(batch, weights)
        return self._linear(features, "fusion", weights)

    def head_logits(self, hidden: Tensor, omega: Union[float, Tensor] = 0.0, delta: DeltaLike = None) -> Tensor:
        weights = _as_weights(delta)
        scaled = ops.mul(hidden, ops.add(1.0, omega))
        return self._linear(scaled, "head", weights)

    def forward(self, delta: DeltaLike, omega: Union[float, Tensor], batch: PromptBatch) -> Tensor:
        """Logits of shape (n, V) with ω acting as ``h <- (1 + ω) h``."""
        weights = _as_weights(delta)
        return self.head_logits(self.hidden(batch, weights), omega, weights)

    def last_hidden(self, delta: DeltaLike, batch: PromptBatch) -> np.ndarray:
        return self.hidden(batch, delta).numpy()

    def predict(self, delta: DeltaLike, batch: PromptBatch) -> np.ndarray:
        """Argmax class per prompt at the neutral environment; ties go to the lowest index."""
        return predict_from_logits(self.forward(delta, 0.0, batch).data)


def predict_from_logits(logits: np.ndarray) -> np.ndarray:
    # np.argmax returns the first maximal index, which is the tie rule
    return np.argmax(np.atleast_2d(logits), axis=-1)


def init_model(dims: ModelDims, seed: int) -> ToyModel:
    """Gain-scaled uniform fan-in initialization with zero biases; deterministic given ``seed``.

    The head bound is further multiplied by ``dims.logit_scale``.
    """
    rng = np.random.default_rng(seed)
    values: Dict[str, np.ndarray] = {}
    for layer in LAYERS:
        fan_in, fan_out = dims.layer_shapes()[layer]
        bound = INIT_GAINS[layer] / np.sqrt(fan_in)
        if layer == "head":
            bound *= dims.logit_scale
        values[f"{layer}.W"] = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        values[f"{layer}.b"] = np.zeros(fan_out)
    model = ToyModel(dims, ParamSet("base", values), seed=seed)
    logger.debug("model initialized", seed=seed, parameters=dims.parameter_count())
    return model
