"""Versioned JSON checkpoints for the base model and an edit delta."""

import json
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple, Union

import numpy as np
import structlog

from ..autodiff import ParamSet
from .toy_model import EditDelta, ModelDims, ToyModel

logger = structlog.get_logger(__name__)

FORMAT_VERSION = 1


def _pack(values: Mapping[str, np.ndarray]) -> Dict[str, Any]:
    return {name: {"shape": list(v.shape), "data": v.ravel().tolist()} for name, v in values.items()}


def _unpack(blob: Mapping[str, Any]) -> Dict[str, np.ndarray]:
    return {
        name: np.asarray(entry["data"], dtype=np.float64).reshape(entry["shape"])
        for name, entry in blob.items()
    }


def save_checkpoint(path: Union[str, Path], model: ToyModel, delta: Optional[EditDelta] = None) -> Path:
    """Write dims, seed, flat base parameters and (optionally) the delta."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "format_version": FORMAT_VERSION,
        "dims": model.dims.model_dump(mode="json"),
        "seed": model.seed,
        "params": _pack(model.params.values),
        "delta": _pack(delta.values) if delta is not None else None,
    }
    path.write_text(json.dumps(payload))
    logger.info("checkpoint saved", path=str(path), has_delta=delta is not None)
    return path


def load_checkpoint(path: Union[str, Path]) -> Tuple[ToyModel, Optional[EditDelta]]:
    payload = json.loads(Path(path).read_text())
    version = payload.get("format_version")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint format version {version!r}")
    dims = ModelDims.model_validate(payload["dims"])
    model = ToyModel(dims, ParamSet("base", _unpack(payload["params"])), seed=payload.get("seed"))
    delta = None
    if payload.get("delta") is not None:
        delta = EditDelta(_unpack(payload["delta"]))
        delta.validate(dims)
    return model, delta
