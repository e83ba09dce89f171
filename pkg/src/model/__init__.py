"""Toy multimodal model, edit deltas and the environment perturbation."""

from .checkpoint import load_checkpoint, save_checkpoint
from .toy_model import (
    DEFAULT_EDIT_LAYERS,
    LAYERS,
    EditDelta,
    ModelDims,
    OmegaDistribution,
    OmegaSample,
    PromptBatch,
    PromptVec,
    ToyModel,
    init_model,
    predict_from_logits,
)

__all__ = [
    'DEFAULT_EDIT_LAYERS',
    'LAYERS',
    'EditDelta',
    'ModelDims',
    'OmegaDistribution',
    'OmegaSample',
    'PromptBatch',
    'PromptVec',
    'ToyModel',
    'init_model',
    'predict_from_logits',
    'load_checkpoint',
    'save_checkpoint',
]
