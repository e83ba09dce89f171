"""Synthetic multimodal editing benchmark."""

from .jsonl_io import TripletRecord, export_jsonl, import_jsonl
from .triplets import (
    MEMBERS,
    SHIFT_KINDS,
    EditTriplet,
    generate_dataset,
    make_edit_triplet,
    semantic_distance,
    spurious_probe_accuracy,
    summarize,
    validate_triplet,
)
from .world import FactTuple, World, WorldSpec, generate_world

__all__ = [
    'MEMBERS',
    'SHIFT_KINDS',
    'EditTriplet',
    'FactTuple',
    'TripletRecord',
    'World',
    'WorldSpec',
    'export_jsonl',
    'generate_dataset',
    'generate_world',
    'import_jsonl',
    'make_edit_triplet',
    'semantic_distance',
    'spurious_probe_accuracy',
    'summarize',
    'validate_triplet',
]
