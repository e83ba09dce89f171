"""JSONL persistence of edit triplets.

The first line is a header ``{"_world": {...}}`` holding the world spec; every
following line is one record with field names following the MMEdit triplet
layout (``src``, ``rephrase``, ``alt``, ``loc``, ``loc_ans``, ``m_loc``,
``m_loc_q``, ``m_loc_a``) plus the generator metadata. The benchmark spells the
locality answer key ``loc ans``; it is written as ``loc_ans`` and either
spelling is accepted on import.
"""

import json
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import structlog
from pydantic import AliasChoices, BaseModel, ConfigDict, Field, ValidationError

from ..errors import TripletFormatError
from ..model import PromptVec
from .triplets import MEMBERS, EditTriplet
from .world import FactTuple, WorldSpec

logger = structlog.get_logger(__name__)

WORLD_KEY = "_world"


class TripletRecord(BaseModel):
    """Wire shape of one JSONL line."""

    model_config = ConfigDict(extra="forbid")

    record_id: int
    shift: str
    src: List[float]
    image: List[float]
    pred: int
    alt: int
    rephrase: List[float]
    image_rephrase: List[float]
    loc: List[float]
    loc_ans: int = Field(validation_alias=AliasChoices("loc_ans", "loc ans"))
    m_loc: List[float]
    m_loc_q: List[float]
    m_loc_a: int
    facts: Dict[str, Tuple[int, int, int]]
    concepts: Dict[str, List[int]]


def _floats(values: np.ndarray) -> List[float]:
    return [float(v) for v in values]


def to_record(triplet: EditTriplet) -> TripletRecord:
    return TripletRecord(
        record_id=triplet.record_id,
        shift=triplet.shift,
        src=_floats(triplet.src.x),
        image=_floats(triplet.src.m),
        pred=triplet.src.y,
        alt=triplet.alt,
        rephrase=_floats(triplet.rephrase.x),
        image_rephrase=_floats(triplet.image_rephrase.m),
        loc=_floats(triplet.loc.x),
        loc_ans=triplet.loc.y,
        m_loc=_floats(triplet.m_loc.m),
        m_loc_q=_floats(triplet.m_loc.x),
        m_loc_a=triplet.m_loc.y,
        facts={name: tuple(fact.as_list()) for name, fact in triplet.facts.items()},
        concepts={name: sorted(ids) for name, ids in triplet.concepts.items()},
    )


def from_record(record: TripletRecord) -> EditTriplet:
    facts = {name: FactTuple(*values) for name, values in record.facts.items()}
    missing = [name for name in MEMBERS if name not in facts or name not in record.concepts]
    if missing:
        raise ValueError(f"facts/concepts missing for {missing}")
    src_m, src_x = np.array(record.image), np.array(record.src)
    return EditTriplet(
        record_id=record.record_id,
        shift=record.shift,
        src=PromptVec(src_m, src_x, record.pred),
        alt=record.alt,
        rephrase=PromptVec(src_m.copy(), np.array(record.rephrase), record.pred),
        image_rephrase=PromptVec(np.array(record.image_rephrase), src_x.copy(), record.pred),
        loc=PromptVec(np.zeros_like(src_m), np.array(record.loc), record.loc_ans),
        m_loc=PromptVec(np.array(record.m_loc), np.array(record.m_loc_q), record.m_loc_a),
        facts=facts,
        concepts={name: frozenset(ids) for name, ids in record.concepts.items()},
    )


def export_jsonl(records: Sequence[EditTriplet], path: Union[str, Path], world: Optional[WorldSpec] = None) -> Path:
    """Write the header line (when ``world`` is given) and one line per record."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as handle:
        if world is not None:
            handle.write(json.dumps({WORLD_KEY: world.model_dump()}, sort_keys=True) + "\n")
        for triplet in records:
            handle.write(json.dumps(to_record(triplet).model_dump(), sort_keys=True) + "\n")
    logger.info("dataset exported", path=str(path), records=len(records))
    return path


def _first_error_field(exc: ValidationError) -> str:
    errors = exc.errors()
    if not errors:
        return ""
    return ".".join(str(part) for part in errors[0]["loc"])


def import_jsonl(path: Union[str, Path]) -> Tuple[Optional[WorldSpec], List[EditTriplet]]:
    """Parse a dataset file.

    Raises:
        TripletFormatError: for the first malformed line, naming its number and field.
    """
    world: Optional[WorldSpec] = None
    records: List[EditTriplet] = []
    with Path(path).open("r", encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                payload = json.loads(line)
            except json.JSONDecodeError as exc:
                raise TripletFormatError(f"invalid JSON: {exc.msg}", line_number=line_number) from exc
            if not isinstance(payload, dict):
                raise TripletFormatError("record is not a JSON object", line_number=line_number)
            if WORLD_KEY in payload:
                if line_number != 1:
                    raise TripletFormatError("world header after first line", line_number, WORLD_KEY)
                try:
                    world = WorldSpec.model_validate(payload[WORLD_KEY])
                except ValidationError as exc:
                    raise TripletFormatError(str(exc), line_number, _first_error_field(exc)) from exc
                continue
            try:
                records.append(from_record(TripletRecord.model_validate(payload)))
            except ValidationError as exc:
                field = _first_error_field(exc)
                raise TripletFormatError(f"field '{field}' invalid or missing", line_number, field) from exc
            except (TypeError, ValueError) as exc:
                raise TripletFormatError(str(exc), line_number, "facts") from exc
    logger.debug("dataset imported", path=str(path), records=len(records))
    return world, records
