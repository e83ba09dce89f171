"""Edit triplets realizing semantic shift (rephrases) and factual shift (locality prompts)."""

from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Sequence

import numpy as np
import structlog

from ..errors import WorldExhaustedError
from ..model import PromptVec
from .world import FactTuple, World

logger = structlog.get_logger(__name__)

SHIFT_KINDS = ("easy", "hard")
MEMBERS = ("src", "rephrase", "image_rephrase", "loc", "m_loc")


@dataclass
class EditTriplet:
    """One benchmark record: the edit, its rephrases and its out-of-scope prompts.

    ``loc`` is text-only (zero image features); ``m_loc`` is multimodal.
    ``src.y`` holds the pre-edit answer and ``alt`` the edit target.
    """

    record_id: int
    shift: str
    src: PromptVec
    alt: int
    rephrase: PromptVec
    image_rephrase: PromptVec
    loc: PromptVec
    m_loc: PromptVec
    facts: Dict[str, FactTuple] = field(default_factory=dict)
    concepts: Dict[str, FrozenSet[int]] = field(default_factory=dict)

    @property
    def y_old(self) -> int:
        return self.src.y

    def edit_prompt(self) -> PromptVec:
        """The source prompt labelled with the edit target."""
        return PromptVec(self.src.m, self.src.x, self.alt)

    def rephrases(self, mode: str = "single") -> List[PromptVec]:
        if mode == "single":
            return [self.rephrase]
        if mode == "multi":
            return [self.rephrase, self.image_rephrase]
        raise ValueError(f"unknown rephrase mode '{mode}'")


def semantic_features(world: World, prompt: PromptVec) -> np.ndarray:
    """Invariant-subspace features (the generator's stand-in for a semantic embedding)."""
    d_inv_img = world.spec.d_img_inv
    d_inv_txt = world.spec.d_txt_inv
    return np.concatenate([prompt.m[:d_inv_img], prompt.x[:d_inv_txt]])


def semantic_distance(world: World, a: PromptVec, b: PromptVec) -> float:
    return float(np.linalg.norm(semantic_features(world, a) - semantic_features(world, b)))


def _render(world: World, fact: FactTuple, rng: np.random.Generator, text_only: bool = False) -> PromptVec:
    spec = world.spec
    environment = rng.uniform(0.5, 1.5)
    spurious = spec.spurious_strength * environment
    m = np.concatenate([world.img_entity[fact.entity], spurious * world.spurious_img[fact.value]])
    x = np.concatenate(
        [
            world.txt_entity[fact.entity] + world.txt_attribute[fact.attribute],
            spurious * world.spurious_txt[fact.value],
        ]
    )
    m = m + rng.normal(scale=spec.noise, size=m.shape)
    x = x + rng.normal(scale=spec.noise, size=x.shape)
    if text_only:
        m = np.zeros_like(m)
    return PromptVec(m, x, fact.value)


def _bounded_perturbation(rng: np.random.Generator, size: int, radius: float) -> np.ndarray:
    if radius <= 0:
        return np.zeros(size)
    direction = rng.normal(size=size)
    direction /= np.linalg.norm(direction)
    return direction * radius * rng.uniform(0.25, 1.0)


def _loc_candidates(world: World, fact: FactTuple, shift_kind: str) -> List[FactTuple]:
    source_concepts = world.concepts(fact)
    candidates = []
    for other in world.all_facts():
        if other.key() == fact.key() or other.value == fact.value:
            continue
        shared = len(world.concepts(other) & source_concepts)
        if shift_kind == "easy" and shared == 0:
            candidates.append(other)
        elif shift_kind == "hard" and shared == 1:
            candidates.append(other)
    return candidates


def _pick_loc(
    world: World,
    src: PromptVec,
    candidates: Sequence[FactTuple],
    rng: np.random.Generator,
    text_only: bool,
) -> (FactTuple, PromptVec):
    for index in rng.permutation(len(candidates)):
        other = candidates[index]
        prompt = _render(world, other, rng, text_only=text_only)
        if semantic_distance(world, src, prompt) > world.epsilon:
            return other, prompt
    raise WorldExhaustedError("no locality fact lies outside the semantic neighborhood")


def make_edit_triplet(
    world: World,
    fact: FactTuple,
    new_value: int,
    shift_kind: str,
    index: int = 0,
) -> EditTriplet:
    """Build one record for editing ``fact`` to ``new_value``.

    Pure given the world and ``index``: the record's randomness is seeded by
    ``(world seed, index)``.
    """
    if shift_kind not in SHIFT_KINDS:
        raise ValueError(f"shift kind must be one of {SHIFT_KINDS}, got '{shift_kind}'")
    if new_value == fact.value:
        raise ValueError("edit target must differ from the current value")
    if not 0 <= new_value < world.spec.V:
        raise ValueError(f"edit target {new_value} outside [0, {world.spec.V})")

    rng = np.random.default_rng([world.spec.seed, 2, index])
    spec = world.spec
    src = _render(world, fact, rng)

    text_shift = np.zeros(spec.d_txt)
    text_shift[: spec.d_txt_inv] = _bounded_perturbation(rng, spec.d_txt_inv, world.epsilon)
    rephrase = PromptVec(src.m.copy(), src.x + text_shift, src.y)

    image_shift = np.zeros(spec.d_img)
    image_shift[: spec.d_img_inv] = _bounded_perturbation(rng, spec.d_img_inv, world.epsilon)
    image_rephrase = PromptVec(src.m + image_shift, src.x.copy(), src.y)

    candidates = _loc_candidates(world, fact, shift_kind)
    if not candidates:
        raise WorldExhaustedError(f"no {shift_kind} factual shift available for fact {fact.key()}")
    loc_fact, loc = _pick_loc(world, src, candidates, rng, text_only=True)
    m_loc_fact, m_loc = _pick_loc(world, src, candidates, rng, text_only=False)

    facts = {
        "src": fact,
        "rephrase": fact,
        "image_rephrase": fact,
        "loc": loc_fact,
        "m_loc": m_loc_fact,
    }
    return EditTriplet(
        record_id=index,
        shift=shift_kind,
        src=src,
        alt=int(new_value),
        rephrase=rephrase,
        image_rephrase=image_rephrase,
        loc=loc,
        m_loc=m_loc,
        facts=facts,
        concepts={member: world.concepts(f) for member, f in facts.items()},
    )


def generate_dataset(world: World, n: int, hard_fraction: float = 0.5, start: int = 0) -> List[EditTriplet]:
    """``n`` records with indices ``start .. start+n-1``; record ``i`` depends only on ``i``."""
    if not 0.0 <= hard_fraction <= 1.0:
        raise ValueError("hard_fraction must lie in [0, 1]")
    records = []
    for index in range(start, start + n):
        rng = np.random.default_rng([world.spec.seed, 1, index])
        entity = int(rng.integers(world.spec.n_entities))
        attribute = int(rng.integers(world.spec.n_attributes))
        fact = world.fact(entity, attribute)
        offset = int(rng.integers(1, world.spec.V))
        new_value = (fact.value + offset) % world.spec.V
        shift_kind = "hard" if rng.random() < hard_fraction else "easy"
        records.append(make_edit_triplet(world, fact, new_value, shift_kind, index=index))
    logger.info("dataset generated", records=n, hard=sum(r.shift == "hard" for r in records))
    return records


def validate_triplet(triplet: EditTriplet, world: World) -> List[str]:
    """Every violated record invariant, as short diagnostics; empty means valid."""
    spec = world.spec
    problems: List[str] = []
    members = {
        "src": triplet.src,
        "rephrase": triplet.rephrase,
        "image_rephrase": triplet.image_rephrase,
        "loc": triplet.loc,
        "m_loc": triplet.m_loc,
    }

    for name, prompt in members.items():
        if prompt.m.shape != (spec.d_img,) or prompt.x.shape != (spec.d_txt,):
            problems.append(f"{name}: feature dimensions do not match the world")
            continue
        if not (np.all(np.isfinite(prompt.m)) and np.all(np.isfinite(prompt.x))):
            problems.append(f"{name}: non-finite features")
        if not 0 <= prompt.y < spec.V:
            problems.append(f"{name}: answer out of range")
    if set(triplet.facts) != set(MEMBERS) or set(triplet.concepts) != set(MEMBERS):
        problems.append("facts or concepts missing for some member")
        return problems
    if problems:
        return problems

    if not 0 <= triplet.alt < spec.V:
        problems.append("alt: answer out of range")
    if triplet.alt == triplet.src.y:
        problems.append("alt equals original answer")

    for name, fact in triplet.facts.items():
        if not (0 <= fact.entity < spec.n_entities and 0 <= fact.attribute < spec.n_attributes):
            problems.append(f"{name}: fact ids outside world ranges")
            continue
        if fact.value != int(world.fact_table[fact.entity, fact.attribute]):
            problems.append(f"{name}: fact value disagrees with fact table")
        if members[name].y != fact.value:
            problems.append(f"{name}: answer disagrees with fact value")
        if triplet.concepts[name] != world.concepts(fact):
            problems.append(f"{name}: concept set disagrees with fact")
        if not triplet.concepts[name]:
            problems.append(f"{name}: empty concept set")

    tolerance = 1e-9
    for name in ("rephrase", "image_rephrase"):
        if triplet.facts[name] != triplet.facts["src"]:
            problems.append(f"{name}: k mismatch")
        if not (triplet.concepts[name] & triplet.concepts["src"]):
            problems.append(f"{name}: shares no concept with src")
        if semantic_distance(world, members[name], triplet.src) > world.epsilon + tolerance:
            problems.append(f"{name}: outside semantic neighborhood")

    for name in ("loc", "m_loc"):
        if triplet.facts[name] == triplet.facts["src"]:
            problems.append(f"{name}: k matches src")
        if members[name].y == triplet.src.y:
            problems.append(f"{name}: answer equals src answer")
        if semantic_distance(world, members[name], triplet.src) <= world.epsilon:
            problems.append(f"{name}: inside semantic neighborhood")
        shared = triplet.concepts[name] & triplet.concepts["src"]
        if triplet.shift == "easy" and shared:
            problems.append(f"{name}: easy shift shares concepts")
        if triplet.shift == "hard" and not shared:
            problems.append(f"{name}: hard shift shares no concept")
    if triplet.shift not in SHIFT_KINDS:
        problems.append(f"unknown shift kind '{triplet.shift}'")
    if np.any(triplet.loc.m):
        problems.append("loc: text-only prompt carries image features")
    return problems


def spurious_probe_accuracy(records: Sequence[EditTriplet], world: World, train_fraction: float = 0.5) -> float:
    """Held-out accuracy of a least-squares linear probe on the spurious dimensions only."""
    prompts = [p for r in records for p in (r.src, r.m_loc)]
    d_inv_img, d_inv_txt = world.spec.d_img_inv, world.spec.d_txt_inv
    X = np.array([np.concatenate([p.m[d_inv_img:], p.x[d_inv_txt:], [1.0]]) for p in prompts])
    y = np.array([p.y for p in prompts])
    split = int(len(prompts) * train_fraction)
    targets = np.eye(world.spec.V)[y[:split]]
    weights, *_ = np.linalg.lstsq(X[:split], targets, rcond=None)
    predicted = np.argmax(X[split:] @ weights, axis=1)
    return float(np.mean(predicted == y[split:]))


def summarize(records: Sequence[EditTriplet]) -> Dict[str, int]:
    counts = {kind: 0 for kind in SHIFT_KINDS}
    for record in records:
        counts[record.shift] = counts.get(record.shift, 0) + 1
    counts["total"] = len(records)
    return counts
