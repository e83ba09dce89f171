"""Synthetic fact world: prototypes, fact table and spurious directions."""

from dataclasses import dataclass
from typing import FrozenSet, Optional, Tuple

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, Field, model_validator

logger = structlog.get_logger(__name__)

MAX_DRAWS = 100


class WorldSpec(BaseModel):
    """Parameters of a generated world.

    ``epsilon`` is the semantic radius; when left unset it resolves to 0.3 times
    the minimum distance between distinct fact prototypes.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    n_entities: int = Field(24, ge=1)
    n_attributes: int = Field(6, ge=1)
    V: int = Field(16, ge=2)
    d_img: int = Field(16, gt=0)
    d_txt: int = Field(16, gt=0)
    d_spurious: int = Field(4, ge=1)
    epsilon: Optional[float] = Field(None, ge=0.0)
    spurious_strength: float = Field(0.8, ge=0.0, le=1.0)
    noise: float = Field(0.05, ge=0.0)
    seed: int = 0

    @model_validator(mode="after")
    def _room_for_invariant_dims(self) -> "WorldSpec":
        if self.d_spurious >= min(self.d_img, self.d_txt):
            raise ValueError("d_spurious must leave invariant dimensions in both modalities")
        return self

    @property
    def d_img_inv(self) -> int:
        return self.d_img - self.d_spurious

    @property
    def d_txt_inv(self) -> int:
        return self.d_txt - self.d_spurious


@dataclass(frozen=True)
class FactTuple:
    """Atomic factual content: (entity, attribute, value)."""

    entity: int
    attribute: int
    value: int

    def key(self) -> Tuple[int, int]:
        return self.entity, self.attribute

    def as_list(self) -> list:
        return [self.entity, self.attribute, self.value]


@dataclass
class World:
    """Everything a generator needs to emit prompts for a :class:`WorldSpec`."""

    spec: WorldSpec
    img_entity: np.ndarray
    txt_entity: np.ndarray
    txt_attribute: np.ndarray
    spurious_img: np.ndarray
    spurious_txt: np.ndarray
    fact_table: np.ndarray
    epsilon: float
    min_separation: float

    def fact(self, entity: int, attribute: int) -> FactTuple:
        return FactTuple(entity, attribute, int(self.fact_table[entity, attribute]))

    def concepts(self, fact: FactTuple) -> FrozenSet[int]:
        """Output-relevant concept ids: the entity and the attribute."""
        return frozenset({fact.entity, self.spec.n_entities + fact.attribute})

    def prototype(self, fact: FactTuple) -> np.ndarray:
        """Invariant generator features of a fact, image part then text part."""
        return np.concatenate(
            [self.img_entity[fact.entity], self.txt_entity[fact.entity] + self.txt_attribute[fact.attribute]]
        )

    def all_facts(self):
        for entity in range(self.spec.n_entities):
            for attribute in range(self.spec.n_attributes):
                yield self.fact(entity, attribute)


def _min_pairwise_distance(points: np.ndarray) -> float:
    if len(points) < 2:
        return float("inf")
    diff = points[:, None, :] - points[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=-1))
    return float(np.min(dist[np.triu_indices(len(points), k=1)]))


def generate_world(spec: WorldSpec) -> World:
    """Deterministic world for ``spec``; redraws prototypes until distinct facts are more than ε apart."""
    rng = np.random.default_rng(spec.seed)
    for attempt in range(MAX_DRAWS):
        img_entity = rng.normal(size=(spec.n_entities, spec.d_img_inv)) / np.sqrt(spec.d_img_inv)
        txt_entity = rng.normal(size=(spec.n_entities, spec.d_txt_inv)) / np.sqrt(spec.d_txt_inv)
        txt_attribute = rng.normal(size=(spec.n_attributes, spec.d_txt_inv)) / np.sqrt(spec.d_txt_inv)
        prototypes = np.array(
            [
                np.concatenate([img_entity[e], txt_entity[e] + txt_attribute[a]])
                for e in range(spec.n_entities)
                for a in range(spec.n_attributes)
            ]
        )
        separation = _min_pairwise_distance(prototypes)
        epsilon = 0.3 * separation if spec.epsilon is None else spec.epsilon
        if np.isinf(separation) or separation > epsilon:
            break
        logger.debug("prototype draw rejected", attempt=attempt, separation=separation, epsilon=epsilon)
    else:
        raise ValueError(f"could not separate facts by more than epsilon={spec.epsilon} in {MAX_DRAWS} draws")
    if np.isinf(epsilon):
        epsilon = 0.0 if spec.epsilon is None else spec.epsilon

    spurious_img = rng.normal(size=(spec.V, spec.d_spurious)) / np.sqrt(spec.d_spurious)
    spurious_txt = rng.normal(size=(spec.V, spec.d_spurious)) / np.sqrt(spec.d_spurious)
    fact_table = rng.integers(0, spec.V, size=(spec.n_entities, spec.n_attributes))

    world = World(
        spec=spec,
        img_entity=img_entity,
        txt_entity=txt_entity,
        txt_attribute=txt_attribute,
        spurious_img=spurious_img,
        spurious_txt=spurious_txt,
        fact_table=fact_table,
        epsilon=float(epsilon),
        min_separation=float(separation),
    )
    logger.info(
        "world generated",
        facts=spec.n_entities * spec.n_attributes,
        epsilon=round(world.epsilon, 6),
        separation=round(world.min_separation, 6),
    )
    return world
