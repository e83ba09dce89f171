"""Exact-match editing metrics: reliability, generality and text/multimodal locality."""

from dataclasses import asdict, dataclass, fields
from typing import Any, Dict, Mapping, Optional, Sequence

import numpy as np
import structlog

from ..model import EditDelta, PromptBatch, ToyModel

logger = structlog.get_logger(__name__)

SPLITS = ("rel", "gen", "gen_acc", "t_loc", "m_loc")


@dataclass
class MetricsReport:
    """Match counts per split; every fraction is exactly ``matches / n``.

    A split with no prompts reports ``None`` rather than 0. ``beta`` is the mean
    src/rephrase embedding overlap of the evaluated records, when computed.
    """

    rel_matches: int = 0
    rel_n: int = 0
    gen_matches: int = 0
    gen_n: int = 0
    gen_acc_matches: int = 0
    t_loc_matches: int = 0
    t_loc_n: int = 0
    m_loc_matches: int = 0
    m_loc_n: int = 0
    beta: Optional[float] = None
    seed: Optional[int] = None
    config_hash: Optional[str] = None
    T: int = 1
    variant: str = "full"
    status: str = "ok"
    error: Optional[str] = None

    @staticmethod
    def _fraction(matches: int, n: int) -> Optional[float]:
        return matches / n if n else None

    @property
    def rel(self) -> Optional[float]:
        return self._fraction(self.rel_matches, self.rel_n)

    @property
    def gen(self) -> Optional[float]:
        return self._fraction(self.gen_matches, self.gen_n)

    @property
    def gen_acc(self) -> Optional[float]:
        return self._fraction(self.gen_acc_matches, self.gen_n)

    @property
    def t_loc(self) -> Optional[float]:
        return self._fraction(self.t_loc_matches, self.t_loc_n)

    @property
    def m_loc(self) -> Optional[float]:
        return self._fraction(self.m_loc_matches, self.m_loc_n)

    def merge(self, other: "MetricsReport") -> "MetricsReport":
        """Pool the counts of two reports over disjoint records."""
        counts = {
            f.name: getattr(self, f.name) + getattr(other, f.name)
            for f in fields(self)
            if f.name.endswith(("_matches", "_n"))
        }
        return MetricsReport(**counts, seed=self.seed, config_hash=self.config_hash, T=self.T, variant=self.variant)

    @property
    def failed(self) -> bool:
        return self.status != "ok"

    def fractions(self) -> Dict[str, Optional[float]]:
        return {split: getattr(self, split) for split in SPLITS}

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data.update(self.fractions())
        return data

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "MetricsReport":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in known})


def _predict(model: ToyModel, delta: Optional[EditDelta], prompts) -> np.ndarray:
    return model.predict(delta, PromptBatch.from_prompts(prompts))


def compute_metrics(
    model: ToyModel,
    delta: Optional[EditDelta],
    triplets: Sequence,
    rephrase_mode: str = "single",
    **metadata: Any,
) -> MetricsReport:
    """Metrics of ``delta`` on ``triplets`` at the neutral environment ω = 0.

    Gen compares the edited model's answer on each rephrase with its answer on
    the source prompt; ``gen_acc`` compares it with the edit target instead.
    """
    report = MetricsReport(**metadata)
    if not triplets:
        return report

    edited = _predict(model, delta, [t.src for t in triplets])
    targets = np.array([t.alt for t in triplets])
    report.rel_matches = int(np.sum(edited == targets))
    report.rel_n = len(triplets)

    owners = [i for i, t in enumerate(triplets) for _ in t.rephrases(rephrase_mode)]
    rephrased = _predict(model, delta, [p for t in triplets for p in t.rephrases(rephrase_mode)])
    report.gen_matches = int(np.sum(rephrased == edited[owners]))
    report.gen_acc_matches = int(np.sum(rephrased == targets[owners]))
    report.gen_n = len(owners)

    for split in ("loc", "m_loc"):
        prompts = [getattr(t, split) for t in triplets]
        agree = int(np.sum(_predict(model, delta, prompts) == _predict(model, None, prompts)))
        prefix = "t_loc" if split == "loc" else "m_loc"
        setattr(report, f"{prefix}_matches", agree)
        setattr(report, f"{prefix}_n", len(prompts))

    logger.debug("metrics computed", records=len(triplets), **report.fractions())
    return report
