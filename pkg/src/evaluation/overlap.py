"""Histogram overlap of source and rephrase embeddings along two projections."""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import structlog

from ..model import EditDelta, PromptBatch, ToyModel

logger = structlog.get_logger(__name__)

DEFAULT_BINS = 32


@dataclass
class OverlapReport:
    """Overlap coefficients β in [0, 1] per projection axis."""

    beta_x: float
    beta_y: float
    axes: np.ndarray = field(repr=False, default_factory=lambda: np.zeros((2, 0)))
    bins: int = DEFAULT_BINS

    @property
    def mean(self) -> float:
        return 0.5 * (self.beta_x + self.beta_y)

    def to_dict(self) -> dict:
        return {"beta_x": self.beta_x, "beta_y": self.beta_y, "bins": self.bins, "axes": self.axes.tolist()}


def principal_axes(pooled: np.ndarray, k: int = 2) -> np.ndarray:
    """Top-``k`` principal directions of ``pooled`` as rows; missing directions are zero."""
    centred = pooled - pooled.mean(axis=0)
    _, _, vt = np.linalg.svd(centred, full_matrices=False)
    axes = np.zeros((k, pooled.shape[1]))
    rows = min(k, vt.shape[0])
    axes[:rows] = vt[:rows]
    # sign convention: largest component positive
    for row in axes:
        if np.any(row):
            pivot = np.argmax(np.abs(row))
            if row[pivot] < 0:
                row *= -1.0
    return axes


def histogram_overlap(p: np.ndarray, q: np.ndarray, bins: int = DEFAULT_BINS) -> float:
    """Σ_b min(p_b, q_b) over equal-width bins spanning the pooled range."""
    lo = float(min(p.min(), q.min()))
    hi = float(max(p.max(), q.max()))
    if not hi > lo:
        return 1.0
    p_counts, _ = np.histogram(p, bins=bins, range=(lo, hi))
    q_counts, _ = np.histogram(q, bins=bins, range=(lo, hi))
    return float(np.sum(np.minimum(p_counts / len(p), q_counts / len(q))))


def overlap_beta(
    Z_src: np.ndarray,
    Z_gen: np.ndarray,
    axes: Optional[np.ndarray] = None,
    bins: int = DEFAULT_BINS,
) -> OverlapReport:
    Z_src = np.atleast_2d(np.asarray(Z_src, dtype=np.float64))
    Z_gen = np.atleast_2d(np.asarray(Z_gen, dtype=np.float64))
    if len(Z_src) == 0 or len(Z_gen) == 0:
        raise ValueError("overlap needs non-empty embedding sets")
    if axes is None:
        axes = principal_axes(np.vstack([Z_src, Z_gen]))
    axes = np.atleast_2d(np.asarray(axes, dtype=np.float64))
    if axes.shape != (2, Z_src.shape[1]):
        raise ValueError(f"axes must have shape (2, {Z_src.shape[1]}), got {axes.shape}")
    betas = [histogram_overlap(Z_src @ a, Z_gen @ a, bins) for a in axes]
    return OverlapReport(beta_x=betas[0], beta_y=betas[1], axes=axes, bins=bins)


DeltaOrPerRecord = Union[Optional[EditDelta], Sequence[EditDelta]]


def embeddings(model: ToyModel, delta: DeltaOrPerRecord, triplets: Sequence) -> Tuple[np.ndarray, np.ndarray]:
    """Last hidden states of source and rephrase prompts under the edited model.

    ``delta`` is one edit for every record or a list with each record's own edit.
    """
    if isinstance(delta, (list, tuple)):
        if len(delta) != len(triplets):
            raise ValueError(f"{len(delta)} edits for {len(triplets)} records")
        pairs = [embeddings(model, d, [t]) for d, t in zip(delta, triplets)]
        return np.vstack([p[0] for p in pairs]), np.vstack([p[1] for p in pairs])
    src = model.last_hidden(delta, PromptBatch.from_prompts([t.src for t in triplets]))
    rephrase = model.last_hidden(delta, PromptBatch.from_prompts([t.rephrase for t in triplets]))
    return src, rephrase


def edited_overlap(model: ToyModel, delta: DeltaOrPerRecord, triplets: Sequence) -> OverlapReport:
    return overlap_beta(*embeddings(model, delta, triplets))


def dump_embeddings(
    model: ToyModel, delta: DeltaOrPerRecord, triplets: Sequence, path: Union[str, Path]
) -> Tuple[Path, OverlapReport]:
    """Write src/rephrase hidden states as CSV and the overlap report beside it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    src, rephrase = embeddings(model, delta, triplets)
    ids = [t.record_id for t in triplets]
    columns = [f"z_{i}" for i in range(src.shape[1])]
    frames = []
    for split, Z in (("src", src), ("rephrase", rephrase)):
        frame = pd.DataFrame(Z, columns=columns)
        frame.insert(0, "record_id", ids)
        frame.insert(0, "split", split)
        frames.append(frame)
    pd.concat(frames, ignore_index=True).to_csv(path, index=False)

    report = overlap_beta(src, rephrase)
    overlap_path = path.with_name(f"{path.stem}_overlap.json")
    overlap_path.write_text(json.dumps(report.to_dict(), indent=2), encoding="utf-8")
    logger.info("embeddings dumped", path=str(path), beta_x=report.beta_x, beta_y=report.beta_y)
    return path, report
