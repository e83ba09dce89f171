"""Ablation variants as transformations of a training config."""

from typing import Dict, List, Optional, Sequence, Tuple

from ..irm import TrainConfig
from ..risks import RiskWeights

VARIANTS = (
    "full",
    "naive",
    "no_rel",
    "no_loc",
    "no_gen",
    "no_tv",
    "fixed_lambda",
    "mmd_multi",
    "lr_primal",
    "lambda_depth",
)
FIXED_LAMBDA_SWEEP = (0.0001, 0.001, 0.005, 0.01)
LR_PRIMAL_SWEEP = (0.001, 0.01, 0.05, 0.1)
LAMBDA_DEPTH_SWEEP = (2, 3, 4, 5)
DEFAULT_FIXED_LAMBDA = 0.01

# variants that take a value; a bare tag expands to the whole sweep
SWEEPS: Dict[str, Tuple[float, ...]] = {
    "fixed_lambda": FIXED_LAMBDA_SWEEP,
    "lr_primal": LR_PRIMAL_SWEEP,
    "lambda_depth": LAMBDA_DEPTH_SWEEP,
}


def parse_variant(tag: str) -> Tuple[str, Optional[float]]:
    """Split ``fixed_lambda@0.01`` into its name and value."""
    name, _, value = tag.partition("@")
    if name not in VARIANTS:
        raise ValueError(f"unknown variant '{tag}'; expected one of {VARIANTS}")
    if value and name not in SWEEPS:
        raise ValueError(f"variant '{name}' takes no value")
    if not value:
        return name, None
    try:
        number = float(value)
    except ValueError as exc:
        raise ValueError(f"variant '{tag}' has a non-numeric value") from exc
    if number <= 0 or (name == "lambda_depth" and (number != int(number) or number < 2)):
        raise ValueError(f"variant '{tag}' is out of range")
    return name, number


def variant_config(cfg: TrainConfig, tag: str) -> TrainConfig:
    name, value = parse_variant(tag)
    weights = cfg.weights
    if name == "full":
        return cfg
    if name == "naive":
        return cfg.model_copy(
            update={
                "weights": RiskWeights(w_rel=weights.w_rel or 1.0, w_loc=0.0, w_gen=0.0),
                "lambda_mode": "fixed",
                "lambda_fixed": 0.0,
            }
        )
    if name in ("no_rel", "no_loc", "no_gen"):
        key = "w_" + name[3:]
        return cfg.model_copy(update={"weights": RiskWeights(**{**weights.model_dump(), key: 0.0})})
    if name == "no_tv":
        return cfg.model_copy(update={"lambda_mode": "fixed", "lambda_fixed": 0.0})
    if name == "fixed_lambda":
        return cfg.model_copy(
            update={"lambda_mode": "fixed", "lambda_fixed": DEFAULT_FIXED_LAMBDA if value is None else value}
        )
    if name == "lr_primal":
        return cfg if value is None else cfg.model_copy(update={"lr_primal": value})
    if name == "lambda_depth":
        if value is None:
            return cfg
        return cfg.model_copy(update={"lambda_mode": "adaptive", "lambda_depth": int(value)})
    return cfg.model_copy(update={"rephrase_mode": "multi"})


def expand_variants(tags: Sequence[str]) -> List[str]:
    """Replace a bare sweep tag (``fixed_lambda``, ``lr_primal``, ``lambda_depth``) with its sweep; order is kept."""
    expanded: List[str] = []
    for tag in tags:
        parse_variant(tag)
        if tag in SWEEPS:
            expanded.extend(f"{tag}@{v:g}" for v in SWEEPS[tag])
        else:
            expanded.append(tag)
    return expanded
