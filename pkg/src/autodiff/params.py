"""Named parameter collections tagged with the role they play in an edit run."""

from dataclasses import dataclass, field
from typing import Dict, Mapping

import numpy as np

from ..errors import GraphError
from .graph import Graph, Tensor

ROLES = ("base", "edit", "dual", "lambda")


@dataclass
class ParamSet:
    """Map from parameter name to float64 array, all sharing one role tag."""

    role: str
    values: Dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.role not in ROLES:
            raise ValueError(f"unknown parameter role '{self.role}'")
        self.values = {name: np.array(v, dtype=np.float64) for name, v in self.values.items()}

    def qualified(self, name: str) -> str:
        return f"{self.role}:{name}"

    def attach(self, graph: Graph) -> Dict[str, Tensor]:
        """Register every parameter as a leaf of ``graph``."""
        return {name: graph.leaf(self.qualified(name), value) for name, value in self.values.items()}

    def grads_from(self, grads: Mapping[str, Tensor]) -> Dict[str, np.ndarray]:
        """Pick this set's gradients out of a ``backward`` result."""
        out = {}
        for name in self.values:
            key = self.qualified(name)
            if key not in grads:
                raise GraphError(f"no gradient for '{key}'; was the set attached?")
            out[name] = grads[key].data
        return out

    def copy(self) -> "ParamSet":
        return ParamSet(self.role, {name: v.copy() for name, v in self.values.items()})

    def __len__(self) -> int:
        return len(self.values)

