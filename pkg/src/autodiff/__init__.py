"""Dense float64 tensors with reverse-mode and forward-tangent differentiation."""

from . import ops
from .checks import GradCheckReport, finite_diff_check
from .graph import Graph, Node, Tensor, backward, directional_derivative
from .params import ParamSet

__all__ = [
    'ops',
    'Graph',
    'Node',
    'Tensor',
    'backward',
    'directional_derivative',
    'finite_diff_check',
    'GradCheckReport',
    'ParamSet',
]
