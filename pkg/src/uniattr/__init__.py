"""Uniform attractors of nonautonomous processes, computed on point clouds."""

from .metric_sets import EUCLIDEAN, MetricSpec, PointCloud, covering_diameter, eps_net, hausdorff, semidist
from .symbol_space import CircleHull, FiniteShift, TorusHull
from .models import LinearModel, WaveModel
from .process_core import DivergenceError, ProcessSpec, evolve, propagate

__all__ = [
    "EUCLIDEAN", "MetricSpec", "PointCloud", "covering_diameter", "eps_net", "hausdorff", "semidist",
    "CircleHull", "FiniteShift", "TorusHull", "LinearModel", "WaveModel",
    "DivergenceError", "ProcessSpec", "evolve", "propagate",
]
__version__ = "0.1.0"
