"""Heterogeneous-attention policy learning for the single-vehicle pickup-and-delivery problem."""

from pdpha.instances import GeneratorConfig, Instance, generate, load_instances, save_instances
from pdpha.env import RouteEvaluation, State, initial_state, mask, route_objective, step, validate_route

__version__ = "0.1.0"

__all__ = [
    "GeneratorConfig",
    "Instance",
    "RouteEvaluation",
    "State",
    "generate",
    "initial_state",
    "load_instances",
    "mask",
    "route_objective",
    "save_instances",
    "step",
    "validate_route",
]
