"""Contextual values for positive-operator measurements and their weak limits."""

from .contextual import Observable, solve_minvar, solve_pinv
from .families import get_entry
from .operators import projector_from_vector, validate_density
from .weaklimit import conditioned_average, extrapolate_weak_limit, weak_value

__all__ = [
    "Observable",
    "conditioned_average",
    "extrapolate_weak_limit",
    "get_entry",
    "projector_from_vector",
    "solve_minvar",
    "solve_pinv",
    "validate_density",
    "weak_value",
]
