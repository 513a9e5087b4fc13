"""Numerical abstract domains: intervals (box), octagons (oct) and polyhedra (pk)."""

from .base import AbstractValue, DimensionError
from .box import Box
from .octagon import Octagon, oct_close
from .polyhedra import MAX_DIMS, Polyhedron

DOMAINS = {"box": Box, "oct": Octagon, "pk": Polyhedron}


def make(domain: str, dims, which: str = "top") -> AbstractValue:
    cls = DOMAINS[domain]
    if which == "top":
        return cls.top(list(dims))
    if which == "bottom":
        return cls.bottom(list(dims))
    raise ValueError(f"expected top or bottom, got {which!r}")


__all__ = ["AbstractValue", "Box", "DOMAINS", "DimensionError", "MAX_DIMS", "Octagon",
           "Polyhedron", "make", "oct_close"]
