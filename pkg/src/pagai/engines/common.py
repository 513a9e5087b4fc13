"""Shared engine data: configuration, invariant maps and cached transfer functions."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from ..domains import AbstractValue, make
from ..ir import CfgAnalysisInfo, ParallelAssign, block_transfer

TECHNIQUES = ("s", "g", "pf", "gpf", "dis")
TECHNIQUE_LABELS = {"s": "S", "g": "G", "pf": "PF", "gpf": "G+PF", "dis": "DIS"}


class BudgetExceeded(RuntimeError):
    """The iteration budget (a termination safeguard) was exhausted."""


@dataclass
class EngineConfig:
    widening_delay: int = 2
    narrowing_passes: int = 2
    max_disjuncts: int = 5
    repair_cap: int = 50
    budget_factor: int = 1000


@dataclass
class InvariantMap:
    """Invariants at the report points of one function (analysis points and exit).

    ``disjuncts[p]`` is the list of abstract values at ``p`` (one element except for
    the disjunctive engine; empty for an unreachable point).
    """
    function: str
    technique: str
    domain: str
    info: CfgAnalysisInfo
    disjuncts: dict[int, list[AbstractValue]] = field(default_factory=dict)
    seconds: float = 0.0
    downgraded: bool = False
    diagnostics: list[str] = field(default_factory=list)
    iterations: int = 0

    @property
    def points(self) -> list[int]:
        return self.info.report_points

    def value(self, p: int) -> AbstractValue:
        """Joined value at ``p``."""
        ds = self.disjuncts.get(p, [])
        dims = self.info.dims[p]
        out = make(self.domain, dims, "bottom")
        for d in ds:
            out = out.join(d)
        return out

    def constraint_sets(self, p: int) -> list[list]:
        """Disjunct constraint lists for SMT ([] when unreachable)."""
        return [d.to_constraints() for d in self.disjuncts.get(p, []) if not d.is_bottom()]

    def contains(self, p: int, env) -> bool:
        return any(d.contains(env) for d in self.disjuncts.get(p, []))


class TransferCache:
    """Parallel assignments of edges and paths, computed once per analysis info."""

    def __init__(self, info: CfgAnalysisInfo):
        self.info = info
        self.cache: dict[tuple[int, ...], ParallelAssign] = {}

    def get(self, path) -> ParallelAssign:
        key = tuple(path)
        pa = self.cache.get(key)
        if pa is None:
            pa = block_transfer(self.info, key)
            self.cache[key] = pa
        return pa


_CACHES: dict[int, tuple[CfgAnalysisInfo, TransferCache]] = {}


def transfers(info: CfgAnalysisInfo) -> TransferCache:
    entry = _CACHES.get(id(info))
    if entry is None or entry[0] is not info:
        entry = (info, TransferCache(info))
        _CACHES[id(info)] = entry
    return entry[1]


def order_key(info: CfgAnalysisInfo, b: int) -> tuple[int, int]:
    return (info.scc_index[b], b)


def bottom(domain: str, info: CfgAnalysisInfo, b: int) -> AbstractValue:
    return make(domain, info.dims[b], "bottom")


def top(domain: str, info: CfgAnalysisInfo, b: int) -> AbstractValue:
    return make(domain, info.dims[b], "top")


def budget(info: CfgAnalysisInfo, config: EngineConfig) -> int:
    return config.budget_factor * len(info.cfg.blocks)


def same_scc(info: CfgAnalysisInfo, a: int, b: int) -> bool:
    return info.scc_index[a] == info.scc_index[b] and _cyclic(info, b)


def _cyclic(info: CfgAnalysisInfo, b: int) -> bool:
    comp = info.scc_order[info.scc_index[b]]
    return len(comp) > 1 or info.cfg.has_edge(b, b)


__all__ = ["BudgetExceeded", "EngineConfig", "InvariantMap", "TECHNIQUES", "TECHNIQUE_LABELS",
           "TransferCache", "transfers", "Optional"]
