"""Block-level Kleene iteration (technique S) and its guided variant (technique G)."""

from __future__ import annotations

import time
from typing import Optional

from ..domains import AbstractValue
from ..ir import CfgAnalysisInfo
from .common import (BudgetExceeded, EngineConfig, InvariantMap, bottom, budget, order_key, top,
                     transfers)


class _Fixpoint:
    """Values at every block; iteration restricted to the ``enabled`` edges."""

    def __init__(self, info: CfgAnalysisInfo, domain: str, config: EngineConfig,
                 values: Optional[dict[int, AbstractValue]] = None):
        self.info = info
        self.cfg = info.cfg
        self.domain = domain
        self.config = config
        self.tc = transfers(info)
        self.X: dict[int, AbstractValue] = {}
        for b in self.cfg.blocks:
            self.X[b] = values[b] if values and b in values else bottom(domain, info, b)
        self.X[self.cfg.entry] = top(domain, info, self.cfg.entry)
        self.steps = 0
        self.limit = budget(info, config)

    def edge_image(self, a: int, b: int) -> AbstractValue:
        self.steps += 1
        if self.steps > self.limit:
            raise BudgetExceeded(f"more than {self.limit} transfer evaluations")
        xa = self.X[a]
        if xa.is_bottom():
            return bottom(self.domain, self.info, b)
        return xa.transfer(self.tc.get((a, b)))

    def incoming(self, b: int, enabled) -> AbstractValue:
        if b == self.cfg.entry:
            return top(self.domain, self.info, b)
        out = bottom(self.domain, self.info, b)
        for e in self.cfg.in_edges(b):
            if enabled is not None and (e.src, e.dst) not in enabled:
                continue
            out = out.join(self.edge_image(e.src, b))
        return out

    def run(self, enabled=None):
        for comp in self.info.scc_order:
            self._component(sorted(comp, key=lambda b: order_key(self.info, b)), enabled)

    def _component(self, comp: list[int], enabled):
        members = set(comp)
        pw = self.info.widening_points
        visits = {b: 0 for b in comp}
        work = list(comp)
        queued = set(comp)
        while work:
            b = min(work, key=lambda x: order_key(self.info, x))
            work.remove(b)
            queued.discard(b)
            new = self.incoming(b, enabled)
            old = self.X[b]
            if new.is_leq(old):
                continue
            joined = old.join(new)
            if b in pw:
                visits[b] += 1
                if visits[b] > self.config.widening_delay:
                    joined = old.widen(joined)
            self.X[b] = joined
            for s in self.cfg.succs(b):
                if s in members and s not in queued and (enabled is None or (b, s) in enabled):
                    work.append(s)
                    queued.add(s)
        if len(comp) > 1 or any(self.cfg.has_edge(b, b) for b in comp):
            self._narrow(comp, enabled)

    def _narrow(self, comp: list[int], enabled):
        saved = {b: self.X[b] for b in comp}
        for _ in range(self.config.narrowing_passes):
            for b in comp:
                self.X[b] = self.X[b].meet(self.incoming(b, enabled))
        # the descending sequence must stay a post-fixpoint, otherwise keep the ascending result
        for b in comp:
            if not self.incoming(b, enabled).is_leq(self.X[b]):
                self.X.update(saved)
                return


def _result(info, technique, domain, X, t0, steps) -> InvariantMap:
    inv = InvariantMap(info.cfg.name, technique, domain, info)
    for p in info.report_points:
        v = X[p]
        inv.disjuncts[p] = [] if v.is_bottom() else [v]
    inv.seconds = time.perf_counter() - t0
    inv.iterations = steps
    return inv


def classic_values(info: CfgAnalysisInfo, domain: str, config: EngineConfig = None,
                   enabled=None) -> dict[int, AbstractValue]:
    fp = _Fixpoint(info, domain, config or EngineConfig())
    fp.run(enabled)
    return fp.X


def analyze_classic(info: CfgAnalysisInfo, domain: str, config: EngineConfig = None) -> InvariantMap:
    """Standard abstract interpretation: widening at loop heads after a delay, then narrowing."""
    t0 = time.perf_counter()
    fp = _Fixpoint(info, domain, config or EngineConfig())
    fp.run()
    return _result(info, "s", domain, fp.X, t0, fp.steps)


def _enable(fp: _Fixpoint, enabled: set) -> bool:
    """Enable every edge reachable from the current values without crossing an edge whose
    image is empty. Newly reached blocks get the image as their first value."""
    grew = False
    work = sorted((b for b in fp.cfg.blocks if not fp.X[b].is_bottom()),
                  key=lambda b: order_key(fp.info, b))
    while work:
        a = work.pop(0)
        for e in fp.cfg.out_edges(a):
            k = (e.src, e.dst)
            if k in enabled:
                continue
            img = fp.edge_image(a, e.dst)
            if img.is_bottom():
                continue
            enabled.add(k)
            grew = True
            if fp.X[e.dst].is_bottom():
                fp.X[e.dst] = img
                work.append(e.dst)
    return grew


def analyze_guided(info: CfgAnalysisInfo, domain: str, config: EngineConfig = None) -> InvariantMap:
    """Guided static analysis: a sequence of classic analyses on growing sub-programs,
    each one only containing the edges found feasible so far."""
    t0 = time.perf_counter()
    config = config or EngineConfig()
    fp = _Fixpoint(info, domain, config)
    enabled: set = set()
    phases = 0
    while _enable(fp, enabled):
        phases += 1
        fp.run(frozenset(enabled))
    inv = _result(info, "g", domain, fp.X, t0, fp.steps)
    inv.diagnostics.append(f"{phases} phases")
    return inv
