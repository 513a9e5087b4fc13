"""SMT-driven iteration over the analysis points: path focusing (PF), its guided
variant (G+PF) and the disjunctive variant (DIS)."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

from ..domains import AbstractValue, make
from ..ir import CfgAnalysisInfo
from ..smt.encode import SectionFormula, check_growth, encode_section, model_to_path, _or
from ..smt.session import SolverInconclusive, SolverSession
from .common import (BudgetExceeded, EngineConfig, InvariantMap, budget, order_key, same_scc,
                     top, transfers)

_FORMULAS: dict[int, tuple[CfgAnalysisInfo, SectionFormula]] = {}


def section(info: CfgAnalysisInfo) -> SectionFormula:
    """Full (all edges enabled) formula of ``info``, built once."""
    hit = _FORMULAS.get(id(info))
    if hit is None or hit[0] is not info:
        hit = (info, encode_section(info))
        _FORMULAS[id(info)] = hit
    return hit[1]


def _metric(old: dict, new: dict) -> tuple:
    """Growth of a bounding box: (bounds that become infinite, dimensions whose interval
    grows, total finite widening)."""
    inf = grown = 0
    width = 0
    for v, (lo0, hi0) in old.items():
        lo1, hi1 = new[v]
        if lo1 != lo0 or hi1 != hi0:
            grown += 1
        if lo0 is not None and lo1 is None:
            inf += 1
        elif lo0 is not None:
            width += lo0 - lo1
        if hi0 is not None and hi1 is None:
            inf += 1
        elif hi0 is not None:
            width += hi1 - hi0
    return inf, grown, width


def _disjoint_dims(a: dict, b: dict) -> int:
    """Number of dimensions in which two bounding boxes do not meet."""
    n = 0
    for v, (lo0, hi0) in a.items():
        lo1, hi1 = b[v]
        if (hi0 is not None and lo1 is not None and lo1 > hi0) or \
                (hi1 is not None and lo0 is not None and lo0 > hi1):
            n += 1
    return n


@dataclass
class DisjunctivePolicy:
    """Chooses the disjunct receiving an image at a point.

    1. a disjunct already containing the image;
    2. among disjuncts whose bounding box meets the image's box in some dimension, the
       one disjoint from it in the fewest dimensions, then the one whose bounding box
       grows least when joined with the image;
    3. a new disjunct while fewer than ``max_disjuncts`` exist;
    4. otherwise the least-growing disjunct overall.
    """
    max_disjuncts: int = 5

    def route(self, disjuncts: list[AbstractValue], image: AbstractValue, limit: Optional[int] = None) -> int:
        limit = self.max_disjuncts if limit is None else limit
        live = [(j, d) for j, d in enumerate(disjuncts) if not d.is_bottom()]
        for j, d in live:
            if image.is_leq(d):
                return j
        if not live:
            return 0 if disjuncts else len(disjuncts)
        ib = image.bounds()
        ranked = []
        for j, d in live:
            db = d.bounds()
            apart = _disjoint_dims(db, ib)
            ranked.append((apart, _metric(db, d.join(image).bounds()), j))
        near = [r for r in ranked if r[0] < len(ib) or not ib]
        if near:
            return min(near)[-1]
        if len(disjuncts) < limit:
            return len(disjuncts)
        return min((m, j) for _, m, j in ranked)[-1]


@dataclass
class _Record:
    src: int
    i: int
    path: tuple[int, ...]
    q: int
    j: int


@dataclass
class _State:
    X: dict[int, list[AbstractValue]] = field(default_factory=dict)
    updates: dict[tuple[int, int], int] = field(default_factory=dict)
    records: dict[tuple, _Record] = field(default_factory=dict)


class _Engine:
    def __init__(self, info: CfgAnalysisInfo, domain: str, session: SolverSession,
                 config: EngineConfig, max_disjuncts: int):
        self.info = info
        self.domain = domain
        self.session = session
        self.config = config
        self.policy = DisjunctivePolicy(max_disjuncts)
        self.formula = section(info)
        self.tc = transfers(info)
        self.steps = 0
        self.limit = budget(info, config)
        self.points = info.report_points
        entry = info.cfg.entry
        self.state = _State({p: [] for p in self.points})
        self.state.X[entry] = [top(domain, info, entry)]

    @property
    def X(self):
        return self.state.X

    def cap(self, q: int) -> int:
        return self.policy.max_disjuncts if q in self.info.widening_points else 1

    def targets(self) -> dict[int, list]:
        return {q: [d.to_constraints() for d in self.X[q] if not d.is_bottom()]
                for q in self.points if q != self.info.cfg.entry}

    def sources(self) -> list[tuple[int, int]]:
        return [(p, i) for p in sorted(self.info.analysis_points, key=lambda b: order_key(self.info, b))
                for i in range(len(self.X.get(p, [])))]

    def query(self, p: int, i: int):
        d = self.X[p][i]
        if d.is_bottom():
            return None
        return check_growth(self.session, self.formula, p, [d.to_constraints()], self.targets())

    def image(self, p: int, i: int, path) -> AbstractValue:
        return self.X[p][i].transfer(self.tc.get(path))

    def tick(self):
        self.steps += 1
        if self.steps > self.limit:
            raise BudgetExceeded(f"more than {self.limit} growth iterations")

    def add(self, p: int, i: int, path, img: AbstractValue, widen: bool) -> tuple[int, int]:
        q = path[-1]
        ds = self.X[q]
        j = self.policy.route(ds, img, self.cap(q))
        if j == len(ds):
            ds.append(img)
        else:
            old = ds[j]
            new = old.join(img)
            # the delay counts updates per (path, disjunct): each path is joined a few times
            # before it widens; there are finitely many paths, so the ascent terminates
            key = (tuple(path), q, j)
            n = self.state.updates.get(key, 0) + 1
            self.state.updates[key] = n
            if (widen and q in self.info.widening_points and same_scc(self.info, p, q)
                    and n > self.config.widening_delay):
                new = old.widen(new)
            ds[j] = new
        rec = _Record(p, i, tuple(path), q, j)
        self.state.records[(p, i, rec.path, q, j)] = rec
        return q, j

    def ascend(self, widen=True, cap: Optional[int] = None) -> bool:
        """Grow until no growth query is satisfiable; False if ``cap`` updates did not suffice."""
        work = set(self.sources())
        done = 0
        while work:
            p, i = min(work, key=lambda s: (order_key(self.info, s[0]), s[1]))
            res = self.query(p, i)
            if res is None:
                work.discard((p, i))
                continue
            self.tick()
            done += 1
            if cap is not None and done > cap:
                return False
            img = self.image(p, i, res.path)
            q, j = self.add(p, i, res.path, img, widen)
            if q in self.info.analysis_points:
                work.add((q, j))
        return True

    def descend(self):
        """Narrowing over the recorded paths, then repair (without widening) up to a cap."""
        if self.config.narrowing_passes <= 0 or not self.state.records:
            return
        saved = {p: list(ds) for p, ds in self.X.items()}
        entry = self.info.cfg.entry
        for _ in range(self.config.narrowing_passes):
            acc: dict[tuple[int, int], AbstractValue] = {}
            for r in self.state.records.values():
                if r.i >= len(self.X[r.src]) or r.j >= len(self.X[r.q]):
                    continue
                self.tick()
                img = self.image(r.src, r.i, r.path)
                k = (r.q, r.j)
                acc[k] = img if k not in acc else acc[k].join(img)
            for q, ds in self.X.items():
                if q == entry:
                    continue
                for j, d in enumerate(ds):
                    new = acc.get((q, j))
                    ds[j] = d.meet(new) if new is not None else make(self.domain, d.dims, "bottom")
        if not self.ascend(widen=False, cap=self.config.repair_cap):
            self.X.clear()
            self.X.update(saved)

    def collapse(self):
        """Drop empty disjuncts."""
        for p in self.X:
            self.X[p] = [d for d in self.X[p] if not d.is_bottom()]


def _finish(eng: _Engine, technique: str, t0: float) -> InvariantMap:
    eng.collapse()
    inv = InvariantMap(eng.info.cfg.name, technique, eng.domain, eng.info)
    for p in eng.points:
        inv.disjuncts[p] = list(eng.X.get(p, []))
    inv.seconds = time.perf_counter() - t0
    inv.iterations = eng.steps
    return inv


def analyze_path_focusing(info: CfgAnalysisInfo, domain: str, session: SolverSession,
                          config: EngineConfig = None) -> InvariantMap:
    """Iteration over analysis points where each step follows one SMT-selected path."""
    t0 = time.perf_counter()
    eng = _Engine(info, domain, session, config or EngineConfig(), 1)
    eng.formula.load(session)
    eng.ascend()
    eng.descend()
    return _finish(eng, "pf", t0)


def analyze_disjunctive(info: CfgAnalysisInfo, domain: str, session: SolverSession,
                        config: EngineConfig = None) -> InvariantMap:
    """Path focusing with up to ``max_disjuncts`` disjuncts per widening point."""
    t0 = time.perf_counter()
    config = config or EngineConfig()
    eng = _Engine(info, domain, session, config, config.max_disjuncts)
    eng.formula.load(session)
    eng.ascend()
    eng.descend()
    return _finish(eng, "dis", t0)


def _discover(eng: _Engine, enabled: set) -> bool:
    """Enable the edges of every path that leaves a current value through a disabled edge."""
    f = eng.formula
    grew = False
    while True:
        disabled = [a for k, a in sorted(f.edge_act.items()) if k not in enabled]
        if not disabled:
            return grew
        found = False
        for p, i in eng.sources():
            d = eng.X[p][i]
            if d.is_bottom():
                continue
            sel = [f.node_act[("src", p)]] + [f"(not {f.node_act[('src', o)]})" for o in f.sources if o != p]
            status, model = eng.session.solve(sel + [f.source_formula(p, [d.to_constraints()]), _or(disabled)])
            if status == "unknown":
                raise SolverInconclusive(f"solver returned unknown on a discovery query from bb{p}")
            if status == "sat":
                path = model_to_path(f, model, p)
                enabled.update(zip(path, path[1:]))
                grew = found = True
                break
        if not found:
            return grew


def analyze_combined(info: CfgAnalysisInfo, domain: str, session: SolverSession,
                     config: EngineConfig = None) -> InvariantMap:
    """Guided path focusing: path focusing restricted to the edges discovered feasible so far,
    enlarged phase after phase."""
    t0 = time.perf_counter()
    eng = _Engine(info, domain, session, config or EngineConfig(), 1)
    f = eng.formula
    f.load(session)
    enabled: set = set()
    phases = 0
    while _discover(eng, enabled):
        phases += 1
        eng.state.updates.clear()
        session.push()
        try:
            for k, a in sorted(f.edge_act.items()):
                if k not in enabled:
                    session.assert_(f"(not {a})")
            eng.ascend()
            eng.descend()
        finally:
            session.pop()
    inv = _finish(eng, "gpf", t0)
    inv.diagnostics.append(f"{phases} phases")
    return inv
