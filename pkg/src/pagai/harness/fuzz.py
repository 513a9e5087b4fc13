"""Randomized soundness check: concrete executions must stay inside the invariants."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from math import lcm
from typing import Optional

import numpy as np

from ..engines import InvariantMap
from ..frontend.cfg import BinOp, Cfg, Havoc, expr_vars
from ..frontend.interp import random_chooser, simulate
from ..ir import CfgAnalysisInfo
from ..linear import EQ

LO, HI = -1000, 1000
MAX_STEPS = 100_000


@dataclass
class CrossingStates:
    """Distinct concrete states seen at each report point (over the point's dimensions)."""
    states: dict[int, set[tuple]] = field(default_factory=dict)
    runs: int = 0
    truncated: int = 0
    deterministic: bool = False


_CACHE: dict[tuple, tuple[Cfg, CrossingStates]] = {}


def live_havocs(cfg: Cfg) -> list[str]:
    """Havoc definitions whose value is read somewhere (others cannot influence a run)."""
    used: set[str] = set()
    for blk in cfg.blocks.values():
        for p in blk.phis:
            used |= {a for a in p.args.values() if isinstance(a, str)}
        for d in blk.defs:
            used |= expr_vars(d.rhs)
        used |= set(blk.observed)
    for e in cfg.edges:
        if e.guard is not None:
            used |= expr_vars(e.guard.left) | expr_vars(e.guard.right)
    out = []
    for blk in cfg.blocks.values():
        for d in blk.defs:
            if d.target in used and _has_havoc(d.rhs):
                out.append(d.target)
    return out


def _has_havoc(e) -> bool:
    if isinstance(e, Havoc):
        return True
    if isinstance(e, BinOp):
        return _has_havoc(e.left) or _has_havoc(e.right)
    return False


def collect_states(info: CfgAnalysisInfo, trials: int, seed: int) -> CrossingStates:
    """Run ``trials`` seeded executions (cached per graph, trial count and seed)."""
    cfg = info.cfg
    key = (id(cfg), trials, seed)
    hit = _CACHE.get(key)
    if hit is not None and hit[0] is cfg:
        return hit[1]
    points = info.report_points
    dims = {p: info.dims[p] for p in points}
    out = CrossingStates({p: set() for p in points})

    def visit(b, env):
        out.states[b].add(tuple(env[v] for v in dims[b]))

    rng = random.Random(seed)
    out.deterministic = not live_havocs(cfg)
    n = 1 if out.deterministic else trials
    for _ in range(n):
        tr = simulate(cfg, random_chooser(rng, LO, HI), MAX_STEPS, points, on_visit=visit,
                      keep_path=False)
        out.runs += 1
        if tr.outcome.kind == "cap":
            out.truncated += 1  # the prefix was still checked
    _CACHE[key] = (cfg, out)
    return out


def _as_int_matrix(states: list[tuple], ndims: int) -> Optional[tuple[np.ndarray, int]]:
    """States scaled to an exact int64 matrix (with the common denominator), if small."""
    den = 1
    for s in states:
        for x in s:
            if isinstance(x, Fraction) and x.denominator != 1:
                den = lcm(den, x.denominator)
                if den > 1 << 12:
                    return None
    rows = []
    for s in states:
        row = []
        for x in s:
            v = x * den
            v = v.numerator if isinstance(v, Fraction) else int(v)
            if abs(v) >= 1 << 40:
                return None
            row.append(v)
        rows.append(row)
    return np.array(rows, dtype=np.int64).reshape(len(states), ndims), den


def _inside(value, dims: list[str], states: list[tuple]) -> np.ndarray:
    """Boolean mask: which states lie in the (non-disjunctive) value."""
    n = len(states)
    if value.is_bottom():
        return np.zeros(n, dtype=bool)
    cons = value.to_constraints()
    idx = {v: i for i, v in enumerate(dims)}
    mat = _as_int_matrix(states, len(dims)) if dims else None
    small = mat is not None and all(
        abs(k) < 1 << 16 and abs(c.expr.const) < 1 << 40
        for c in cons for k in c.expr.coeffs.values())
    if small:
        X, den = mat
        ok = np.ones(n, dtype=bool)
        for c in cons:
            k = np.zeros(len(dims), dtype=np.int64)
            for v, a in c.expr.coeffs.items():
                k[idx[v]] = int(a)
            lhs = X @ k + int(c.expr.const) * den
            ok &= (lhs == 0) if c.kind == EQ else (lhs <= 0)
        return ok
    return np.array([all(c.holds(dict(zip(dims, s))) for c in cons) for s in states], dtype=bool)


def violations(inv: InvariantMap, states: CrossingStates) -> list[tuple[int, tuple]]:
    """Crossing states outside every disjunct of their point's invariant."""
    out = []
    for p, seen in sorted(states.states.items()):
        if not seen:
            continue
        dims = list(inv.info.dims[p])
        ordered = sorted(seen)
        mask = np.zeros(len(ordered), dtype=bool)
        for d in inv.disjuncts.get(p, []):
            mask |= _inside(d, dims, ordered)
        out.extend((p, s) for s, m in zip(ordered, mask) if not m)
    return out


def soundness_fuzz(inv: InvariantMap, trials: int = 10_000, seed: int = 0) -> int:
    """Number of distinct (point, state) crossings that escape the invariant map.

    Executions draw every input and nondeterministic value uniformly from [-1000, 1000]
    (reals are quarter-integers half of the time) and stop after 10^5 blocks.
    """
    return len(violations(inv, collect_states(inv.info, trials, seed)))
