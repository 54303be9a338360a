"""
Incremental matching of pattern sources against a circuit.

A match maps pattern gates one at a time, in pattern order, onto circuit
gates. The first pattern gate maps to the anchor. A later gate touching an
already-mapped wire can only map to the next gate on that concrete wire, so
consecutive pattern gates on a wire stay consecutive in the circuit. A gate
on fresh wires may map to any gate within `window` positions of the anchor.

Contexts are never mutated: extending one returns new contexts, so sibling
patterns can each continue from the same parent context.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Optional

from .circuit import Circuit, Gate
from .pattern import CircuitPattern, PatternGate

DEFAULT_WINDOW = 64
PARAM_TOL = 1e-9


@dataclass
class MatchStats:
    feasibility_checks: int = 0
    match_attempts: int = 0
    successes: int = 0

    def as_dict(self) -> dict:
        return {
            "feasibilityChecks": self.feasibility_checks,
            "matchAttempts": self.match_attempts,
            "successes": self.successes,
        }


@dataclass(frozen=True, eq=False)
class MatchingContext:
    qmap: dict[int, int] = field(default_factory=dict)  # abstract -> concrete qubit
    pmap: dict[int, float] = field(default_factory=dict)  # symbol -> value
    matched: tuple[int, ...] = ()  # concrete gate per matched pattern gate
    anchor: int = -1
    wire_last: dict[int, int] = field(default_factory=dict)  # concrete wire -> last matched gate

    def relabeled(self, qubit_map: dict[int, int], symbol_map: dict[int, int]) -> "MatchingContext":
        """Context in another labelling; maps go from new labels to this context's labels."""
        return MatchingContext(
            {a: self.qmap[b] for a, b in qubit_map.items() if b in self.qmap},
            {s: self.pmap[t] for s, t in symbol_map.items() if t in self.pmap},
            self.matched,
            self.anchor,
            self.wire_last,
        )


def _angle_close(a: float, b: float, tol: float = PARAM_TOL) -> bool:
    return abs(math.remainder(a - b, 2 * math.pi)) <= tol


def feasibility_check(
    c: Circuit, ctx: MatchingContext, sg: PatternGate, cg: int, stats: Optional[MatchStats] = None
) -> Optional[MatchingContext]:
    """Test one (pattern gate, circuit gate) pair; counts as one feasibility check.

    Returns the extended context when the pair is legal, else None.
    """
    if stats is not None:
        stats.feasibility_checks += 1
    g: Gate = c.gates[cg]
    if g.op != sg.op:
        return None
    pred = c.dag.pred[cg]
    image = set(ctx.qmap.values())
    qmap = dict(ctx.qmap)
    for k, a in enumerate(sg.qubits):
        q = g.qubits[k]
        if a in qmap:
            # mapped wire: must continue right after the last matched gate there
            if qmap[a] != q or ctx.wire_last.get(q, -1) != pred[k]:
                return None
        else:
            if q in image:
                return None
            qmap[a] = q
            image.add(q)
    pmap = ctx.pmap
    for expr, x in zip(sg.params, g.params):
        fresh = [s for s in expr.symbols if s not in pmap]
        if not fresh:
            if not _angle_close(expr.evaluate(pmap), x):
                return None
        elif len(fresh) == 1:
            s = fresh[0]
            pmap = dict(pmap)
            pmap[s] = (x - expr.partial(pmap, s)) / float(expr.coef(s))
        else:
            return None
    wire_last = dict(ctx.wire_last)
    for q in g.qubits:
        wire_last[q] = cg
    return MatchingContext(qmap, pmap, ctx.matched + (cg,), cg if ctx.anchor < 0 else ctx.anchor, wire_last)


def candidates(c: Circuit, ctx: MatchingContext, sg: PatternGate, window: int = DEFAULT_WINDOW) -> list[int]:
    for a in sg.qubits:
        if a in ctx.qmap:
            q = ctx.qmap[a]
            last = ctx.wire_last.get(q, -1)
            if last < 0:
                return []
            nxt = c.dag.next_on_wire(c, last, q)
            return [nxt] if nxt >= 0 else []
    if ctx.anchor < 0:
        return list(range(len(c.gates)))
    lo, hi = max(0, ctx.anchor - window), min(len(c.gates), ctx.anchor + window + 1)
    taken = set(ctx.matched)
    return [i for i in range(lo, hi) if i not in taken]


def extend(
    c: Circuit, ctx: MatchingContext, sg: PatternGate, stats: Optional[MatchStats] = None, window: int = DEFAULT_WINDOW
) -> list[MatchingContext]:
    out = []
    for cg in candidates(c, ctx, sg, window):
        ext = feasibility_check(c, ctx, sg, cg, stats)
        if ext is not None:
            out.append(ext)
    return out


def complete_matches(
    c: Circuit, gates, start: int, ctx: MatchingContext, stats: Optional[MatchStats] = None, window: int = DEFAULT_WINDOW
) -> Iterator[MatchingContext]:
    """Depth-first enumeration of contexts covering gates[start:], extending `ctx`."""
    if start == len(gates):
        yield ctx
        return
    for ext in extend(c, ctx, gates[start], stats, window):
        yield from complete_matches(c, gates, start + 1, ext, stats, window)


def matches_at(
    c: Circuit, src: CircuitPattern, anchor: int, stats: Optional[MatchStats] = None, window: int = DEFAULT_WINDOW
) -> Iterator[MatchingContext]:
    """All complete contexts whose first pattern gate maps to `anchor`, in DFS order."""
    if not src.gates:
        return
    first = feasibility_check(c, MatchingContext(), src.gates[0], anchor, stats)
    if first is None:
        return
    yield from complete_matches(c, src.gates, 1, first, stats, window)


def match(
    c: Circuit,
    src: CircuitPattern,
    start: int | MatchingContext = 0,
    stats: Optional[MatchStats] = None,
    window: int = DEFAULT_WINDOW,
) -> Optional[MatchingContext]:
    """First complete match of `src`.

    `start` is either an anchor cursor (anchors are tried in canonical
    order from there) or a parent context covering a prefix of `src`.
    """
    if isinstance(start, MatchingContext):
        if stats is not None:
            stats.match_attempts += 1
        for ctx in complete_matches(c, src.gates, len(start.matched), start, stats, window):
            if stats is not None:
                stats.successes += 1
            return ctx
        return None
    for anchor in range(start, len(c.gates)):
        if stats is not None:
            stats.match_attempts += 1
        for ctx in matches_at(c, src, anchor, stats, window):
            if stats is not None:
                stats.successes += 1
            return ctx
    return None


def convex(c: Circuit, ctx: MatchingContext) -> bool:
    """No DAG path leaves the matched set and re-enters it."""
    matched = set(ctx.matched)
    if len(matched) <= 1:
        return True
    hi = max(matched)
    succ = c.dag.succ
    frontier = [s for i in matched for s in succ[i] if s >= 0 and s not in matched]
    seen = set(frontier)
    while frontier:
        i = frontier.pop()
        for s in succ[i]:
            if s < 0 or s > hi or s in seen:
                continue
            if s in matched:
                return False
            seen.add(s)
            frontier.append(s)
    return True


def matched_subcircuit(c: Circuit, ctx: MatchingContext) -> Circuit:
    return Circuit.from_gates([c.gates[i] for i in sorted(ctx.matched)], c.num_qubits)
