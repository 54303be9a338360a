"""
Rule scheduling over the pattern tree, rewriting, and the multi-pass driver.

Each pass scans anchors in canonical order. At an anchor every scheduling
tree is walked depth-first. A node continues from its parent's matching
contexts instead of re-matching the shared prefix. A subtree whose prefix
fails to match is skipped entirely. Among the valid rules that matched
(convexly), the one with the longest source wins, ties going to the
smallest rule id.

Contexts of a node are enumerated lazily and memoized. Node contexts extend
parent contexts in the same depth-first order a standalone match of the
node's source would use. So the selected rewrite does not depend on the
tree shape, and neither does the optimized circuit. Only the number of
feasibility checks does.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

from .circuit import Circuit, Gate, canonicalize
from .matching import (
    DEFAULT_WINDOW,
    MatchingContext,
    MatchStats,
    complete_matches,
    convex,
    matches_at,
)
from .pattern import TransformationRule, instantiate
from .preprocess import float_rz
from .semantics import MAX_QUBITS, verify_equivalence
from .tree import SchedNode, SchedTree, build_sched_tree, candidate_count, generate_prefix_rules, prefix_count


class RewriteError(RuntimeError):
    pass


@dataclass
class OptimizeConfig:
    max_passes: int = 8
    prefix_n: Optional[int] = None  # explicit prefix-rule count; wins over prefix_pct
    prefix_pct: float = 100.0  # percentage of prefix-rule candidates
    window: int = DEFAULT_WINDOW
    seed: int = 0
    verify_each_rewrite: bool = False
    preprocess: str = "rz-group"  # or "none"
    literal_walk: bool = False  # stop at the first matching child, as a plain greedy descent

    def __post_init__(self):
        if self.max_passes < 1:
            raise ValueError("max_passes must be >= 1")
        if self.preprocess not in ("rz-group", "none"):
            raise ValueError(f"unknown preprocess mode {self.preprocess!r}")

    def resolve_prefix_n(self, rules: Sequence[TransformationRule]) -> int:
        if self.prefix_n is not None:
            return self.prefix_n
        return prefix_count(self.prefix_pct, candidate_count(rules))


@dataclass
class OptimizeReport:
    gate_count_before: int
    gate_count_after: int = 0
    rewrites: list[tuple[str, int]] = field(default_factory=list)
    passes: int = 0
    stats: MatchStats = field(default_factory=MatchStats)
    wall_time_ns: int = 0
    with_tree: bool = True
    prefix_rules: int = 0

    def to_dict(self) -> dict:
        """Stable report schema; only `wallTimeNanos` varies between equal runs."""
        return {
            "gateCountBefore": self.gate_count_before,
            "gateCountAfter": self.gate_count_after,
            "rewritesApplied": [{"rule": rid, "anchor": a} for rid, a in self.rewrites],
            "passCount": self.passes,
            "stats": self.stats.as_dict(),
            "wallTimeNanos": self.wall_time_ns,
            "withTree": self.with_tree,
            "prefixRules": self.prefix_rules,
        }


@dataclass
class Selection:
    rule: TransformationRule
    node: SchedNode
    ctx: MatchingContext  # in the node's normalized labels

    @property
    def key(self):
        return (-len(self.node.pattern), self.rule.id)

    def rule_context(self) -> MatchingContext:
        """The matching context expressed in the rule's own qubit/symbol labels."""
        qm, sm = self.node.relabel[self.rule.id]
        return self.ctx.relabeled(qm, sm)


class _Stream:
    """Memoized view over a lazily produced sequence of contexts."""

    __slots__ = ("_it", "items", "done")

    def __init__(self, it: Iterator[MatchingContext]):
        self._it = it
        self.items: list[MatchingContext] = []
        self.done = False

    def get(self, i: int) -> Optional[MatchingContext]:
        while len(self.items) <= i and not self.done:
            try:
                self.items.append(next(self._it))
            except StopIteration:
                self.done = True
        return self.items[i] if i < len(self.items) else None

    def __iter__(self):
        i = 0
        while (x := self.get(i)) is not None:
            yield x
            i += 1


def _node_stream(c, node: SchedNode, parent: Optional[_Stream], anchor, stats, window) -> _Stream:
    if parent is None:
        return _Stream(matches_at(c, node.pattern, anchor, stats, window))
    start = len(node.parent.pattern)
    gates = node.pattern.gates
    return _Stream(x for p in parent for x in complete_matches(c, gates, start, p, stats, window))


def _first_convex(c: Circuit, stream: _Stream) -> Optional[MatchingContext]:
    for ctx in stream:
        if convex(c, ctx):
            return ctx
    return None


def schedule_tree_walk(
    c: Circuit,
    root: SchedNode,
    stats: Optional[MatchStats] = None,
    anchor: Optional[int] = None,
    window: int = DEFAULT_WINDOW,
    literal: bool = False,
) -> Optional[Selection]:
    """Best valid rule of `root`'s subtree matching at `anchor`.

    With `anchor=None` anchors are scanned from 0 and the first anchor with
    a result wins. Prefix nodes are never returned.
    """
    stats = stats if stats is not None else MatchStats()
    if anchor is None:
        for a in range(len(c.gates)):
            sel = schedule_tree_walk(c, root, stats, a, window, literal)
            if sel is not None:
                return sel
        return None
    if literal:
        return _literal_walk(c, root, stats, anchor, window)
    best: Optional[Selection] = None
    stack: list[tuple[SchedNode, Optional[_Stream]]] = [(root, None)]
    while stack:
        node, parent_stream = stack.pop()
        stats.match_attempts += 1
        stream = _node_stream(c, node, parent_stream, anchor, stats, window)
        if node.rules:
            ctx = _first_convex(c, stream)
            if ctx is not None:
                stats.successes += 1
                sel = Selection(node.rules[0], node, ctx)
                if best is None or sel.key < best.key:
                    best = sel
        if node.children and stream.get(0) is not None:
            stack.extend((child, stream) for child in reversed(node.children))
    return best


def _literal_walk(c, root, stats, anchor, window) -> Optional[Selection]:
    # non-recursive greedy descent: child on success, next sibling on failure
    found: Optional[Selection] = None
    r: Optional[SchedNode] = root
    parent_stream: Optional[_Stream] = None
    while r is not None:
        stats.match_attempts += 1
        stream = _node_stream(c, r, parent_stream, anchor, stats, window)
        ctx = _first_convex(c, stream) if r.rules else stream.get(0)
        if ctx is not None:
            stats.successes += 1
            found = Selection(r.rules[0], r, ctx) if r.rules else None
            if r.first_child is None:
                break
            parent_stream, r = stream, r.first_child
        else:
            r = r.next_sibling if r is not root else None
    return found


def select_rewrite(
    c: Circuit, roots: Sequence[SchedNode], anchor: int, stats: MatchStats, window: int = DEFAULT_WINDOW, literal: bool = False
) -> Optional[Selection]:
    best = None
    for root in roots:
        sel = schedule_tree_walk(c, root, stats, anchor, window, literal)
        if sel is not None:
            if literal:
                return sel
            if best is None or sel.key < best.key:
                best = sel
    return best


def _descendants(c: Circuit, seeds) -> set[int]:
    succ = c.dag.succ
    out: set[int] = set()
    stack = [s for i in seeds for s in succ[i] if s >= 0]
    while stack:
        i = stack.pop()
        if i in out:
            continue
        out.add(i)
        stack.extend(s for s in succ[i] if s >= 0)
    return out


def rewrite(c: Circuit, rule: TransformationRule, ctx: MatchingContext) -> Circuit:
    """Replace the matched gates by the rule's instantiated target.

    `ctx` must use the rule's own labels. The target goes after every gate
    that does not depend on the match and before every gate that does.
    """
    if rule.is_prefix or rule.target is None:
        raise RewriteError(f"prefix rule {rule.id} cannot rewrite")
    if len(ctx.matched) != len(rule.source.gates):
        raise RewriteError(f"context covers {len(ctx.matched)} of {len(rule.source.gates)} source gates")
    if not convex(c, ctx):
        raise RewriteError(f"match for {rule.id} at {sorted(ctx.matched)} is not convex")
    matched = set(ctx.matched)
    later = _descendants(c, matched) - matched
    target = instantiate(rule.target, ctx.qmap, ctx.pmap, c.num_qubits).gates
    before = [g for i, g in enumerate(c.gates) if i not in matched and i not in later]
    after = [g for i, g in enumerate(c.gates) if i in later]
    return canonicalize(before + list(target) + after, c.num_qubits)


def _first_difference(a: Circuit, b: Circuit) -> int:
    for i, (x, y) in enumerate(zip(a.gates, b.gates)):
        if x != y:
            return i
    return min(len(a.gates), len(b.gates))


def run_schedule(c: Circuit, tree: SchedTree, cfg: OptimizeConfig, *, with_tree: bool = True, prefix_rules: int = 0):
    report = OptimizeReport(gate_count_before=len(c.gates), with_tree=with_tree, prefix_rules=prefix_rules)
    t0 = time.perf_counter_ns()
    stats = report.stats
    for _ in range(cfg.max_passes):
        if cfg.preprocess == "rz-group":
            c = float_rz(c)
        applied = 0
        cursor = 0
        while cursor < len(c.gates):
            sel = select_rewrite(c, tree.roots, cursor, stats, cfg.window, cfg.literal_walk)
            if sel is None:
                cursor += 1
                continue
            new = rewrite(c, sel.rule, sel.rule_context())
            if cfg.verify_each_rewrite and c.num_qubits <= MAX_QUBITS and verify_equivalence(c, new) is None:
                raise RewriteError(f"rewrite with {sel.rule.id} at anchor {cursor} changed the circuit semantics")
            report.rewrites.append((sel.rule.id, cursor))
            applied += 1
            cursor = min(cursor, _first_difference(c, new))
            c = new
        report.passes += 1
        if applied == 0:
            break
    report.gate_count_after = len(c.gates)
    report.wall_time_ns = time.perf_counter_ns() - t0
    return c, report


def optimize(c: Circuit, rules: Sequence[TransformationRule], cfg: Optional[OptimizeConfig] = None, *, prefix=None):
    """Optimize with the pattern tree. `prefix` overrides prefix-rule generation."""
    cfg = cfg or OptimizeConfig()
    base = [r for r in rules if not r.is_prefix]
    if prefix is None:
        given = [r for r in rules if r.is_prefix]
        prefix = given if given else generate_prefix_rules(base, cfg.resolve_prefix_n(base))
    tree = build_sched_tree(base, prefix)
    return run_schedule(c, tree, cfg, with_tree=True, prefix_rules=len(prefix))


def optimize_without_tree(c: Circuit, rules: Sequence[TransformationRule], cfg: Optional[OptimizeConfig] = None):
    """Flat baseline: every rule matched on its own, no prefix rules, no shared contexts."""
    cfg = cfg or OptimizeConfig()
    tree = build_sched_tree([r for r in rules if not r.is_prefix], flat=True)
    return run_schedule(c, tree, cfg, with_tree=False)
