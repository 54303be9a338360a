"""
Rule indexing: a trie over rule sources, prefix-rule selection, and the
scheduling tree that links rules (and chosen prefix rules) by precedence.
"""
from __future__ import annotations

import hashlib
import heapq
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from .pattern import (
    CircuitPattern,
    RuleError,
    TransformationRule,
    canonical_key,
    gate_tokens,
    compact,
    normalized,
)


@dataclass(eq=False)
class TrieNode:
    tokens: tuple[str, ...] = ()
    gates: tuple = ()  # pattern gates along the path (labels of the first rule inserted)
    children: dict[str, "TrieNode"] = field(default_factory=dict)
    rule_ids: list[str] = field(default_factory=list)
    cover: int = 0

    @property
    def valid(self) -> bool:
        return bool(self.rule_ids)

    @property
    def depth(self) -> int:
        return len(self.tokens)

    @property
    def key(self) -> str:
        return ";".join(self.tokens)

    def pattern(self) -> CircuitPattern:
        return compact(CircuitPattern.build(self.gates))

    def walk(self):
        """Pre-order traversal with children in token order."""
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(node.children[k] for k in sorted(node.children, reverse=True))

    def node_count(self) -> int:
        return sum(1 for _ in self.walk())


def build_trie(rules: Iterable[TransformationRule]) -> TrieNode:
    """Insert every non-prefix rule source; fills in cover counts."""
    root = TrieNode()
    for r in rules:
        if r.is_prefix:
            continue
        node = root
        toks = gate_tokens(r.source.gates)
        for i, tok in enumerate(toks):
            child = node.children.get(tok)
            if child is None:
                child = TrieNode(tuple(toks[: i + 1]), tuple(r.source.gates[: i + 1]))
                node.children[tok] = child
            node = child
        node.rule_ids.append(r.id)
    _fill_cover(root)
    return root


def _fill_cover(root: TrieNode) -> None:
    # cover(v) = rules at strict descendants of v
    for node in reversed(list(root.walk())):
        node.cover = sum(c.cover + len(c.rule_ids) for c in node.children.values())


def cover(node: TrieNode) -> int:
    return node.cover


def is_connected(pt: CircuitPattern | Sequence) -> bool:
    """Gates as vertices, adjacent when they share an abstract qubit."""
    gates = pt.gates if isinstance(pt, CircuitPattern) else list(pt)
    if len(gates) <= 1:
        return True
    parent = list(range(len(gates)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    owner: dict[int, int] = {}
    for i, g in enumerate(gates):
        for q in g.qubits:
            if q in owner:
                parent[find(i)] = find(owner[q])
            else:
                owner[q] = i
    return len({find(i) for i in range(len(gates))}) == 1


def _candidates(root: TrieNode) -> list[TrieNode]:
    out = []
    for node in root.walk():
        if node.depth == 0 or len(node.children) <= 1 or node.valid:
            continue
        if not is_connected(node.gates):
            continue
        out.append(node)
    return out


def candidate_count(rules: Iterable[TransformationRule]) -> int:
    return len(_candidates(build_trie(rules)))


def prefix_count(pct, candidates: int) -> int:
    """Number of prefix rules for a percentage of the candidates (rounded down)."""
    return int(Fraction(str(pct)) * candidates // 100)


def prefix_rule_id(key: str) -> str:
    return "prefix-" + hashlib.sha1(key.encode()).hexdigest()[:10]


def generate_prefix_rules(rules: Sequence[TransformationRule], n: int) -> list[TransformationRule]:
    """Top-`n` prefix rules ranked by (cover desc, length asc, key asc)."""
    if n < 0:
        raise ValueError("prefix rule count must be non-negative")
    root = build_trie(rules)
    heap = [(-node.cover, node.depth, node.key, i, node) for i, node in enumerate(_candidates(root))]
    heapq.heapify(heap)
    out = []
    while heap and len(out) < n:
        *_, node = heapq.heappop(heap)
        out.append(TransformationRule(prefix_rule_id(node.key), node.pattern(), None, True))
    return out


# -- scheduling tree -------------------------------------------------------------


@dataclass(eq=False)
class SchedNode:
    """One node of the scheduling tree.

    `pattern` is the source in normalized labels (first-appearance order), so
    a node's pattern is literally the leading gates of every descendant's.
    `rules` holds the rules sharing this source, sorted by id (empty for a
    prefix node). `relabel[id]` maps the rule's own qubit/symbol ids to the
    normalized ones.
    """

    id: str
    pattern: CircuitPattern
    rules: list[TransformationRule]
    is_prefix: bool
    relabel: dict[str, tuple[dict[int, int], dict[int, int]]] = field(default_factory=dict)
    children: list["SchedNode"] = field(default_factory=list)
    parent: Optional["SchedNode"] = None
    subtree_rules: int = 0

    @property
    def rule(self) -> Optional[TransformationRule]:
        return self.rules[0] if self.rules else None

    @property
    def first_child(self) -> Optional["SchedNode"]:
        return self.children[0] if self.children else None

    @property
    def next_sibling(self) -> Optional["SchedNode"]:
        if self.parent is None:
            return None
        sibs = self.parent.children
        i = sibs.index(self)
        return sibs[i + 1] if i + 1 < len(sibs) else None

    @property
    def cover(self) -> int:
        return self.subtree_rules - len(self.rules)

    def walk(self):
        yield self
        for c in self.children:
            yield from c.walk()

    def __repr__(self):
        return f"SchedNode({self.id}, len={len(self.pattern)}, children={[c.id for c in self.children]})"


@dataclass
class SchedTree:
    roots: list[SchedNode]

    def nodes(self) -> list[SchedNode]:
        return [n for r in self.roots for n in r.walk()]

    def edges(self) -> list[tuple[SchedNode, SchedNode]]:
        return [(n, c) for n in self.nodes() for c in n.children]


def _order_key(node: SchedNode):
    return (len(node.pattern), node.id)


def build_sched_tree(
    rules: Sequence[TransformationRule], prefix: Sequence[TransformationRule] = (), *, flat: bool = False
) -> SchedTree:
    """Link rules and prefix rules by longest strict structural prefix.

    Rules with identical sources share one node. With `flat=True` every rule
    is its own root and no prefix nodes are used.
    """
    by_key: dict[str, SchedNode] = {}
    nodes: list[SchedNode] = []
    for r in sorted(rules, key=lambda r: r.id):
        if r.is_prefix:
            continue
        norm, qm, sm = normalized(r.source)
        key = canonical_key(norm)
        node = None if flat else by_key.get(key)
        if node is None:
            node = SchedNode(r.id, norm, [], False)
            by_key.setdefault(key, node)
            nodes.append(node)
        node.rules.append(r)
        node.relabel[r.id] = (qm, sm)
    if not flat:
        for p in prefix:
            if not p.is_prefix:
                raise RuleError(f"rule {p.id} is not a prefix rule")
            norm = normalized(p.source)[0]
            key = canonical_key(norm)
            if key in by_key:
                raise RuleError(f"prefix rule {p.id} duplicates the source of {by_key[key].id}")
            node = SchedNode(p.id, norm, [], True)
            by_key[key] = node
            nodes.append(node)

    roots = []
    for node in sorted(nodes, key=_order_key):
        toks = gate_tokens(node.pattern.gates)
        parent = None
        if not flat:
            for k in range(len(toks) - 1, 0, -1):
                parent = by_key.get(";".join(toks[:k]))
                if parent is not None:
                    break
        node.parent = parent
        (parent.children if parent else roots).append(node)
    for node in nodes:
        node.children.sort(key=_order_key)
    roots.sort(key=lambda n: n.id)
    for node in reversed([n for r in roots for n in r.walk()]):
        node.subtree_rules = len(node.rules) + sum(c.subtree_rules for c in node.children)
    return SchedTree(roots)


def tree_to_dot(tree: SchedTree) -> str:
    lines = ["digraph pattern_tree {", "  node [shape=box];"]
    names = {}
    for i, n in enumerate(tree.nodes()):
        names[n] = f"n{i}"
        style = ", style=dashed" if n.is_prefix else ""
        lines.append(f'  n{i} [label="{n.id} (cover={n.cover})"{style}];')
    for a, b in tree.edges():
        lines.append(f"  {names[a]} -> {names[b]};")
    lines.append("}")
    return "\n".join(lines) + "\n"
