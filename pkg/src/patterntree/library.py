"""
Starter rule library plus seeded generators for rule libraries and circuits.

The generators stand in for externally produced rule sets and benchmark
suites; everything is deterministic given the seed.
"""
from __future__ import annotations

import math
import random
from importlib import resources
from typing import Optional, Sequence

from .circuit import Circuit, Gate, canonicalize
from .pattern import (
    CircuitPattern,
    LinExpr,
    PatternGate,
    RuleError,
    TransformationRule,
    check_rule,
    load_rules,
    make_rule,
    pgate,
    rule_key,
    validate_rule,
)


def starter_rule_text() -> str:
    return resources.files("patterntree").joinpath("data/starter_rules.json").read_text()


def starter_rules() -> list[TransformationRule]:
    """R1 [H,H]->[], R2 [H,X,H]->[Rz(pi)], R3 Rz merge, R4 [CX,CX]->[], R5 [X,X]->[]."""
    return load_rules(starter_rule_text())


def build_starter_rules() -> list[TransformationRule]:
    return [
        make_rule("R1", [pgate("h", 0), pgate("h", 0)], []),
        make_rule("R2", [pgate("h", 0), pgate("x", 0), pgate("h", 0)], [pgate("rz", 0, params=["pi"])]),
        make_rule("R3", [pgate("rz", 0, params=["v0"]), pgate("rz", 0, params=["v1"])], [pgate("rz", 0, params=["v0 + v1"])]),
        make_rule("R4", [pgate("cx", 0, 1), pgate("cx", 0, 1)], []),
        make_rule("R5", [pgate("x", 0), pgate("x", 0)], []),
    ]


# -- generated rule libraries -------------------------------------------------------

_ALPHABET = ("h", "x", "cx", "rz")


def _random_word(rng: random.Random, length: int, nq: int, sym: list[int]) -> list[PatternGate]:
    out = []
    for _ in range(length):
        op = rng.choice(_ALPHABET if nq > 1 else ("h", "x", "rz"))
        if op == "cx":
            out.append(PatternGate("cx", tuple(rng.sample(range(nq), 2))))
        elif op == "rz":
            out.append(PatternGate("rz", (rng.randrange(nq),), (LinExpr.symbol(sym[0]),)))
            sym[0] += 1
        else:
            out.append(PatternGate(op, (rng.randrange(nq),)))
    return out


def _inverse(word: Sequence[PatternGate]) -> list[PatternGate]:
    return [PatternGate(g.op, g.qubits, tuple(e.scale(-1) for e in g.params)) for g in reversed(word)]


def generate_rule_library(
    n_rules: int, seed: int = 0, *, max_qubits: int = 3, stems: int = 4, max_tail: int = 2
) -> list[TransformationRule]:
    """Cost-reducing rules `stem + W + W^-1 -> stem` sharing a few stems.

    Stems are short random words, so many sources share leading gates and
    the trie gets branch points. Every rule is validated numerically.
    """
    rng = random.Random(seed)
    stem_words = []
    for _ in range(stems):
        sym = [0]
        nq = rng.randint(1, max_qubits)
        stem_words.append((nq, _random_word(rng, rng.randint(1, 2), nq, sym), sym[0]))
    rules: list[TransformationRule] = []
    keys: set[str] = set()
    attempts = 0
    while len(rules) < n_rules:
        attempts += 1
        if attempts > 200 * n_rules:
            raise RuntimeError("could not generate enough distinct rules")
        nq, stem, nsym = rng.choice(stem_words)
        sym = [nsym]
        tail = _random_word(rng, rng.randint(1, max_tail), nq, sym)
        source = stem + tail + _inverse(tail)
        try:
            r = make_rule(None, source, stem, num_qubits=nq, num_params=sym[0])
        except RuleError:
            continue
        k = rule_key(r)
        if k in keys:
            continue
        try:
            check_rule(r)
        except RuleError:
            continue
        if validate_rule(r) is None:
            continue
        keys.add(k)
        rules.append(TransformationRule(f"G{len(rules):03d}", r.source, r.target, False))
    return rules


# -- synthetic circuits ----------------------------------------------------------------


def _random_angle(rng: random.Random) -> float:
    # mix of T-like multiples of pi/4 and generic angles
    if rng.random() < 0.5:
        return rng.randint(-7, 7) * math.pi / 4
    return rng.uniform(-math.pi, math.pi)


def random_gate(rng: random.Random, n_qubits: int, ops: Sequence[str] = ("h", "x", "rz", "cx", "t", "tdg", "z")) -> Gate:
    choices = [o for o in ops if o != "cx" or n_qubits > 1]
    op = rng.choice(choices)
    if op == "cx":
        return Gate("cx", tuple(rng.sample(range(n_qubits), 2)))
    q = rng.randrange(n_qubits)
    if op == "rz":
        return Gate("rz", (q,), (_random_angle(rng),))
    return Gate(op, (q,))


def plant(rng: random.Random, pattern: CircuitPattern, n_qubits: int) -> Optional[list[Gate]]:
    """A random instance of `pattern` on `n_qubits` wires, or None if it does not fit."""
    if pattern.num_qubits > n_qubits:
        return None
    qmap = rng.sample(range(n_qubits), pattern.num_qubits)
    values = [_random_angle(rng) for _ in range(pattern.num_params)]
    return [Gate(g.op, tuple(qmap[q] for q in g.qubits), tuple(e.evaluate(values) for e in g.params)) for g in pattern.gates]


def synthetic_circuit(
    rng: random.Random,
    n_qubits: int,
    n_gates: int,
    patterns: Sequence[CircuitPattern],
    plant_prob: float = 0.3,
    ops: Sequence[str] = ("h", "x", "rz", "cx", "t", "tdg", "z"),
) -> Circuit:
    """Random gates interleaved with planted pattern instances."""
    gates: list[Gate] = []
    while len(gates) < n_gates:
        if patterns and rng.random() < plant_prob:
            inst = plant(rng, rng.choice(patterns), n_qubits)
            if inst and len(gates) + len(inst) <= n_gates:
                gates.extend(inst)
                continue
        gates.append(random_gate(rng, n_qubits, ops))
    return canonicalize(gates, n_qubits)


def _rz_sandwich(rng: random.Random, n_qubits: int) -> list[Gate]:
    # Rz on a control wire, CXs controlled by it, then another Rz
    q = rng.randrange(n_qubits)
    others = [t for t in range(n_qubits) if t != q]
    out = [Gate("rz", (q,), (_random_angle(rng),))]
    for _ in range(rng.randint(1, 3)):
        out.append(Gate("cx", (q, rng.choice(others))))
    out.append(Gate("rz", (q,), (_random_angle(rng),)))
    return out


def synthetic_corpus(seed: int = 0, count: int = 32) -> dict[str, Circuit]:
    """Mixed corpus for the starter library: 1-10 qubits, 10-300 gates."""
    rng = random.Random(seed)
    sources = [r.source for r in build_starter_rules()]
    corpus = {}
    for k in range(count):
        n_qubits = 1 + k % 10
        n_gates = rng.randint(10, 300)
        gates: list[Gate] = []
        while len(gates) < n_gates:
            u = rng.random()
            if u < 0.3:
                inst = plant(rng, rng.choice(sources), n_qubits)
            elif u < 0.4 and n_qubits > 1:
                inst = _rz_sandwich(rng, n_qubits)
            else:
                inst = [random_gate(rng, n_qubits)]
            if inst and len(gates) + len(inst) <= n_gates:
                gates.extend(inst)
        corpus[f"synth_{k:02d}_q{n_qubits}"] = canonicalize(gates, n_qubits)
    return corpus


def shared_prefix_corpus(seed: int = 1, count: int = 12) -> dict[str, Circuit]:
    """H-heavy circuits: many anchors match the [H] prefix shared by R1 and R2."""
    rng = random.Random(seed)
    sources = [r.source for r in build_starter_rules()]
    near = [
        CircuitPattern.build([pgate("h", 0), pgate("z", 0)]),
        CircuitPattern.build([pgate("h", 0), pgate("x", 0), pgate("t", 0)]),
        CircuitPattern.build([pgate("h", 0), pgate("cx", 0, 1)]),
    ]
    corpus = {}
    for k in range(count):
        n_qubits = 2 + k % 5
        n_gates = rng.randint(40, 200)
        c = synthetic_circuit(rng, n_qubits, n_gates, sources[:2] + near, plant_prob=0.5, ops=("h", "x", "rz", "cx", "t"))
        corpus[f"prefix_{k:02d}_q{n_qubits}"] = c
    return corpus


def rule_workload(rules: Sequence[TransformationRule], seed: int = 2, count: int = 6) -> dict[str, Circuit]:
    """Circuits seeded with instances of the given rules' sources and their stems."""
    rng = random.Random(seed)
    pats = [r.source for r in rules]
    stems = [CircuitPattern(r.source.gates[: max(1, len(r.source) // 2)], r.source.num_qubits, r.source.num_params) for r in rules]
    out = {}
    for k in range(count):
        n_qubits = 3 + k % 3
        c = synthetic_circuit(rng, n_qubits, rng.randint(60, 160), pats + stems, plant_prob=0.4, ops=("h", "x", "rz", "cx"))
        out[f"work_{k:02d}_q{n_qubits}"] = c
    return out
