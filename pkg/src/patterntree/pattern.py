"""
Circuit patterns, transformation rules and the JSON rule-file format.

A pattern gate carries abstract qubit ids and linear parameter expressions
over the pattern's symbols ``v0 .. v(p-1)``. Expressions have rational
coefficients and an optional rational multiple of pi, e.g. ``v0 + v1`` or
``-v0 + 1/2*pi``.
"""
from __future__ import annotations

import ast
import hashlib
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

import numpy as np

from .circuit import GATE_TABLE, Circuit, CircuitError, Gate, canonical_order, canonicalize
from .semantics import EQUIV_TOL, equiv_up_to_phase, circuit_unitary

VALIDATION_SAMPLES = 8
VALIDATION_SEED = 0


class RuleError(ValueError):
    """Malformed, invalid or inconsistent transformation rules."""

    def __init__(self, message: str, offenders: Sequence[str] = ()):
        super().__init__(message + (f": {', '.join(offenders)}" if offenders else ""))
        self.offenders = list(offenders)


@dataclass(frozen=True)
class LinExpr:
    """sum(coef * v_i) + pi_coef * pi + const, all coefficients rational."""

    terms: tuple[tuple[int, Fraction], ...] = ()
    pi_coef: Fraction = Fraction(0)
    const: Fraction = Fraction(0)

    @staticmethod
    def symbol(i: int) -> "LinExpr":
        return LinExpr(((i, Fraction(1)),))

    @staticmethod
    def parse(text: str) -> "LinExpr":
        return _parse_linexpr(text)

    @property
    def symbols(self) -> tuple[int, ...]:
        return tuple(i for i, _ in self.terms)

    def coef(self, i: int) -> Fraction:
        return dict(self.terms).get(i, Fraction(0))

    def evaluate(self, values) -> float:
        """`values` maps symbol index -> float (a sequence or a dict)."""
        total = float(self.pi_coef) * math.pi + float(self.const)
        for i, c in self.terms:
            total += float(c) * values[i]
        return total

    def partial(self, values: dict, skip: int) -> float:
        """Evaluate every term except symbol `skip`."""
        total = float(self.pi_coef) * math.pi + float(self.const)
        for i, c in self.terms:
            if i != skip:
                total += float(c) * values[i]
        return total

    def renamed(self, mapping) -> "LinExpr":
        return _normalize(((mapping[i], c) for i, c in self.terms), self.pi_coef, self.const)

    def __add__(self, other: "LinExpr") -> "LinExpr":
        return _normalize(self.terms + other.terms, self.pi_coef + other.pi_coef, self.const + other.const)

    def scale(self, k: Fraction) -> "LinExpr":
        return _normalize(((i, c * k) for i, c in self.terms), self.pi_coef * k, self.const * k)

    def is_constant(self) -> bool:
        return not self.terms

    def __str__(self):
        parts = []
        for i, c in self.terms:
            parts.append(_term(c, f"v{i}"))
        if self.pi_coef:
            parts.append(_term(self.pi_coef, "pi"))
        if self.const:
            parts.append(str(self.const))
        if not parts:
            return "0"
        s = parts[0]
        for p in parts[1:]:
            s += f" - {p[1:]}" if p.startswith("-") else f" + {p}"
        return s


def _term(c: Fraction, name: str) -> str:
    if c == 1:
        return name
    if c == -1:
        return f"-{name}"
    return f"{c}*{name}"


def _normalize(terms: Iterable[tuple[int, Fraction]], pi_coef: Fraction, const: Fraction) -> LinExpr:
    acc: dict[int, Fraction] = {}
    for i, c in terms:
        acc[i] = acc.get(i, Fraction(0)) + c
    return LinExpr(tuple(sorted((i, c) for i, c in acc.items() if c)), Fraction(pi_coef), Fraction(const))


def _parse_linexpr(text: str) -> LinExpr:
    def num(node) -> Optional[Fraction]:
        e = ev(node)
        return e.const if (not e.terms and not e.pi_coef) else None

    def ev(node) -> LinExpr:
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
            return LinExpr(const=Fraction(repr(node.value)) if isinstance(node.value, float) else Fraction(node.value))
        if isinstance(node, ast.Name):
            if node.id == "pi":
                return LinExpr(pi_coef=Fraction(1))
            if node.id.startswith("v") and node.id[1:].isdigit():
                return LinExpr.symbol(int(node.id[1:]))
            raise RuleError(f"unknown symbol {node.id!r} in {text!r}")
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            e = ev(node.operand)
            return e.scale(Fraction(-1)) if isinstance(node.op, ast.USub) else e
        if isinstance(node, ast.BinOp):
            if isinstance(node.op, ast.Add):
                return ev(node.left) + ev(node.right)
            if isinstance(node.op, ast.Sub):
                return ev(node.left) + ev(node.right).scale(Fraction(-1))
            if isinstance(node.op, ast.Mult):
                lk, rk = num(node.left), num(node.right)
                if lk is not None:
                    return ev(node.right).scale(lk)
                if rk is not None:
                    return ev(node.left).scale(rk)
                raise RuleError(f"non-linear product in {text!r}")
            if isinstance(node.op, ast.Div):
                rk = num(node.right)
                if rk is None or rk == 0:
                    raise RuleError(f"division by non-constant or zero in {text!r}")
                return ev(node.left).scale(1 / rk)
        raise RuleError(f"unsupported parameter expression {text!r}")

    try:
        tree = ast.parse(str(text).strip(), mode="eval")
    except SyntaxError:
        raise RuleError(f"bad parameter expression {text!r}") from None
    return ev(tree.body)


@dataclass(frozen=True)
class PatternGate:
    op: str
    qubits: tuple[int, ...]
    params: tuple[LinExpr, ...] = ()

    def __post_init__(self):
        if self.op not in GATE_TABLE:
            raise RuleError(f"unknown gate {self.op!r}")
        nq, npar = GATE_TABLE[self.op]
        if len(self.qubits) != nq or len(self.params) != npar or len(set(self.qubits)) != nq:
            raise RuleError(f"malformed pattern gate {self.op} {self.qubits} {self.params}")

    def __str__(self):
        ps = f"({', '.join(map(str, self.params))})" if self.params else ""
        return f"{self.op}{ps} " + ",".join(f"a{q}" for q in self.qubits)


def pgate(op: str, *qubits: int, params: Sequence = ()) -> PatternGate:
    """Convenience constructor; params may be LinExpr or expression strings."""
    ps = tuple(p if isinstance(p, LinExpr) else LinExpr.parse(p) for p in params)
    return PatternGate(op, tuple(qubits), ps)


@dataclass(frozen=True)
class CircuitPattern:
    gates: tuple[PatternGate, ...]
    num_qubits: int
    num_params: int = 0

    @classmethod
    def build(cls, gates: Sequence[PatternGate], num_qubits: int | None = None, num_params: int | None = None):
        """Canonicalize gate order; infer counts when not given."""
        gates = list(gates)
        if num_qubits is None:
            num_qubits = 1 + max((q for g in gates for q in g.qubits), default=-1)
        if num_params is None:
            num_params = 1 + max((s for g in gates for e in g.params for s in e.symbols), default=-1)
        for g in gates:
            if any(not 0 <= q < num_qubits for q in g.qubits):
                raise RuleError(f"abstract qubit out of range in {g}")
            if any(not 0 <= s < num_params for e in g.params for s in e.symbols):
                raise RuleError(f"parameter symbol out of range in {g}")
        return cls(tuple(canonical_order(gates)), num_qubits, num_params)

    def __len__(self):
        return len(self.gates)

    def used_qubits(self) -> set[int]:
        return {q for g in self.gates for q in g.qubits}

    def used_symbols(self) -> set[int]:
        return {s for g in self.gates for e in g.params for s in e.symbols}

    def __str__(self):
        return "[" + "; ".join(map(str, self.gates)) + "]"


@dataclass(frozen=True)
class TransformationRule:
    id: str
    source: CircuitPattern
    target: Optional[CircuitPattern] = None
    is_prefix: bool = False

    @property
    def cost_delta(self) -> Optional[int]:
        if self.target is None:
            return None
        return len(self.target) - len(self.source)

    def __str__(self):
        return f"{self.id}: {self.source} -> {self.target if self.target is not None else '<prefix>'}"


# -- structural keys -------------------------------------------------------------


class _Renamer:
    """First-appearance renumbering of abstract qubits and symbols."""

    def __init__(self):
        self.qubits: dict[int, int] = {}
        self.symbols: dict[int, int] = {}

    def gate(self, g: PatternGate) -> PatternGate:
        qs = tuple(self.qubits.setdefault(q, len(self.qubits)) for q in g.qubits)
        ps = []
        for e in g.params:
            for s in e.symbols:
                self.symbols.setdefault(s, len(self.symbols))
            ps.append(e.renamed(self.symbols))
        return PatternGate(g.op, qs, tuple(ps))


def _token(g: PatternGate) -> str:
    ps = f"[{','.join(map(str, g.params))}]" if g.params else ""
    return f"{g.op}{ps}({','.join(map(str, g.qubits))})"


def gate_tokens(gates: Sequence[PatternGate]) -> list[str]:
    """Renaming-invariant token per gate; a prefix's tokens are a prefix of the whole's."""
    r = _Renamer()
    return [_token(r.gate(g)) for g in gates]


def canonical_key(pt: CircuitPattern | Sequence[PatternGate]) -> str:
    gates = pt.gates if isinstance(pt, CircuitPattern) else pt
    return ";".join(gate_tokens(gates))


def normalized(pt: CircuitPattern) -> tuple[CircuitPattern, dict[int, int], dict[int, int]]:
    """Renumber qubits and symbols by first appearance.

    Returns the renamed pattern plus the original->normalized maps.
    """
    r = _Renamer()
    gates = tuple(r.gate(g) for g in pt.gates)
    return CircuitPattern(gates, len(r.qubits), len(r.symbols)), dict(r.qubits), dict(r.symbols)


def compact(pt: CircuitPattern) -> CircuitPattern:
    """Renumber used qubits and symbols to 0..k-1, preserving their relative order.

    Monotone renaming keeps a canonical gate order canonical.
    """
    qs = {q: i for i, q in enumerate(sorted(pt.used_qubits()))}
    ss = {s: i for i, s in enumerate(sorted(pt.used_symbols()))}
    gates = tuple(PatternGate(g.op, tuple(qs[q] for q in g.qubits), tuple(e.renamed(ss) for e in g.params)) for g in pt.gates)
    return CircuitPattern(gates, len(qs), len(ss))


def rule_key(r: TransformationRule) -> str:
    """Joint source+target key, target labels renamed consistently with the source."""
    ren = _Renamer()
    src = ";".join(_token(ren.gate(g)) for g in r.source.gates)
    if r.target is None:
        return src + "=>*"
    return src + "=>" + ";".join(_token(ren.gate(g)) for g in r.target.gates)


def precedes(pa: CircuitPattern, pb: CircuitPattern) -> bool:
    k = len(pa.gates)
    if k >= len(pb.gates):
        return False
    return gate_tokens(pa.gates) == gate_tokens(pb.gates[:k])


def derive_id(r: TransformationRule) -> str:
    return "r-" + hashlib.sha1(rule_key(r).encode()).hexdigest()[:10]


# -- instantiation / validation -----------------------------------------------------


def instantiate(pt: CircuitPattern, qmap: Sequence[int] | dict, values, num_qubits: int) -> Circuit:
    """Concrete circuit for `pt` with abstract qubit a -> qmap[a], symbol i -> values[i]."""
    if isinstance(qmap, dict):
        used = pt.used_qubits()
        missing = used - set(qmap)
        if missing:
            raise ValueError(f"no concrete qubit for abstract qubits {sorted(missing)}")
        image = [qmap[a] for a in used]
    else:
        if len(qmap) < pt.num_qubits:
            raise ValueError(f"qubit map has {len(qmap)} entries, pattern needs {pt.num_qubits}")
        image = list(qmap)
    if len(set(image)) != len(image):
        raise ValueError(f"qubit map is not injective: {qmap}")
    if not isinstance(values, dict) and len(values) != pt.num_params:
        raise ValueError(f"expected {pt.num_params} parameter values, got {len(values)}")
    gates = []
    for g in pt.gates:
        gates.append(Gate(g.op, tuple(qmap[q] for q in g.qubits), tuple(e.evaluate(values) for e in g.params)))
    try:
        return canonicalize(gates, num_qubits)
    except CircuitError as e:
        raise ValueError(str(e)) from None


def _phase_close(a: float, b: float, tol: float) -> bool:
    return abs(math.remainder(a - b, 2 * math.pi)) <= tol


def validate_rule(
    r: TransformationRule, samples: int = VALIDATION_SAMPLES, tol: float = EQUIV_TOL, seed: int = VALIDATION_SEED
) -> Optional[float]:
    """Phase beta with source = e^{i beta} target for every sampled parameter vector, else None."""
    if r.is_prefix or r.target is None:
        raise RuleError(f"prefix rule {r.id} has no target to validate")
    m = r.source.num_qubits
    p = max(r.source.num_params, r.target.num_params)
    rng = np.random.default_rng(seed)
    ident = list(range(m))
    beta0 = None
    for _ in range(max(1, samples)):
        v = list(-rng.uniform(-math.pi, math.pi, p))  # (-pi, pi]
        try:
            u_s = circuit_unitary(instantiate(_with_params(r.source, p), ident, v, m))
            u_t = circuit_unitary(instantiate(_with_params(r.target, p), ident, v, m))
        except ValueError:
            return None
        beta = equiv_up_to_phase(u_s, u_t, tol)
        if beta is None:
            return None
        if beta0 is None:
            beta0 = beta
        elif not _phase_close(beta, beta0, tol):
            return None
    return beta0


def _with_params(pt: CircuitPattern, p: int) -> CircuitPattern:
    return pt if pt.num_params == p else CircuitPattern(pt.gates, pt.num_qubits, p)


# -- rule files ------------------------------------------------------------------------


def _gate_from_json(item, where: str) -> PatternGate:
    try:
        op, qs, ps = item
        return PatternGate(str(op), tuple(int(q) for q in qs), tuple(LinExpr.parse(p) for p in ps))
    except RuleError:
        raise
    except (TypeError, ValueError) as e:
        raise RuleError(f"malformed gate {item!r} in {where}: {e}") from None


def _gate_to_json(g: PatternGate) -> list:
    return [g.op, list(g.qubits), [str(e) for e in g.params]]


def _check_source_binding(pt: CircuitPattern) -> bool:
    """Every source expression introduces at most one new symbol."""
    bound: set[int] = set()
    for g in pt.gates:
        for e in g.params:
            fresh = [s for s in e.symbols if s not in bound]
            if len(fresh) > 1:
                return False
            bound.update(fresh)
    return True


def check_rule(r: TransformationRule) -> None:
    """Structural invariants; raises RuleError."""
    if r.is_prefix != (r.target is None):
        raise RuleError(f"rule {r.id}: prefix flag must be set exactly when the target is absent")
    src = r.source
    if src.num_qubits and src.used_qubits() != set(range(src.num_qubits)):
        raise RuleError(f"rule {r.id}: source has dangling abstract qubits")
    if not _check_source_binding(src):
        raise RuleError(f"rule {r.id}: source expression binds more than one new symbol")
    if r.target is not None:
        if not r.target.used_qubits() <= src.used_qubits():
            raise RuleError(f"rule {r.id}: target uses qubits absent from the source")
        if not r.target.used_symbols() <= src.used_symbols():
            raise RuleError(f"rule {r.id}: target uses parameters absent from the source")
        if r.cost_delta == 0:
            raise RuleError(f"rule {r.id}: cost-preserving rule")
        if r.cost_delta > 0:
            raise RuleError(f"rule {r.id}: cost-increasing rule")


def make_rule(
    rid: Optional[str], source: Sequence[PatternGate], target: Optional[Sequence[PatternGate]], *,
    num_qubits: int | None = None, num_params: int | None = None,
) -> TransformationRule:
    src = CircuitPattern.build(source, num_qubits, num_params)
    tgt = None if target is None else CircuitPattern.build(target, src.num_qubits, src.num_params)
    r = TransformationRule(rid or "", src, tgt, target is None)
    if not rid:
        r = TransformationRule(derive_id(r), src, tgt, target is None)
    return r


def rules_from_data(data) -> list[TransformationRule]:
    if not isinstance(data, list):
        raise RuleError("rule file must contain a top-level list")
    rules = []
    for n, item in enumerate(data):
        if not isinstance(item, dict) or "source" not in item:
            raise RuleError(f"rule #{n} is not an object with a 'source'")
        where = f"rule {item.get('id', '#' + str(n))}"
        src = [_gate_from_json(g, where) for g in item["source"]]
        tgt = item.get("target")
        tgt = None if tgt is None else [_gate_from_json(g, where) for g in tgt]
        if bool(item.get("is_prefix", False)) != (tgt is None):
            raise RuleError(f"{where}: is_prefix must be true exactly when target is null")
        rules.append(make_rule(item.get("id"), src, tgt, num_qubits=item.get("qubits"), num_params=item.get("params")))
    return rules


def load_rules(text: str, *, validate: bool = True, samples: int = VALIDATION_SAMPLES, tol: float = EQUIV_TOL) -> list[TransformationRule]:
    """Parse a JSON rule file; validates every non-prefix rule numerically."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise RuleError(f"rule file is not valid JSON: {e}") from None
    rules = rules_from_data(data)
    check_rule_set(rules, validate=validate, samples=samples, tol=tol)
    return rules


def check_rule_set(rules: Sequence[TransformationRule], *, validate: bool = True, samples: int = VALIDATION_SAMPLES, tol: float = EQUIV_TOL):
    for r in rules:
        check_rule(r)
    ids = [r.id for r in rules]
    dup_ids = sorted({i for i in ids if ids.count(i) > 1})
    if dup_ids:
        raise RuleError("duplicate rule ids", dup_ids)
    seen: dict[str, str] = {}
    dups = []
    for r in rules:
        k = rule_key(r)
        if k in seen:
            dups.append(r.id)
        seen.setdefault(k, r.id)
    if dups:
        raise RuleError("duplicate rules (same source and target)", dups)
    if validate:
        bad = [r.id for r in rules if not r.is_prefix and validate_rule(r, samples, tol) is None]
        if bad:
            raise RuleError("rule validation failed", bad)


def rule_to_json(r: TransformationRule) -> dict:
    return {
        "id": r.id,
        "qubits": r.source.num_qubits,
        "params": r.source.num_params,
        "source": [_gate_to_json(g) for g in r.source.gates],
        "target": None if r.target is None else [_gate_to_json(g) for g in r.target.gates],
        "is_prefix": r.is_prefix,
    }


def save_rules(rules: Sequence[TransformationRule]) -> str:
    """Canonical text: one rule per line, keys sorted."""
    if not rules:
        return "[]\n"
    lines = [json.dumps(rule_to_json(r), sort_keys=True) for r in rules]
    return "[\n" + ",\n".join(lines) + "\n]\n"
