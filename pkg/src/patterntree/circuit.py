"""
Concrete circuit IR: gates, canonical ordering, OpenQASM-2 subset I/O, DAG view.

A circuit's gate sequence is always kept in canonical order: gates sorted by
(depth, lowest qubit index), where depth is the longest path from the circuit
inputs to the gate. Gates sharing a wire keep their relative order.
"""
from __future__ import annotations

import ast
import math
import operator
import re
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

# opcode -> (qubit count, parameter count)
GATE_TABLE: dict[str, tuple[int, int]] = {
    "h": (1, 0),
    "x": (1, 0),
    "z": (1, 0),
    "t": (1, 0),
    "tdg": (1, 0),
    "rz": (1, 1),
    "cx": (2, 0),
}


class CircuitError(ValueError):
    """Invalid gate or circuit construction."""


class QasmParseError(CircuitError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"line {line}, col {col}: {message}")
        self.line = line
        self.col = col


@dataclass(frozen=True)
class Gate:
    op: str
    qubits: tuple[int, ...]
    params: tuple[float, ...] = ()

    def __post_init__(self):
        if self.op not in GATE_TABLE:
            raise CircuitError(f"unknown gate {self.op!r}")
        nq, npar = GATE_TABLE[self.op]
        if len(self.qubits) != nq:
            raise CircuitError(f"{self.op} takes {nq} qubit(s), got {len(self.qubits)}")
        if len(self.params) != npar:
            raise CircuitError(f"{self.op} takes {npar} parameter(s), got {len(self.params)}")
        if len(set(self.qubits)) != len(self.qubits):
            raise CircuitError(f"{self.op} applied to duplicate qubits {self.qubits}")

    @property
    def min_qubit(self) -> int:
        return min(self.qubits)

    def __str__(self):
        ps = f"({', '.join(repr(p) for p in self.params)})" if self.params else ""
        return f"{self.op}{ps} " + ",".join(f"q{q}" for q in self.qubits)


def gate(op: str, *qubits: int, params: Sequence[float] = ()) -> Gate:
    return Gate(op, tuple(qubits), tuple(float(p) for p in params))


def depths(gates: Sequence, num_qubits: int | None = None) -> list[int]:
    """Longest-path depth (1-based) of every gate, gates taken in wire order."""
    last: dict[int, int] = {}
    out = []
    for g in gates:
        d = 1 + max((last.get(q, 0) for q in g.qubits), default=0)
        for q in g.qubits:
            last[q] = d
        out.append(d)
    return out


def canonical_order(gates: Sequence) -> list:
    """Stable sort by (depth, min qubit). Works for any gate-like with `.qubits`."""
    ds = depths(gates)
    idx = sorted(range(len(gates)), key=lambda i: (ds[i], min(gates[i].qubits)))
    return [gates[i] for i in idx]


@dataclass(frozen=True)
class DagView:
    """Per-wire dependency structure of a circuit.

    `pred[i][k]` / `succ[i][k]` give the previous / next gate on the wire
    `gates[i].qubits[k]`, or -1.
    """

    edges: tuple[tuple[int, int, int], ...]
    pred: tuple[tuple[int, ...], ...]
    succ: tuple[tuple[int, ...], ...]
    wires: tuple[tuple[int, ...], ...]

    def next_on_wire(self, c: "Circuit", i: int, q: int) -> int:
        return self.succ[i][c.gates[i].qubits.index(q)]

    def prev_on_wire(self, c: "Circuit", i: int, q: int) -> int:
        return self.pred[i][c.gates[i].qubits.index(q)]


@dataclass(frozen=True)
class Circuit:
    """Immutable gate sequence over `num_qubits` wires, in canonical order.

    Build through :func:`canonicalize` (or :meth:`from_gates`) unless the
    gate list is already known to be canonical.
    """

    gates: tuple[Gate, ...]
    num_qubits: int

    @classmethod
    def from_gates(cls, gates: Iterable[Gate], num_qubits: int) -> "Circuit":
        return canonicalize(list(gates), num_qubits)

    def __len__(self):
        return len(self.gates)

    def __iter__(self):
        return iter(self.gates)

    @property
    def qubits(self) -> list[int]:
        return list(range(self.num_qubits))

    @cached_property
    def depths(self) -> tuple[int, ...]:
        return tuple(depths(self.gates))

    @cached_property
    def dag(self) -> DagView:
        return dag_view(self)

    def gate_count(self) -> int:
        return len(self.gates)


def canonicalize(gates: Sequence[Gate], num_qubits: int) -> Circuit:
    for g in gates:
        for q in g.qubits:
            if not 0 <= q < num_qubits:
                raise CircuitError(f"qubit {q} out of range for {num_qubits}-qubit circuit")
    return Circuit(tuple(canonical_order(gates)), num_qubits)


def is_canonical(c: Circuit) -> bool:
    ds = c.depths
    keys = [(d, g.min_qubit) for d, g in zip(ds, c.gates)]
    return all(a < b for a, b in zip(keys, keys[1:]))


def depth_of(c: Circuit, i: int) -> int:
    if not 0 <= i < len(c.gates):
        raise IndexError(f"gate index {i} out of range")
    return c.depths[i]


def dag_view(c: Circuit) -> DagView:
    last: dict[int, int] = {}
    pred = [[-1] * len(g.qubits) for g in c.gates]
    succ = [[-1] * len(g.qubits) for g in c.gates]
    wires: dict[int, list[int]] = {q: [] for q in range(c.num_qubits)}
    edges = []
    for i, g in enumerate(c.gates):
        for k, q in enumerate(g.qubits):
            j = last.get(q, -1)
            if j >= 0:
                pred[i][k] = j
                succ[j][c.gates[j].qubits.index(q)] = i
                edges.append((j, i, q))
            last[q] = i
            wires[q].append(i)
    return DagView(
        edges=tuple(edges),
        pred=tuple(map(tuple, pred)),
        succ=tuple(map(tuple, succ)),
        wires=tuple(tuple(wires[q]) for q in range(c.num_qubits)),
    )


# -- OpenQASM 2 subset -------------------------------------------------------

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv}


def eval_angle(text: str) -> float:
    """Evaluate a numeric angle literal such as ``0.25``, ``pi/4`` or ``-3*pi/2``."""

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        raise ValueError(f"unsupported angle expression {text!r}")

    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError as e:
        raise ValueError(f"bad angle expression {text!r}") from e
    return ev(tree)


_QREG = re.compile(r"qreg\s+([A-Za-z_]\w*)\s*\[\s*(\d+)\s*\]$")
_GATE = re.compile(r"([A-Za-z_]\w*)\s*(?:\((.*)\))?\s*(.*)$", re.S)
_ARG = re.compile(r"([A-Za-z_]\w*)\s*\[\s*(\d+)\s*\]$")


def _statements(text: str):
    """Yield (statement, line, col) for each ';'-terminated statement."""
    line, col = 1, 1
    buf: list[str] = []
    start = None
    i = 0
    while i < len(text):
        ch = text[i]
        if text.startswith("//", i):
            while i < len(text) and text[i] != "\n":
                i += 1
            continue
        if ch == ";":
            yield "".join(buf).strip(), start or (line, col)
            buf, start = [], None
        else:
            if start is None and not ch.isspace():
                start = (line, col)
            if start is not None:
                buf.append(ch)
        if ch == "\n":
            line, col = line + 1, 1
        else:
            col += 1
        i += 1
    if "".join(buf).strip():
        raise QasmParseError("missing ';' at end of statement", *start)


def parse_circuit(text: str) -> Circuit:
    """Parse the supported OpenQASM-2 subset into a canonical circuit."""
    reg: tuple[str, int] | None = None
    gates: list[Gate] = []
    for stmt, (line, col) in _statements(text):
        if not stmt:
            continue
        if stmt.startswith("OPENQASM"):
            continue
        if stmt.startswith("include"):
            if stmt.split(None, 1)[-1].strip() != '"qelib1.inc"':
                raise QasmParseError(f"unsupported include: {stmt}", line, col)
            continue
        m = _QREG.match(stmt)
        if m:
            if reg is not None:
                raise QasmParseError("only a single qreg is supported", line, col)
            reg = (m.group(1), int(m.group(2)))
            continue
        if stmt.startswith(("creg", "measure", "barrier", "gate ", "if")):
            raise QasmParseError(f"unsupported statement: {stmt.split()[0]}", line, col)
        m = _GATE.match(stmt)
        if not m:
            raise QasmParseError(f"syntax error: {stmt!r}", line, col)
        name, ptext, argtext = m.group(1), m.group(2), m.group(3)
        if name not in GATE_TABLE:
            raise QasmParseError(f"unknown gate {name!r}", line, col)
        if reg is None:
            raise QasmParseError("gate before qreg declaration", line, col)
        params = []
        if ptext is not None and ptext.strip():
            for p in ptext.split(","):
                try:
                    params.append(eval_angle(p))
                except ValueError as e:
                    raise QasmParseError(str(e), line, col) from None
        qubits = []
        for arg in argtext.split(","):
            am = _ARG.match(arg.strip())
            if not am:
                raise QasmParseError(f"bad qubit argument {arg.strip()!r}", line, col)
            if am.group(1) != reg[0]:
                raise QasmParseError(f"unknown register {am.group(1)!r}", line, col)
            q = int(am.group(2))
            if q >= reg[1]:
                raise QasmParseError(f"qubit index {q} out of range (size {reg[1]})", line, col)
            qubits.append(q)
        try:
            gates.append(Gate(name, tuple(qubits), tuple(params)))
        except CircuitError as e:
            raise QasmParseError(str(e), line, col) from None
    if reg is None:
        raise QasmParseError("missing qreg declaration", 1, 1)
    return canonicalize(gates, reg[1])


def emit_circuit(c: Circuit) -> str:
    lines = [f"qreg q[{c.num_qubits}];"]
    for g in c.gates:
        ps = f"({','.join(repr(p) for p in g.params)})" if g.params else ""
        args = ",".join(f"q[{q}]" for q in g.qubits)
        lines.append(f"{g.op}{ps} {args};")
    return "\n".join(lines) + "\n"
