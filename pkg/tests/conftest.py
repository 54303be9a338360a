from __future__ import annotations

import math
import random

import pytest
from hypothesis import strategies as st

from patterntree.circuit import Gate, canonicalize
from patterntree.library import random_gate, starter_rules

OPS = ("h", "x", "z", "t", "tdg", "rz", "cx")


def random_circuit(rng: random.Random, n_qubits: int, n_gates: int, ops=OPS):
    return canonicalize([random_gate(rng, n_qubits, ops) for _ in range(n_gates)], n_qubits)


@st.composite
def circuits(draw, max_qubits: int = 4, max_gates: int = 12, ops=OPS):
    m = draw(st.integers(1, max_qubits))
    n = draw(st.integers(0, max_gates))
    gates = []
    for _ in range(n):
        op = draw(st.sampled_from([o for o in ops if o != "cx" or m > 1]))
        if op == "cx":
            a, b = draw(st.lists(st.integers(0, m - 1), min_size=2, max_size=2, unique=True))
            gates.append(Gate("cx", (a, b)))
        elif op == "rz":
            theta = draw(st.floats(-math.pi, math.pi, allow_nan=False))
            gates.append(Gate("rz", (draw(st.integers(0, m - 1)),), (theta,)))
        else:
            gates.append(Gate(op, (draw(st.integers(0, m - 1)),)))
    return canonicalize(gates, m)


@pytest.fixture(scope="session")
def starter():
    return starter_rules()


@pytest.fixture(scope="session")
def rules_by_id(starter):
    return {r.id: r for r in starter}


ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
