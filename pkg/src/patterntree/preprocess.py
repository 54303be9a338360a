"""Rz grouping: gather Rz gates that commute towards each other on a wire."""
from __future__ import annotations

from .circuit import Circuit, Gate, canonicalize
from .semantics import commutes


def _rz_probe(q: int) -> Gate:
    return Gate("rz", (q,), (0.0,))


def group_rz(c: Circuit) -> dict[int, list[list[int]]]:
    """Per wire, maximal runs of Rz gates separated only by gates that commute with Rz on that wire."""
    groups: dict[int, list[list[int]]] = {}
    for q, wire in enumerate(c.dag.wires):
        probe = _rz_probe(q)
        runs: list[list[int]] = []
        current: list[int] | None = None
        for i in wire:
            g = c.gates[i]
            if g.op == "rz":
                if current is None:
                    current = [i]
                    runs.append(current)
                else:
                    current.append(i)
            elif current is not None and not commutes(g, probe):
                current = None
        if runs:
            groups[q] = runs
    return groups


def float_rz(c: Circuit) -> Circuit:
    """Move every later group member back next to the group's first member.

    Each move only passes gates that commute with Rz on that wire, so the
    unitary is unchanged exactly (no phase).
    """
    groups = group_rz(c)
    if not any(len(run) > 1 for runs in groups.values() for run in runs):
        return c
    # rebuild per-wire order, then topologically merge the wires
    order: dict[int, list[int]] = {}
    for q, wire in enumerate(c.dag.wires):
        runs = groups.get(q, [])
        followers = {i for run in runs for i in run[1:]}
        after = {run[0]: run[1:] for run in runs}
        seq = []
        for i in wire:
            if i in followers:
                continue
            seq.append(i)
            seq.extend(after.get(i, ()))
        order[q] = seq
    pos = {q: 0 for q in order}
    out: list[Gate] = []
    emitted = 0
    n = len(c.gates)
    while emitted < n:
        progressed = False
        for q in range(c.num_qubits):
            while pos[q] < len(order[q]):
                i = order[q][pos[q]]
                g = c.gates[i]
                if any(order[w][pos[w]] != i if pos[w] < len(order[w]) else True for w in g.qubits):
                    break
                for w in g.qubits:
                    pos[w] += 1
                out.append(g)
                emitted += 1
                progressed = True
        if not progressed:
            raise RuntimeError("cyclic wire order while floating Rz gates")
    return canonicalize(out, c.num_qubits)
