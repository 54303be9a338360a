"""
Dense unitary semantics, phase-insensitive equivalence and a commutation oracle.

Qubit 0 is the most significant tensor factor, so a CX with control q0 and
target q1 swaps |10> and |11>. A circuit's unitary is the product of its gate
matrices with later gates on the left.
"""
from __future__ import annotations

import cmath
import math
import threading
from typing import Optional

import numpy as np

from .circuit import GATE_TABLE, Circuit, Gate

MAX_QUBITS = 12
EQUIV_TOL = 1e-8
UNITARY_TOL = 1e-9
COMMUTE_TOL = 1e-9
COMMUTE_SAMPLES = 3
COMMUTE_SEED = 20240917


class CapacityError(ValueError):
    """Requested dense unitary exceeds the configured qubit cap."""


_SQ2 = 1 / math.sqrt(2)
_FIXED = {
    "h": np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]], dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
    "t": np.diag([1, cmath.exp(1j * math.pi / 4)]),
    "tdg": np.diag([1, cmath.exp(-1j * math.pi / 4)]),
    "cx": np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex),
}


def rz_matrix(theta: float) -> np.ndarray:
    return np.diag([cmath.exp(-0.5j * theta), cmath.exp(0.5j * theta)])


def gate_matrix(op: str, params=()) -> np.ndarray:
    """Local 2^k x 2^k matrix of a gate, qubits in the gate's qlist order."""
    if op == "rz":
        return rz_matrix(params[0])
    return _FIXED[op]


def _check_cap(m: int, cap: int):
    if m > cap:
        raise CapacityError(f"{m} qubits exceeds dense-unitary cap of {cap}")


def _apply(mat: np.ndarray, u: np.ndarray, qubits, m: int) -> np.ndarray:
    """Left-multiply `u` (2^m x cols) by `mat` acting on `qubits`."""
    k = len(qubits)
    cols = u.shape[1]
    t = u.reshape((2,) * m + (cols,))
    g = mat.reshape((2,) * (2 * k))
    t = np.tensordot(g, t, axes=(list(range(k, 2 * k)), list(qubits)))
    t = np.moveaxis(t, list(range(k)), list(qubits))
    return t.reshape(2**m, cols)


def gate_unitary(g: Gate, m: int, cap: int = MAX_QUBITS) -> np.ndarray:
    _check_cap(m, cap)
    return _apply(gate_matrix(g.op, g.params), np.eye(2**m, dtype=complex), g.qubits, m)


def circuit_unitary(c: Circuit, cap: int = MAX_QUBITS) -> np.ndarray:
    _check_cap(c.num_qubits, cap)
    u = np.eye(2**c.num_qubits, dtype=complex)
    for g in c.gates:
        u = _apply(gate_matrix(g.op, g.params), u, g.qubits, c.num_qubits)
    return u


def is_unitary(u: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    return np.linalg.norm(u @ u.conj().T - np.eye(u.shape[0])) <= tol


def _wrap(beta: float) -> float:
    """Map an angle into (-pi, pi]."""
    beta = math.remainder(beta, 2 * math.pi)
    return math.pi if beta <= -math.pi else beta


def equiv_up_to_phase(u: np.ndarray, v: np.ndarray, tol: float = EQUIV_TOL) -> Optional[float]:
    """Return beta with u = e^{i beta} v entrywise within `tol`, else None."""
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch {u.shape} vs {v.shape}")
    k = np.unravel_index(np.argmax(np.abs(v)), v.shape)
    if abs(v[k]) < tol or abs(u[k]) < tol:
        return None
    beta = _wrap(cmath.phase(u[k] / v[k]))
    if np.max(np.abs(u - cmath.exp(1j * beta) * v)) > tol:
        return None
    return beta


def verify_equivalence(a: Circuit, b: Circuit, tol: float = EQUIV_TOL, cap: int = MAX_QUBITS) -> Optional[float]:
    if a.num_qubits != b.num_qubits:
        raise ValueError(f"qubit count mismatch: {a.num_qubits} vs {b.num_qubits}")
    _check_cap(a.num_qubits, cap)
    return equiv_up_to_phase(circuit_unitary(a, cap), circuit_unitary(b, cap), tol)


# -- commutation ---------------------------------------------------------------

_commute_memo: dict[tuple, bool] = {}
_commute_lock = threading.Lock()


def _shape_key(a: Gate, b: Gate) -> tuple:
    local: dict[int, int] = {}
    for q in a.qubits + b.qubits:
        local.setdefault(q, len(local))
    return (a.op, tuple(local[q] for q in a.qubits), b.op, tuple(local[q] for q in b.qubits)), len(local)


def commute_exact(a: Gate, b: Gate, tol: float = COMMUTE_TOL) -> bool:
    """Direct check at the gates' actual angles (no memo)."""
    local: dict[int, int] = {}
    for q in a.qubits + b.qubits:
        local.setdefault(q, len(local))
    n = len(local)
    ua = gate_unitary(Gate(a.op, tuple(local[q] for q in a.qubits), a.params), n)
    ub = gate_unitary(Gate(b.op, tuple(local[q] for q in b.qubits), b.params), n)
    return np.linalg.norm(ua @ ub - ub @ ua) <= tol


def commutes(a: Gate, b: Gate) -> bool:
    """Whether two gates commute, decided angle-generically.

    Disjoint gates commute trivially. Otherwise the answer is cached per
    (opcode pair, wire-overlap shape); parametric gates are tested at
    COMMUTE_SAMPLES angles from a fixed-seed generator, so the result does
    not depend on the gates' actual angles.
    """
    if not set(a.qubits) & set(b.qubits):
        return True
    key, n = _shape_key(a, b)
    hit = _commute_memo.get(key)
    if hit is not None:
        return hit
    rng = np.random.default_rng(COMMUTE_SEED)
    qa, qb = key[1], key[3]
    result = True
    for _ in range(COMMUTE_SAMPLES):
        pa = tuple(rng.uniform(-math.pi, math.pi, GATE_TABLE[a.op][1]))
        pb = tuple(rng.uniform(-math.pi, math.pi, GATE_TABLE[b.op][1]))
        if not commute_exact(Gate(a.op, qa, pa), Gate(b.op, qb, pb)):
            result = False
            break
        if not pa and not pb:
            break
    with _commute_lock:
        _commute_memo.setdefault(key, result)
    return result
