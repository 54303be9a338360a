from __future__ import annotations

import random

import pytest

from oracles import brute_force_matches, random_instance
from patterntree.circuit import canonicalize, gate
from patterntree.matching import (
    MatchingContext,
    MatchStats,
    convex,
    extend,
    feasibility_check,
    match,
    matched_subcircuit,
)
from patterntree.pattern import CircuitPattern, instantiate, pgate
from patterntree.preprocess import float_rz
from patterntree.semantics import verify_equivalence


def circ(*gates, m=None):
    m = m or 1 + max(q for g in gates for q in g.qubits)
    return canonicalize(list(gates), m)


def pat(*gates):
    return CircuitPattern.build(list(gates))


HH = pat(pgate("h", 0), pgate("h", 0))


class TestFeasibility:
    def test_binds_qubit(self):
        stats = MatchStats()
        ctx = feasibility_check(circ(gate("h", 0)), MatchingContext(), pgate("h", 0), 0, stats)
        assert ctx.qmap == {0: 0} and ctx.matched == (0,)
        assert stats.feasibility_checks == 1

    def test_opcode(self):
        stats = MatchStats()
        assert feasibility_check(circ(gate("h", 0)), MatchingContext(), pgate("x", 0), 0, stats) is None
        assert stats.feasibility_checks == 1

    def test_parameter_clash(self):
        c = circ(gate("rz", 0, params=[0.3]), gate("rz", 0, params=[0.5]))
        ctx = MatchingContext(qmap={0: 0}, pmap={0: 0.3}, matched=(0,), anchor=0, wire_last={0: 0})
        assert feasibility_check(c, ctx, pgate("rz", 0, params=["v0"]), 1) is None

    def test_linear_solve(self):
        c = circ(gate("rz", 0, params=[0.3]), gate("rz", 0, params=[1.0]))
        ctx = feasibility_check(c, MatchingContext(), pgate("rz", 0, params=["v0"]), 0)
        ctx = feasibility_check(c, ctx, pgate("rz", 0, params=["2*v1 - v0"]), 1)
        assert ctx.pmap[1] == pytest.approx(0.65)

    def test_angles_modulo_two_pi(self):
        c = circ(gate("rz", 0, params=[-3.0]))
        expr = pgate("rz", 0, params=[repr(-3.0 + 2 * 3.141592653589793)])
        assert feasibility_check(c, MatchingContext(), expr, 0) is not None

    def test_injective(self):
        c = circ(gate("h", 0), gate("h", 1))
        ctx = feasibility_check(c, MatchingContext(), pgate("h", 0), 0)
        assert feasibility_check(c, ctx, pgate("h", 1), 0) is None


class TestExtend:
    def test_next_on_wire(self):
        c = circ(gate("h", 0), gate("h", 0))
        ctx = feasibility_check(c, MatchingContext(), pgate("h", 0), 0)
        (ext,) = extend(c, ctx, pgate("h", 0))
        assert ext.matched == (0, 1)

    def test_blocked(self):
        c = circ(gate("h", 0), gate("x", 0))
        ctx = feasibility_check(c, MatchingContext(), pgate("h", 0), 0)
        assert extend(c, ctx, pgate("h", 0)) == []

    def test_after_rz_float(self):
        c = float_rz(circ(gate("rz", 0, params=[0.3]), gate("cx", 0, 1), gate("rz", 0, params=[0.5])))
        assert [g.op for g in c.gates] == ["rz", "rz", "cx"]
        ctx = feasibility_check(c, MatchingContext(), pgate("rz", 0, params=["v0"]), 0)
        (ext,) = extend(c, ctx, pgate("rz", 0, params=["v1"]))
        assert ext.matched == (0, 1) and ext.pmap[1] == pytest.approx(0.5)

    def test_parent_context_untouched(self):
        c = circ(gate("h", 0), gate("h", 0))
        ctx = feasibility_check(c, MatchingContext(), pgate("h", 0), 0)
        before = (dict(ctx.qmap), ctx.matched, dict(ctx.wire_last))
        extend(c, ctx, pgate("h", 0))
        assert (ctx.qmap, ctx.matched, ctx.wire_last) == before

    def test_fresh_wire_window(self):
        gates = [gate("h", 0)] + [gate("x", 1)] * 10 + [gate("h", 1)]
        c = canonicalize(gates, 2)
        ctx = feasibility_check(c, MatchingContext(), pgate("h", 0), 0)
        assert extend(c, ctx, pgate("h", 1), window=3) == []
        assert len(extend(c, ctx, pgate("h", 1), window=64)) == 1


class TestMatch:
    def test_hh(self):
        ctx = match(circ(gate("h", 0), gate("h", 0)), HH)
        assert ctx.qmap == {0: 0} and ctx.matched == (0, 1)

    def test_hxh_has_no_hh(self):
        assert match(circ(gate("h", 0), gate("x", 0), gate("h", 0)), HH) is None

    def test_anchor_scan(self):
        # canonical order is [H q0, X q1, H q0]
        c = circ(gate("x", 1), gate("h", 0), gate("h", 0))
        assert [g.op for g in c.gates] == ["h", "x", "h"]
        assert match(c, HH).matched == (0, 2)

    def test_cursor(self):
        c = circ(gate("h", 0), gate("h", 0), gate("h", 0))
        assert match(c, HH, 1).matched == (1, 2)
        assert match(c, HH, 2) is None

    def test_continue_from_parent(self):
        c = circ(gate("h", 0), gate("x", 0), gate("h", 0))
        parent = match(c, pat(pgate("h", 0)))
        ctx = match(c, pat(pgate("h", 0), pgate("x", 0), pgate("h", 0)), parent)
        assert ctx.matched == (0, 1, 2)

    def test_context_reuse_is_cheaper(self):
        rng = random.Random(4)
        hits = 0
        for _ in range(200):
            c, pt = random_instance(rng)
            if len(pt.gates) < 2:
                continue
            prefix = CircuitPattern(pt.gates[:-1], pt.num_qubits, pt.num_params)
            s_parent = MatchStats()
            parent = match(c, prefix, 0, s_parent)
            if parent is None:
                continue
            s_ext = MatchStats()
            match(c, pt, parent, s_ext)
            s_full = MatchStats()
            match(c, pt, parent.anchor, s_full)
            assert s_ext.feasibility_checks < s_full.feasibility_checks
            hits += 1
        assert hits > 20


class TestConvex:
    def test_adjacent(self):
        c = circ(gate("h", 0), gate("h", 0))
        assert convex(c, match(c, HH))

    def test_path_through_cx(self):
        c = circ(gate("rz", 0, params=[0.1]), gate("cx", 1, 0), gate("rz", 0, params=[0.2]))
        assert not convex(c, MatchingContext(matched=(0, 2)))

    def test_single(self):
        assert convex(circ(gate("h", 0)), MatchingContext(matched=(0,)))

    def test_side_path(self):
        # matched CX gates joined on one wire, but a path leaves and re-enters via q1
        c = circ(gate("cx", 0, 1), gate("h", 1), gate("cx", 0, 1))
        ctx = MatchingContext(matched=(0, 2))
        assert not convex(c, ctx)


class TestOracle:
    def test_against_brute_force(self):
        rng = random.Random(11)
        found = 0
        for _ in range(400):
            c, pt = random_instance(rng)
            expected = brute_force_matches(c, pt)
            ctx = match(c, pt)
            assert (ctx is not None) == bool(expected), (c, pt)
            if ctx is not None:
                found += 1
                assert ctx.matched in expected
                sub = matched_subcircuit(c, ctx)
                inst = instantiate(pt, ctx.qmap, ctx.pmap, c.num_qubits)
                assert verify_equivalence(sub, inst) is not None
        assert found > 100

    def test_first_match_is_lexicographic(self):
        # depth-first search with ascending candidates returns the smallest assignment
        rng = random.Random(12)
        for _ in range(200):
            c, pt = random_instance(rng)
            expected = brute_force_matches(c, pt)
            ctx = match(c, pt)
            if expected:
                assert ctx.matched == min(expected)

    def test_stats_count_every_check(self):
        c = circ(gate("h", 0), gate("x", 0), gate("h", 0), gate("h", 0))
        stats = MatchStats()
        match(c, HH, 0, stats)
        # anchor 0: h ok, next x fails; anchor 1: x fails; anchor 2: h ok, next h ok
        assert stats.feasibility_checks == 5
