from __future__ import annotations

import itertools
import json
import math
import random
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from patterntree.circuit import gate
from patterntree.library import build_starter_rules, generate_rule_library, starter_rule_text, starter_rules
from patterntree.pattern import (
    CircuitPattern,
    LinExpr,
    RuleError,
    TransformationRule,
    canonical_key,
    check_rule,
    derive_id,
    instantiate,
    load_rules,
    make_rule,
    pgate,
    precedes,
    save_rules,
    validate_rule,
)
from patterntree.semantics import circuit_unitary

FIXTURES = Path(__file__).parent / "fixtures"


def pat(*gates):
    return CircuitPattern.build(list(gates))


class TestLinExpr:
    def test_parse_and_print(self):
        e = LinExpr.parse("1/2*pi - v1 + 0.5")
        assert e.coef(1) == -1
        assert e.pi_coef == Fraction(1, 2)
        assert e.const == Fraction(1, 2)
        assert LinExpr.parse(str(e)) == e

    def test_like_terms_combine(self):
        assert LinExpr.parse("v0 + v0") == LinExpr.symbol(0).scale(2)

    def test_evaluate(self):
        assert LinExpr.parse("v0 + v1").evaluate([0.3, 0.5]) == pytest.approx(0.8)
        assert LinExpr.parse("-pi/4").evaluate([]) == pytest.approx(-math.pi / 4)

    @pytest.mark.parametrize("text", ["v0*v1", "sin(v0)", "x", "v0/v1", "pi*pi", "v0**2"])
    def test_nonlinear_rejected(self, text):
        with pytest.raises(RuleError):
            LinExpr.parse(text)


class TestInstantiate:
    def test_two_rz(self):
        pt = pat(pgate("rz", 0, params=["v0"]), pgate("rz", 0, params=["v1"]))
        c = instantiate(pt, [0], [0.3, 0.5], 1)
        assert c.gates == (gate("rz", 0, params=[0.3]), gate("rz", 0, params=[0.5]))

    def test_sum_expression(self):
        pt = pat(pgate("rz", 0, params=["v0 + v1"]))
        c = instantiate(pt, [0], [0.3, 0.5], 1)
        assert c.gates[0].params[0] == pytest.approx(0.8)

    def test_two_qubit_example(self):
        # CX then X on a0 and Rz(theta) on a1 with (theta, phi) = (pi/2, pi)
        pt = pat(pgate("cx", 0, 1), pgate("x", 0), pgate("rz", 1, params=["v0"]), pgate("rz", 0, params=["v1"]))
        c = instantiate(pt, [0, 1], [math.pi / 2, math.pi], 2)
        assert [g.op for g in c.gates] == ["cx", "x", "rz", "rz"]
        assert c.gates[2].params[0] == pytest.approx(math.pi / 2)
        assert c.gates[3].params[0] == pytest.approx(math.pi)

    def test_canonical_order_restored(self):
        pt = pat(pgate("h", 0), pgate("x", 1))
        c = instantiate(pt, [1, 0], [], 2)
        assert [g.op for g in c.gates] == ["x", "h"]

    def test_non_injective(self):
        with pytest.raises(ValueError):
            instantiate(pat(pgate("cx", 0, 1)), [0, 0], [], 2)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            instantiate(pat(pgate("rz", 0, params=["v0"])), [0], [0.1, 0.2], 1)

    def test_substitution_commutes_with_evaluation(self):
        rng = random.Random(1)
        pt = pat(pgate("rz", 0, params=["2*v0 - v1 + pi/3"]), pgate("cx", 0, 1), pgate("rz", 1, params=["v1"]))
        for _ in range(10):
            v = [rng.uniform(-3, 3), rng.uniform(-3, 3)]
            direct = pat(pgate("rz", 0, params=[repr(2 * v[0] - v[1] + math.pi / 3)]), pgate("cx", 0, 1), pgate("rz", 1, params=[repr(v[1])]))
            a = circuit_unitary(instantiate(pt, [0, 1], v, 2))
            b = circuit_unitary(instantiate(direct, [0, 1], [], 2))
            assert np.allclose(a, b, atol=1e-12)


class TestPrecedes:
    def test_strict_prefix(self):
        assert precedes(pat(pgate("h", 0)), pat(pgate("h", 0), pgate("x", 0)))

    def test_irreflexive(self):
        assert not precedes(pat(pgate("h", 0)), pat(pgate("h", 0)))

    def test_mismatch(self):
        assert not precedes(pat(pgate("x", 0)), pat(pgate("h", 0), pgate("x", 0)))

    def test_renaming(self):
        a = CircuitPattern((pgate("rz", 3, params=["v5"]),), 4, 6)
        assert precedes(a, pat(pgate("rz", 0, params=["v0"]), pgate("h", 0)))

    def test_strict_partial_order_on_library(self):
        sources = [r.source for r in generate_rule_library(30, seed=4)] + [r.source for r in build_starter_rules()]
        for a in sources:
            assert not precedes(a, a)
        for a, b, c in itertools.product(sources[:20], repeat=3):
            if precedes(a, b) and precedes(b, c):
                assert precedes(a, c)


class TestCanonicalKey:
    def test_qubit_renaming(self):
        assert canonical_key(CircuitPattern((pgate("h", 3),), 4, 0)) == canonical_key(pat(pgate("h", 0)))

    def test_ordered_qubits(self):
        # a lone CX is a relabelling of its reverse; direction shows once another gate fixes a wire
        assert canonical_key(pat(pgate("cx", 1, 0))) == canonical_key(pat(pgate("cx", 0, 1)))
        assert canonical_key(pat(pgate("h", 0), pgate("cx", 1, 0))) != canonical_key(pat(pgate("h", 0), pgate("cx", 0, 1)))

    def test_symbol_renaming(self):
        a = CircuitPattern((pgate("rz", 0, params=["v1"]),), 1, 2)
        assert canonical_key(a) == canonical_key(pat(pgate("rz", 0, params=["v0"])))

    def test_invariant_under_permutations(self):
        rng = random.Random(2)
        base = [pgate("cx", 0, 1), pgate("rz", 1, params=["v0"]), pgate("cx", 1, 2), pgate("rz", 2, params=["v1 + pi"])]
        key = canonical_key(base)
        for _ in range(20):
            qp = rng.sample(range(3), 3)
            sp = rng.sample(range(2), 2)
            renamed = [
                pgate(g.op, *[qp[q] for q in g.qubits], params=[e.renamed({i: sp[i] for i in range(2)}) for e in g.params])
                for g in base
            ]
            assert canonical_key(renamed) == key

    def test_derived_id_stable(self):
        r = make_rule(None, [pgate("h", 0), pgate("h", 0)], [])
        assert r.id == derive_id(r)
        assert r.id.startswith("r-")


class TestValidate:
    def test_hh(self, rules_by_id):
        assert validate_rule(rules_by_id["R1"]) == pytest.approx(0.0, abs=1e-8)

    def test_hxh_phase(self, rules_by_id):
        assert validate_rule(rules_by_id["R2"]) == pytest.approx(math.pi / 2, abs=1e-8)

    def test_rz_merge(self, rules_by_id):
        assert validate_rule(rules_by_id["R3"]) == pytest.approx(0.0, abs=1e-8)

    def test_wrong_merge_rejected(self):
        r = make_rule("bad", [pgate("rz", 0, params=["v0"]), pgate("rz", 0, params=["v1"])], [pgate("rz", 0, params=["v0 - v1"])])
        assert validate_rule(r) is None

    def test_angle_dependent_phase_rejected(self):
        # Rz(v0) vs identity agrees only at v0 = 0
        r = make_rule("bad", [pgate("rz", 0, params=["v0"]), pgate("x", 0), pgate("x", 0)], [pgate("x", 0), pgate("x", 0)])
        assert validate_rule(r) is None

    def test_prefix_has_no_target(self):
        with pytest.raises(RuleError):
            validate_rule(make_rule("p", [pgate("h", 0)], None))


class TestRuleChecks:
    def test_cost_preserving(self):
        with pytest.raises(RuleError, match="cost-preserving rule"):
            check_rule(make_rule("x", [pgate("h", 0)], [pgate("h", 0)]))

    def test_cost_increasing(self):
        with pytest.raises(RuleError, match="cost-increasing rule"):
            check_rule(make_rule("x", [pgate("h", 0)], [pgate("h", 0), pgate("x", 0), pgate("x", 0)]))

    def test_target_symbol_not_in_source(self):
        r = TransformationRule(
            "x", pat(pgate("rz", 0, params=["v0"]), pgate("h", 0)), CircuitPattern((pgate("rz", 0, params=["v1"]),), 1, 2), False
        )
        with pytest.raises(RuleError):
            check_rule(r)

    def test_source_binds_two_symbols(self):
        r = make_rule("x", [pgate("rz", 0, params=["v0 + v1"]), pgate("h", 0)], [pgate("h", 0)][:0])
        with pytest.raises(RuleError):
            check_rule(r)

    def test_prefix_flag_consistency(self):
        with pytest.raises(RuleError):
            check_rule(TransformationRule("x", pat(pgate("h", 0)), None, False))


class TestRuleFiles:
    def test_starter_set(self):
        rules = load_rules(starter_rule_text())
        assert [r.id for r in rules] == ["R1", "R2", "R3", "R4", "R5"]
        assert all(r.cost_delta < 0 for r in rules)

    def test_shipped_file_matches_builder(self):
        assert starter_rule_text() == save_rules(build_starter_rules())

    def test_round_trip(self):
        rules = generate_rule_library(20, seed=3)
        text = save_rules(rules)
        again = load_rules(text)
        assert save_rules(again) == text

    def test_cost_preserving_file(self):
        with pytest.raises(RuleError, match="cost-preserving rule"):
            load_rules((FIXTURES / "cost_preserving.json").read_text())

    def test_broken_fixture_lists_offender(self):
        with pytest.raises(RuleError) as e:
            load_rules((FIXTURES / "broken_rules.json").read_text())
        assert e.value.offenders == ["bad-xx"]

    def test_duplicates(self):
        data = json.loads(starter_rule_text())
        copy = dict(data[0], id="R1-copy")
        with pytest.raises(RuleError, match="duplicate rules"):
            load_rules(json.dumps(data + [copy]))
        with pytest.raises(RuleError, match="duplicate rule ids"):
            load_rules(json.dumps(data + [dict(data[1], id="R1")]))

    def test_not_json(self):
        with pytest.raises(RuleError):
            load_rules("{")

    def test_empty(self):
        assert load_rules(save_rules([])) == []

    def test_loaded_rules_validate(self):
        for r in starter_rules():
            assert validate_rule(r) is not None
