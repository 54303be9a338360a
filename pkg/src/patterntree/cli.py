"""Command line entry point: optimize, verify, rules, bench, corpus."""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

from .circuit import CircuitError, emit_circuit, parse_circuit
from .pattern import RuleError, check_rule, load_rules, rules_from_data, save_rules, validate_rule
from .scheduler import OptimizeConfig, RewriteError, optimize, optimize_without_tree
from .semantics import CapacityError, verify_equivalence
from .tree import build_sched_tree, candidate_count, generate_prefix_rules, prefix_count, tree_to_dot

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2
EXIT_CAPACITY = 3

BENCH_COLUMNS = [
    "circuit",
    "prefixN",
    "withTree",
    "gateBefore",
    "gateAfter",
    "feasibilityChecks",
    "wallNanos",
    "passes",
    "status",
]


class CliError(Exception):
    pass


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("PTREE_SEED")
    if env is None or env == "":
        return 0
    try:
        return int(env)
    except ValueError:
        raise CliError(f"PTREE_SEED must be an integer, got {env!r}") from None


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as e:
        raise CliError(f"cannot read {path}: {e.strerror}") from None


def _load_circuit(path: str):
    try:
        return parse_circuit(_read(path))
    except CircuitError as e:
        raise CliError(f"{path}: {e}") from None


def _load_rules(path: str, validate: bool = True):
    try:
        return load_rules(_read(path), validate=validate)
    except RuleError as e:
        raise CliError(f"{path}: {e}") from None


def _write(path: str, text: str) -> None:
    if path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _config(args) -> OptimizeConfig:
    return OptimizeConfig(
        max_passes=args.max_passes,
        prefix_n=args.prefix_n,
        prefix_pct=args.prefix_pct if args.prefix_pct is not None else 100.0,
        window=args.window,
        seed=_seed(args),
        verify_each_rewrite=args.verify_each,
        preprocess=args.preprocess,
        literal_walk=args.literal_walk,
    )


# -- optimize -----------------------------------------------------------------------


def cmd_optimize(args) -> int:
    c = _load_circuit(args.input)
    rules = _load_rules(args.rules)
    cfg = _config(args)
    try:
        if args.no_tree:
            out, report = optimize_without_tree(c, rules, cfg)
        else:
            out, report = optimize(c, rules, cfg)
    except RewriteError as e:
        raise CliError(str(e)) from None
    _write(args.output, emit_circuit(out))
    if args.report:
        _write(args.report, json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    print(
        f"gates {report.gate_count_before} -> {report.gate_count_after}, "
        f"{len(report.rewrites)} rewrites, {report.passes} passes, "
        f"{report.stats.feasibility_checks} feasibility checks",
        file=sys.stderr,
    )
    return EXIT_OK


# -- verify -------------------------------------------------------------------------


def cmd_verify(args) -> int:
    a = _load_circuit(args.a)
    b = _load_circuit(args.b)
    try:
        beta = verify_equivalence(a, b, tol=args.tol)
    except CapacityError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CAPACITY
    except ValueError as e:
        raise CliError(str(e)) from None
    if beta is None:
        print("NOT-EQUIVALENT")
        return EXIT_FAIL
    print(f"EQUIVALENT beta={beta!r}")
    return EXIT_OK


# -- rules --------------------------------------------------------------------------


def cmd_rules_validate(args) -> int:
    try:
        rules = rules_from_data(json.loads(_read(args.rules)))
    except (json.JSONDecodeError, RuleError) as e:
        raise CliError(f"{args.rules}: {e}") from None
    bad = []
    for r in rules:
        try:
            check_rule(r)
        except RuleError as e:
            bad.append((r.id, str(e)))
            continue
        if not r.is_prefix and validate_rule(r, samples=args.samples) is None:
            bad.append((r.id, "source and target are not equivalent"))
    ids = [r.id for r in rules]
    for rid in sorted({i for i in ids if ids.count(i) > 1}):
        bad.append((rid, "duplicate id"))
    for rid, why in bad:
        print(f"INVALID {rid}: {why}")
    print(f"{len(rules) - len(bad)}/{len(rules)} rules valid")
    return EXIT_FAIL if bad else EXIT_OK


def cmd_rules_gen_prefix(args) -> int:
    rules = [r for r in _load_rules(args.rules) if not r.is_prefix]
    cands = candidate_count(rules)
    n = args.n if args.n is not None else prefix_count(args.pct, cands)
    prefix = generate_prefix_rules(rules, n)
    _write(args.output, save_rules(list(rules) + prefix))
    print(f"{len(prefix)} prefix rules from {cands} candidates", file=sys.stderr)
    return EXIT_OK


def cmd_rules_dump_tree(args) -> int:
    rules = _load_rules(args.rules)
    base = [r for r in rules if not r.is_prefix]
    prefix = [r for r in rules if r.is_prefix]
    if args.n is not None:
        prefix = generate_prefix_rules(base, args.n)
    tree = build_sched_tree(base, prefix)
    if args.dot:
        text = tree_to_dot(tree)
    else:
        lines = []
        for root in tree.roots:
            stack = [(root, 0)]
            while stack:
                node, d = stack.pop()
                tag = " [prefix]" if node.is_prefix else ""
                lines.append(f"{'  ' * d}{node.id}{tag} cover={node.cover}: {node.pattern}")
                stack.extend((ch, d + 1) for ch in reversed(node.children))
        text = "\n".join(lines) + "\n"
    _write(args.output, text)
    return EXIT_OK


def cmd_rules_stats(args) -> int:
    rules = _load_rules(args.rules)
    base = [r for r in rules if not r.is_prefix]
    print(f"rules: {len(base)}")
    print(f"prefix rules: {len(rules) - len(base)}")
    print(f"candidates: {candidate_count(base)}")
    return EXIT_OK


# -- bench --------------------------------------------------------------------------


def _parse_grid(text: Optional[str], kind) -> Optional[list]:
    if text is None:
        return None
    try:
        return [kind(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise CliError(f"bad grid {text!r}") from None


def _bench_rows(name, circuit_text, rules, cfg_base: OptimizeConfig, grid, baseline: bool) -> list[dict]:
    rows = []
    try:
        c = parse_circuit(circuit_text)
    except CircuitError as e:
        return [{"circuit": name, "status": f"error: {e}"}]
    base = [r for r in rules if not r.is_prefix]
    runs = [(n, True) for n in grid]
    if baseline:
        runs.append((0, False))
    for n, with_tree in runs:
        cfg = OptimizeConfig(**{**cfg_base.__dict__, "prefix_n": n})
        try:
            if with_tree:
                out, rep = optimize(c, base, cfg)
            else:
                out, rep = optimize_without_tree(c, base, cfg)
        except Exception as e:  # recorded, the run continues
            rows.append({"circuit": name, "prefixN": n, "withTree": with_tree, "status": f"error: {e}"})
            continue
        rows.append(
            {
                "circuit": name,
                "prefixN": n,
                "withTree": with_tree,
                "gateBefore": rep.gate_count_before,
                "gateAfter": rep.gate_count_after,
                "feasibilityChecks": rep.stats.feasibility_checks,
                "wallNanos": rep.wall_time_ns,
                "passes": rep.passes,
                "status": "ok",
            }
        )
    return rows


def cmd_bench(args) -> int:
    corpus = Path(args.corpus)
    if not corpus.is_dir():
        raise CliError(f"{corpus} is not a directory")
    files = sorted(corpus.glob("*.qasm"))
    if not files:
        raise CliError(f"no .qasm files in {corpus}")
    rules = [r for r in _load_rules(args.rules) if not r.is_prefix]
    cfg = _config(args)
    cands = candidate_count(rules)
    pcts = _parse_grid(args.pct, float)
    ns = _parse_grid(args.n, int)
    if pcts is not None and ns is not None:
        raise CliError("give either --pct or --n, not both")
    if ns is not None:
        grid, baseline = ns, args.baseline
    elif pcts is not None:
        grid, baseline = [prefix_count(p, cands) for p in pcts], args.baseline
    else:
        grid, baseline = [cfg.resolve_prefix_n(rules)], True
    jobs = max(1, args.jobs)
    work = [(f.stem, f.read_text()) for f in files]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        results = list(pool.map(lambda w: _bench_rows(w[0], w[1], rules, cfg, grid, baseline), work))
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=BENCH_COLUMNS, restval="", lineterminator="\r\n")
    writer.writeheader()
    failed = 0
    for rows in results:
        for row in rows:
            failed += row["status"] != "ok"
            writer.writerow(row)
    _write(args.csv, buf.getvalue())
    if failed:
        print(f"{failed} runs failed", file=sys.stderr)
    return EXIT_FAIL if failed else EXIT_OK


# -- corpus -------------------------------------------------------------------------


def cmd_corpus(args) -> int:
    from .library import generate_rule_library, rule_workload, shared_prefix_corpus, synthetic_corpus

    seed = _seed(args)
    if args.kind == "synthetic":
        corpus = synthetic_corpus(seed=seed, count=args.count or 32)
    elif args.kind == "shared-prefix":
        corpus = shared_prefix_corpus(seed=seed, count=args.count or 12)
    else:
        corpus = rule_workload(generate_rule_library(50, seed=seed), seed=seed, count=args.count or 6)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    for name, c in corpus.items():
        (out / f"{name}.qasm").write_text(emit_circuit(c))
    print(f"wrote {len(corpus)} circuits to {out}", file=sys.stderr)
    return EXIT_OK


def cmd_gen_rules(args) -> int:
    from .library import generate_rule_library, starter_rules

    rules = starter_rules() if args.starter else generate_rule_library(args.count, seed=_seed(args))
    _write(args.output, save_rules(rules))
    return EXIT_OK


# -- parser -------------------------------------------------------------------------


def _add_optimize_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_mutually_exclusive_group()
    g.add_argument("--prefix-n", type=int, help="number of prefix rules to generate")
    g.add_argument("--prefix-pct", type=float, help="percentage of prefix-rule candidates (default 100)")
    p.add_argument("--preprocess", choices=["rz-group", "none"], default="rz-group")
    p.add_argument("--max-passes", type=int, default=8)
    p.add_argument("--window", type=int, default=64, help="search window for gates on unmapped wires")
    p.add_argument("--literal-walk", action="store_true", help="greedy first-child tree descent")
    p.add_argument("--verify-each", action="store_true", help="check every rewrite numerically")
    p.add_argument("--seed", type=int, default=None, help="random seed (falls back to $PTREE_SEED, then 0)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ptree", description="Pattern-tree circuit optimizer")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("optimize", help="optimize a circuit")
    p.add_argument("input")
    p.add_argument("--rules", required=True)
    p.add_argument("-o", "--output", default="-")
    p.add_argument("--report")
    p.add_argument("--no-tree", action="store_true", help="flat rule library baseline")
    _add_optimize_flags(p)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("verify", help="check two circuits for equivalence up to global phase")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--tol", type=float, default=1e-8)
    p.set_defaults(func=cmd_verify)

    rules = sub.add_parser("rules", help="rule library tooling")
    rsub = rules.add_subparsers(dest="rules_command", required=True)
    p = rsub.add_parser("validate")
    p.add_argument("rules")
    p.add_argument("--samples", type=int, default=8)
    p.set_defaults(func=cmd_rules_validate)
    p = rsub.add_parser("gen-prefix")
    p.add_argument("rules")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--n", type=int)
    g.add_argument("--pct", type=float)
    p.add_argument("-o", "--output", default="-")
    p.set_defaults(func=cmd_rules_gen_prefix)
    p = rsub.add_parser("dump-tree")
    p.add_argument("rules")
    p.add_argument("--dot", action="store_true")
    p.add_argument("--n", type=int, help="generate this many prefix rules first")
    p.add_argument("-o", "--output", default="-")
    p.set_defaults(func=cmd_rules_dump_tree)
    p = rsub.add_parser("stats")
    p.add_argument("rules")
    p.set_defaults(func=cmd_rules_stats)
    p = rsub.add_parser("generate", help="write the starter library or a generated one")
    p.add_argument("--starter", action="store_true")
    p.add_argument("--count", type=int, default=50)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("-o", "--output", default="-")
    p.set_defaults(func=cmd_gen_rules)

    p = sub.add_parser("bench", help="with/without-tree and prefix-count experiments")
    p.add_argument("corpus")
    p.add_argument("--rules", required=True)
    p.add_argument("--pct", help="comma-separated percentage grid, e.g. 0,10,20")
    p.add_argument("--n", help="comma-separated prefix-count grid")
    p.add_argument("--baseline", action="store_true", help="add a no-tree row to a sweep")
    p.add_argument("--csv", default="-")
    p.add_argument("--jobs", type=int, default=1)
    _add_optimize_flags(p)
    p.set_defaults(func=cmd_bench, prefix_n=None)

    p = sub.add_parser("corpus", help="write a synthetic corpus")
    p.add_argument("output")
    p.add_argument("--kind", choices=["synthetic", "shared-prefix", "workload"], default="synthetic")
    p.add_argument("--count", type=int)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_corpus)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
