"""Command line entry point and experiment runner.

Exit codes: 0 success, 2 invalid arguments or configuration, 3 a run
finished but its result failed a check (invalid labeling, failed audit,
rejected proof, ...).

Files are written below ``--out`` or, if absent, below the directory named by
the ``LCL_LAB_OUT`` environment variable; without either, results go to
stdout only.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from pathlib import Path
from typing import Any, Sequence

import jsonschema

from . import decomp, gadget, lll, sim, solvers
from .classes import EmptyClassError, FFunction, derive_f
from .graph import from_json, make_family_instance, random_tree, to_json
from .lcl import check_node_edge
from .problems import LIBRARY, get_problem

OUT_ENV = "LCL_LAB_OUT"
EXIT_OK, EXIT_INVALID, EXIT_CHECK = 0, 2, 3


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------- configuration

_POLICY = {"type": "object", "additionalProperties": False,
           "properties": {"mode": {"enum": ["LOCAL", "CONGEST"]}, "c": {"type": "integer", "minimum": 1}}}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["scenario"],
    "properties": {
        "scenario": {"enum": ["superlog-scaling", "diameter-solve", "decompose", "lll-run", "gadget-sweep"]},
        "problem": {"type": "string"},
        "graph": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "n": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
                "max_degree": {"type": "integer", "minimum": 2},
                "levels": {"type": "array", "items": {"type": "integer", "minimum": 2}},
                "top_levels": {"type": "array", "items": {"type": "integer", "minimum": 1}},
            },
        },
        "gamma": {"oneOf": [{"type": "integer", "minimum": 1}, {"const": "sqrt"}]},
        "l": {"type": "integer", "minimum": 1},
        "policy": _POLICY,
        "seeds": {"type": "array", "items": {"type": "integer"}, "minItems": 1},
        "output": {"type": "object", "additionalProperties": False,
                   "properties": {"prefix": {"type": "string", "pattern": "^[A-Za-z0-9_.-]+$"}}},
    },
}

DEFAULTS = {"problem": "maximal-matching", "gamma": 1, "l": 2,
            "policy": {"mode": "CONGEST", "c": 32}, "seeds": [0],
            "output": {"prefix": "experiment"}}


def parse_config(text: str) -> dict:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not JSON: {exc}") from None
    validate_config(data)
    return data


def validate_config(data: Any) -> None:
    try:
        jsonschema.validate(data, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {exc.message}") from None
    if "problem" in data and data["problem"] not in LIBRARY and data["problem"] != "contrived-unsolvable":
        raise ConfigError(f"unknown problem id {data['problem']!r}")


def serialize_config(config: dict) -> str:
    return json.dumps(config, sort_keys=True, indent=2) + "\n"


def _setting(config: dict, key: str):
    return config.get(key, DEFAULTS[key])


def _policy(setting: dict) -> sim.BandwidthPolicy:
    return sim.BandwidthPolicy.parse(setting.get("mode", "CONGEST"), setting.get("c", 32))


# ---------------------------------------------------------------- experiments

def superlog_row(problem_name: str, n: int, seed: int, gamma, l: int, policy: sim.BandwidthPolicy,
                 max_degree: int = 3) -> dict:
    problem = get_problem(problem_name, max_degree)
    tree = random_tree(n, max_degree, seed)
    row = {"n": n, "seed": seed, "gamma": decomp.resolve_gamma(gamma, n), "l": l}
    try:
        outcome = solvers.solve_superlog(problem, tree, gamma, l, FFunction(l), policy, seed=seed)
    except EmptyClassError as exc:
        return {**row, "valid": False, "rounds": None, "max_message_bits": None,
                "audit_passed": None, "error": str(exc)}
    valid = outcome.solved and not check_node_edge(problem, tree, outcome.labeling)
    audits = outcome.audits(policy)
    return {**row, "valid": valid, "rounds": outcome.rounds,
            "max_message_bits": outcome.max_message_bits,
            "audit_passed": all(a.passed for a in audits),
            "rounds_per_log2n": round(outcome.rounds / math.log2(n), 4),
            "rounds_per_sqrtn": round(outcome.rounds / math.sqrt(n), 4), "error": None}


def diameter_row(problem_name: str, n: int, seed: int, policy: sim.BandwidthPolicy, max_degree: int = 3) -> dict:
    problem = get_problem(problem_name, max_degree)
    tree = random_tree(n, max_degree, seed)
    outcome = solvers.solve_diameter(problem, tree, policy, seed)
    valid = outcome.solved and not check_node_edge(problem, tree, outcome.labeling)
    return {"n": n, "seed": seed, "solved": outcome.solved, "valid": valid, "rounds": outcome.rounds,
            "diameter": tree.diameter(), "max_message_bits": outcome.max_message_bits,
            "audit_passed": all(a.passed for a in outcome.audits(policy))}


def decompose_row(n: int, seed: int, gamma, l: int, max_degree: int = 3, distributed: bool = False,
                  policy: sim.BandwidthPolicy = sim.LOCAL) -> dict:
    tree = random_tree(n, max_degree, seed)
    row: dict = {"n": n, "seed": seed, "l": l}
    if distributed:
        deco, result = decomp.rake_compress_distributed(tree, gamma, l, policy, seed=seed)
        row.update(rounds=result.trace.rounds, max_message_bits=result.trace.max_bits(),
                   audit_passed=sim.audit(result.trace, policy, n).passed)
    else:
        deco = decomp.rake_compress(tree, gamma, l)
    rep = decomp.layer_counts(deco, n)
    problems = decomp.validate(deco, tree)
    row.update(gamma=deco.gamma, layers=rep.layers, sublayers=rep.sublayers,
               layers_per_log2n=round(rep.ratio, 4), violations=len(problems))
    return row


def lll_row(n: int, seed: int, x: float, h0: int = 10, n0: int | None = None) -> dict:
    alg = lll.threshold_fail(h0, n0=n0)
    tree = random_tree(n, 3, seed)
    try:
        outcome = lll.solve_pipeline(alg, tree, seed, x=x)
    except lll.CriterionFailed as exc:
        return {"n": n, "seed": seed, "valid": False, "failed": f"criterion: {exc}", "components": None,
                "max_size": None, "unset": None, "rounds": None}
    return {"n": n, **outcome.summary()}


def gadget_row(levels: int, top_levels: int) -> dict:
    inst = make_family_instance(levels, top_levels)
    verdicts = gadget.check_c_proof(gadget.label_family_instance(inst))
    return {"levels": levels, "top_levels": top_levels, "n": inst.graph.n,
            "passes": verdicts.ok, "failing_nodes": len(verdicts.failures),
            "single_column_notes": len(verdicts.notes)}


def experiment_rows(config: dict) -> list[dict]:
    validate_config(config)
    scenario = config["scenario"]
    graph = config.get("graph", {})
    seeds = _setting(config, "seeds")
    degree = graph.get("max_degree", 3)
    policy = _policy(_setting(config, "policy"))
    if scenario == "superlog-scaling":
        sizes = graph.get("n", [2 ** k for k in range(10, 18)])
        return [superlog_row(_setting(config, "problem"), n, s, _setting(config, "gamma"),
                             _setting(config, "l"), policy, degree) for n in sizes for s in seeds]
    if scenario == "diameter-solve":
        return [diameter_row(_setting(config, "problem"), n, s, policy, degree)
                for n in graph.get("n", [64]) for s in seeds]
    if scenario == "decompose":
        return [decompose_row(n, s, _setting(config, "gamma"), _setting(config, "l"), degree)
                for n in graph.get("n", [256]) for s in seeds]
    if scenario == "lll-run":
        return [lll_row(n, s, 2.0 ** -8) for n in graph.get("n", [1000]) for s in seeds]
    return [gadget_row(a, b) for a in graph.get("levels", [2, 3]) for b in graph.get("top_levels", [1, 2])]


def rows_to_csv(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    fields: list[str] = []
    for row in rows:
        fields.extend(k for k in row if k not in fields)
    writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _cell(row.get(k)) for k in fields})
    return buf.getvalue()


def _cell(value):
    if isinstance(value, (list, dict)):
        return json.dumps(value, sort_keys=True)
    return "" if value is None else value


def run_experiment(config: dict, out_dir: str | os.PathLike) -> list[Path]:
    """Write <prefix>.json (config plus summary) and <prefix>.csv (one row per run)."""
    rows = experiment_rows(config)
    prefix = _setting(config, "output").get("prefix", "experiment")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = {"config": config, "runs": len(rows),
               "all_valid": all(r.get("valid", r.get("passes", True)) is not False for r in rows),
               "rows": rows}
    paths = [out / f"{prefix}.json", out / f"{prefix}.csv"]
    paths[0].write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n")
    paths[1].write_text(rows_to_csv(rows))
    return paths


# ---------------------------------------------------------------- command handlers
# Each handler returns (payload, ok).  A payload with "rows" renders as CSV rows.

def _load_tree(args) -> Any:
    if args.graph:
        return from_json(Path(args.graph).read_text())
    return random_tree(args.n, args.max_degree, args.seed)


def cmd_solve(args):
    problem = get_problem(args.problem, args.max_degree)
    tree = _load_tree(args)
    policy = sim.BandwidthPolicy.parse(args.policy)
    if args.mode == "diameter":
        outcome = solvers.solve_diameter(problem, tree, policy, args.seed)
    else:
        gamma = args.gamma if args.gamma == "sqrt" else int(args.gamma)
        try:
            outcome = solvers.solve_superlog(problem, tree, gamma, args.l, FFunction(args.l), policy,
                                             seed=args.seed)
        except EmptyClassError as exc:
            return {"problem": args.problem, "n": tree.n, "solved": False, "error": str(exc)}, False
    violations = check_node_edge(problem, tree, outcome.labeling) if outcome.solved else None
    audits = outcome.audits(policy)
    payload = {"problem": args.problem, "mode": args.mode, "n": tree.n, "solved": outcome.solved,
               "valid": outcome.solved and not violations, "rounds": outcome.rounds,
               "max_message_bits": outcome.max_message_bits,
               "audit_passed": all(a.passed for a in audits)}
    if args.labeling and outcome.solved:
        payload["labeling"] = [[v, p, lab] for (v, p), lab in sorted(outcome.labeling.items())]
    # an unsolvable instance reported as such is a correct answer, not a failed check
    ok = payload["audit_passed"] and (payload["valid"] or not outcome.solved)
    return payload, ok


def cmd_decompose(args):
    gamma = args.gamma if args.gamma == "sqrt" else int(args.gamma)
    row = decompose_row(args.n, args.seed, gamma, args.l, args.max_degree, args.distributed,
                        sim.BandwidthPolicy.parse(args.policy))
    return row, row["violations"] == 0 and row.get("audit_passed", True)


def cmd_derive_f(args):
    problem = get_problem(args.problem, args.max_degree)
    gamma = args.gamma if args.gamma == "sqrt" else int(args.gamma)
    trees = [random_tree(1 + (s * 7919 + args.seed) % args.n_max, args.max_degree, args.seed + s)
             for s in range(args.trees)]
    stress = [random_tree(args.stress_n, args.max_degree, args.seed + 10_000 + s) for s in range(args.stress)]
    result = derive_f(problem, gamma, trees, range(1, args.l_max + 1), stress=stress)
    payload = {"problem": args.problem, "found": result.found, "tried_l": result.tried_l,
               "evaluations": result.evaluations, "reason": result.reason,
               "l": result.f.l if result.found else None,
               "overrides": len(result.f.overrides) if result.found else None}
    if result.found:
        payload["f"] = json.loads(result.f.to_json())
    return payload, True


def parse_seeds(text: str) -> list[int]:
    """"3", "0,2,5" or an inclusive range "0..9"."""
    try:
        if ".." in text:
            lo, hi = text.split("..")
            return list(range(int(lo), int(hi) + 1))
        return [int(s) for s in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad seed list {text!r}") from None


def cmd_lll_run(args):
    rows = [lll_row(args.n, s, args.x, args.h0, args.n0) for s in args.seeds]
    return {"rows": rows}, all(r["valid"] for r in rows)


def cmd_gadget(args):
    inst = make_family_instance(args.levels, args.top_levels)
    labeled = gadget.label_family_instance(inst)
    base = {"levels": args.levels, "top_levels": args.top_levels, "n": inst.graph.n,
            "edges": len(inst.graph.edges)}
    if args.action == "make":
        counts = {t: sum(1 for tags in inst.tags if t in tags) for t in sorted({t for s in inst.tags for t in s})}
        return {**base, "height": inst.height, "width": inst.width, "tag_counts": counts}, True
    if args.action == "label":
        return {**base, "graph": json.loads(to_json(labeled))}, True
    if args.action == "bound":
        rep = gadget.bottleneck_report(inst, args.bits)
        return {**base, **rep.to_json()}, True
    if args.action == "check":
        if not args.mutations:
            verdicts = gadget.check_c_proof(labeled, single_column=not args.strict)
            return {**base, **verdicts.to_json()}, verdicts.ok
        rows = []
        for mutated, mutation in gadget.mutations(labeled, args.mutations, args.seed):
            verdicts = gadget.check_c_proof(mutated)
            rows.append({**mutation.to_json(), "detected": not verdicts.ok,
                         "local": gadget.failure_near(labeled, verdicts, mutation)})
        return {**base, "rows": rows}, all(r["detected"] and r["local"] for r in rows)
    # prove
    cases = ([(labeled, None)] if not args.mutations
             else gadget.mutations(labeled, args.mutations, args.seed))
    rows = []
    for graph, mutation in cases:
        run = gadget.solve_pi_bad(graph)
        accepted = gadget.check_c_bad(graph, run.outputs).ok
        uncovered = gadget.coverage(graph, run.outputs)
        all_empty = all(x is None for x in run.outputs.values())
        row = {**(mutation.to_json() if mutation else {"kind": "none"}), "accepted": accepted,
               "uncovered": len(uncovered), "all_empty": all_empty, "rounds": run.rounds,
               "rounds_per_log2n": round(run.rounds / math.log2(graph.n), 4)}
        row["ok"] = accepted and (all_empty if mutation is None else not uncovered)
        rows.append(row)
    return {**base, "rows": rows}, all(r["ok"] for r in rows)


def read_trace_csv(text: str) -> sim.Trace:
    reader = csv.DictReader(io.StringIO(text))
    trace = sim.Trace()
    for rec in reader:
        trace.messages.append((int(rec["round"]), int(rec["src"]), int(rec["dst"]), int(rec["bits"])))
    trace.rounds = max((m[0] for m in trace.messages), default=0)
    return trace


def cmd_audit(args):
    trace = read_trace_csv(Path(args.trace).read_text())
    policy = sim.BandwidthPolicy.parse(args.policy, args.c)
    verdict = sim.audit(trace, policy, args.n)
    return verdict.as_dict(), verdict.passed


def cmd_run(args):
    config = parse_config(Path(args.config).read_text())
    out_dir = _out_dir(args)
    if out_dir is None:
        rows = experiment_rows(config)
        return {"rows": rows}, True
    paths = run_experiment(config, out_dir)
    summary = json.loads(paths[0].read_text())
    return {"written": [str(p) for p in paths], "runs": summary["runs"],
            "all_valid": summary["all_valid"]}, summary["all_valid"]


# ---------------------------------------------------------------- argument parsing

def _out_dir(args) -> str | None:
    return getattr(args, "out", None) or os.environ.get(OUT_ENV) or None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lcl-lab", description="LCL algorithms on trees, LLL shattering, and gadget proofs.")
    parser.add_argument("--format", choices=["json", "csv"], default="json")
    parser.add_argument("--out", help=f"directory for result files (default: ${OUT_ENV})")
    # the same two options are also accepted after the subcommand
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=["json", "csv"], default=argparse.SUPPRESS)
    common.add_argument("--out", default=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, **kw):
        return sub.add_parser(name, parents=[common], **kw)

    def tree_args(p, n=64):
        p.add_argument("--n", type=int, default=n)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--max-degree", type=int, default=3)

    p = command("solve", help="solve a library problem on a random tree")
    p.add_argument("--problem", required=True, choices=sorted(LIBRARY) + ["contrived-unsolvable"])
    tree_args(p)
    p.add_argument("--graph", help="JSON graph file instead of a random tree")
    p.add_argument("--mode", choices=["diameter", "superlog"], default="diameter")
    p.add_argument("--gamma", default="1")
    p.add_argument("--l", type=int, default=2)
    p.add_argument("--policy", type=str.upper, choices=["LOCAL", "CONGEST"], default="CONGEST")
    p.add_argument("--labeling", action="store_true", help="include the output labeling")
    p.set_defaults(handler=cmd_solve)

    p = command("decompose", help="rake-and-compress decomposition statistics")
    tree_args(p, 256)
    p.add_argument("--gamma", default="1")
    p.add_argument("--l", type=int, default=4)
    p.add_argument("--distributed", action="store_true")
    p.add_argument("--policy", type=str.upper, choices=["LOCAL", "CONGEST"], default="CONGEST")
    p.set_defaults(handler=cmd_decompose)

    p = command("derive-f", help="search a cut-label function for compress paths")
    p.add_argument("--problem", required=True, choices=sorted(LIBRARY))
    p.add_argument("--gamma", default="1")
    p.add_argument("--l-max", type=int, default=4)
    p.add_argument("--trees", type=int, default=10)
    p.add_argument("--n-max", type=int, default=30)
    p.add_argument("--stress", type=int, default=0, help="extra larger trees checked by the rake-only verdict")
    p.add_argument("--stress-n", type=int, default=300)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-degree", type=int, default=3)
    p.set_defaults(handler=cmd_derive_f)

    p = command("lll-run", help="shattering pipeline with the threshold toy algorithm")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--seeds", type=parse_seeds, default=[0], help='"0..9", "1,4" or "3"')
    p.add_argument("--n0", type=int, help="declared size for the algorithm (default 2**h0)")
    p.add_argument("--x", type=float, default=2.0 ** -8)
    p.add_argument("--h0", type=int, default=10)
    p.set_defaults(handler=cmd_lll_run)

    p = command("gadget", help="pyramid gadget: build, label, check, prove invalidity, bound")
    p.add_argument("action", choices=["make", "label", "check", "prove", "bound"])
    p.add_argument("--levels", type=int, default=3)
    p.add_argument("--top-levels", type=int, default=2)
    p.add_argument("--mutations", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bits", type=int, default=64)
    p.add_argument("--strict", action="store_true", help="literal glued patterns only")
    p.set_defaults(handler=cmd_gadget)

    p = command("audit", help="bandwidth audit of a message trace CSV")
    p.add_argument("--trace", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--policy", type=str.upper, choices=["LOCAL", "CONGEST"], default="CONGEST")
    p.add_argument("--c", type=int, default=32)
    p.set_defaults(handler=cmd_audit)

    p = command("run", help="run an experiment configuration file")
    p.add_argument("config")
    p.set_defaults(handler=cmd_run)
    return parser


def render(payload: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(payload, sort_keys=True, indent=2, default=str) + "\n"
    if "rows" in payload:
        return rows_to_csv(payload["rows"])
    return rows_to_csv([{k: v for k, v in payload.items()}])


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        payload, ok = args.handler(args)
    except (ConfigError, KeyError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    text = render(payload, args.format)
    sys.stdout.write(text)
    out_dir = _out_dir(args)
    if out_dir is not None and args.command != "run":
        path = Path(out_dir)
        path.mkdir(parents=True, exist_ok=True)
        (path / f"{args.command}.{args.format}").write_text(text)
    return EXIT_OK if ok else EXIT_CHECK


if __name__ == "__main__":
    raise SystemExit(main())
