"""Command-line front end.

Commands::

    marginfer infer RULES EVIDENCE            likelihoods and posterior
    marginfer swap RULES EVIDENCE SCRIPT      apply a JSON list of rule exchanges
    marginfer oracle-check                    fast path vs explicit oracle
    marginfer study-agreement                 information/norm sign agreement
    marginfer bench-led                       noisy LED digit benchmark

Exit status: 0 on success, 1 for unreadable or invalid input, 2 for numerical
failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import experiments, oracle
from .config import FORMATS, Config
from .constraint import ConstraintError, ConstraintSystem, build_system
from .inference import Engine, InferenceError, InferenceResult, classify, solve_system
from .instances import random_instance
from .rulebase import (RuleBaseError, firing_rules, parse_evidence, parse_rulebase,
                       rule_from_dict)

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2


class InputError(Exception):
    pass


# ---------------------------------------------------------------------------
# formatting helpers
# ---------------------------------------------------------------------------

def _json(doc) -> str:
    return json.dumps(doc, indent=2) + "\n"


def system_csv(system: ConstraintSystem, rule_ids) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    labels = list(rule_ids) + ["normalization"]
    writer.writerow(["C"] + labels)
    for label, row in zip(labels, system.C):
        writer.writerow([label] + [repr(float(v)) for v in row])
    writer.writerow([])
    classes = list(system.b)
    writer.writerow(["row"] + [f"b[{c}]" for c in classes] + ["w"])
    for k, label in enumerate(labels):
        writer.writerow([label] + [repr(float(system.b[c][k])) for c in classes]
                        + [repr(float(system.w[k]))])
    if system.scale_exponent:
        writer.writerow([])
        writer.writerow(["scale_exponent", system.scale_exponent])
    return out.getvalue()


def result_csv(result: InferenceResult) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["class", "likelihood", "posterior"])
    for c, v in result.likelihoods.items():
        writer.writerow([c, repr(v), repr(result.posterior[c])])
    writer.writerow([])
    writer.writerow(["argmax", result.argmax])
    for key, value in result.diagnostics.to_dict().items():
        writer.writerow([key, json.dumps(value)])
    return out.getvalue()


def result_text(result: InferenceResult) -> str:
    lines = [f"{'class':<10} {'likelihood':>14} {'posterior':>12}"]
    for c, v in result.likelihoods.items():
        lines.append(f"{c:<10} {v:>14.8g} {result.posterior[c]:>12.6f}")
    lines.append(f"argmax: {result.argmax}")
    for key, value in result.diagnostics.to_dict().items():
        lines.append(f"{key}: {value}")
    return "\n".join(lines) + "\n"


def render_result(result: InferenceResult, fmt: str) -> str:
    if fmt == "json":
        return _json(result.to_dict())
    if fmt == "csv":
        return result_csv(result)
    return result_text(result)


def render_report(report, fmt: str) -> str:
    if fmt == "json":
        return _json(report.to_dict())
    if fmt == "csv":
        return report.to_csv()
    return report.to_text()


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None


def _load(rule_file: str, evidence_file: str):
    rulebase = parse_rulebase(_read(rule_file))
    evidence = parse_evidence(_read(evidence_file), rulebase.space)
    return rulebase, evidence


def cmd_infer(args, config: Config, out) -> int:
    rulebase, evidence = _load(args.rules, args.evidence)
    rules = list(rulebase.rules)
    if args.dump_system:
        firing = [rules[i] for i in firing_rules(rules, evidence)]
        system = build_system(firing, rulebase.space.n, rulebase.class_model.classes,
                              normalized=args.normalized)
        out.write(system_csv(system, [r.id for r in firing]))
        out.write("\n")
    result = classify(rules, evidence, rulebase.class_model,
                      check_nonnegativity=args.check_nonnegativity, clamp=args.clamp,
                      n_limit=config.n_limit, normalized=args.normalized,
                      tolerances=config.tolerances, attribute_names=rulebase.space.names)
    out.write(render_result(result, config.format))
    return EXIT_OK


def _load_script(path: str) -> list:
    try:
        steps = json.loads(_read(path))
    except json.JSONDecodeError as exc:
        raise RuleBaseError(f"swap script syntax error: {exc.msg}", line=exc.lineno,
                            column=exc.colno) from None
    if not isinstance(steps, list) or not all(
            isinstance(s, dict) and isinstance(s.get("index"), int) and "rule" in s
            for s in steps):
        raise InputError("swap script must be a JSON list of {\"index\": int, \"rule\": {...}}")
    return steps


def cmd_swap(args, config: Config, out) -> int:
    rulebase, evidence = _load(args.rules, args.evidence)
    steps = _load_script(args.script)
    engine = Engine(list(rulebase.rules), evidence, rulebase.class_model,
                    normalized=args.normalized, tolerances=config.tolerances)
    records = []
    for k, step in enumerate(steps):
        index = step["index"]
        if not 0 <= index < len(engine.firing):
            raise InputError(f"step {k}: index {index} does not address a firing rule "
                             f"(0..{len(engine.firing) - 1}); the normalization row "
                             "cannot be swapped")
        rule = rule_from_dict(step["rule"], rulebase.space, rulebase.class_model)
        result = engine.swap_rule(index, rule)
        record = {"step": k, "index": index, "rule": rule.id, **result.to_dict()}
        if args.verify:
            rebuilt = engine.rebuild_likelihoods()
            record["rebuild_delta"] = max(abs(result.likelihoods[c] - rebuilt[c])
                                          for c in rebuilt)
        records.append(record)

    if config.format == "json":
        out.write(_json(records))
    else:
        classes = list(rulebase.class_model.classes)
        rows = [["step", "index", "rule"] + [f"p(e|{c})" for c in classes]
                + ["argmax", "fallback_rebuild"] + (["rebuild_delta"] if args.verify else [])]
        for rec in records:
            rows.append([rec["step"], rec["index"], rec["rule"]]
                        + [repr(rec["likelihoods"][c]) for c in classes]
                        + [rec["argmax"], rec["diagnostics"]["fallback_rebuild"]]
                        + ([repr(rec["rebuild_delta"])] if args.verify else []))
        if config.format == "csv":
            buf = io.StringIO()
            csv.writer(buf, lineterminator="\n").writerows(rows)
            out.write(buf.getvalue())
        else:
            out.write("\n".join("  ".join(str(v) for v in row) for row in rows) + "\n")
    return EXIT_OK


def run_oracle_check(n_max: int, r_max: int, trials: int, seed: int,
                     duplicates: bool = False, sigma_tol: float = 1e-10) -> dict:
    """Largest |closed form - explicit minimum-norm solution| over random instances."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    pseudo = 0
    for _ in range(trials):
        inst = random_instance(rng, n_max=n_max, r_max=r_max, duplicates=duplicates)
        firing = [inst.rules[i] for i in firing_rules(inst.rules, inst.evidence)]
        system = build_system(firing, inst.n, inst.class_model.classes)
        sol = solve_system(system, sigma_tol)
        pseudo += sol.pseudo_inverse
        A = oracle.materialize_A(firing, inst.n)
        for c in inst.class_model.classes:
            worst = max(worst, abs(sol.likelihoods[c] - oracle.exact_inference(A, system.b[c])))
    return {"seed": seed, "trials": trials, "n_max": n_max, "r_max": r_max,
            "duplicates": duplicates, "pseudo_inverse_solves": pseudo,
            "max_abs_delta": worst, "tolerance": 1e-9, "passed": worst <= 1e-9}


def cmd_oracle_check(args, config: Config, out) -> int:
    summary = run_oracle_check(args.n_max, args.r_max, args.trials, config.seed,
                               args.duplicates, config.sigma_tol)
    if config.format == "json":
        out.write(_json(summary))
    elif config.format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(list(summary))
        writer.writerow([repr(v) if isinstance(v, float) else v for v in summary.values()])
        out.write(buf.getvalue())
    else:
        status = "PASS" if summary["passed"] else "FAIL"
        out.write(f"{status}: max |delta| = {summary['max_abs_delta']:.3e} over "
                  f"{summary['trials']} instances (seed {summary['seed']})\n")
    return EXIT_OK if summary["passed"] else EXIT_NUMERIC


def _lengths(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError("lengths must be comma-separated integers") from None


def cmd_study_agreement(args, config: Config, out) -> int:
    report = experiments.agreement_study(args.lengths, args.trials, config.seed)
    out.write(render_report(report, config.format))
    return EXIT_OK


def cmd_bench_led(args, config: Config, out) -> int:
    report = experiments.led_benchmark(args.trials, args.noise, config.seed,
                                       estimate_from_samples=args.estimate_from_samples)
    out.write(render_report(report, config.format))
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _global_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    default = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--seed", type=int, default=default(None), help="RNG seed")
    parser.add_argument("--format", choices=FORMATS, default=default(None))
    parser.add_argument("--config", default=default(None), help="JSON config file")
    parser.add_argument("--dump-system", action="store_true", default=default(False),
                        help="print C, b and w as CSV before the result")
    parser.add_argument("--verify", action="store_true", default=default(False),
                        help="compare incremental results against a full rebuild")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="marginfer", description=__doc__.split("\n")[0])
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("infer", help="likelihoods and posterior for one evidence")
    p.add_argument("rules")
    p.add_argument("evidence")
    p.add_argument("--check-nonnegativity", action="store_true")
    p.add_argument("--clamp", action="store_true", help="repair negative cells (small n)")
    p.add_argument("--normalized", action="store_true", help="divide C by 2**n")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("swap", help="apply scripted rule exchanges")
    p.add_argument("rules")
    p.add_argument("evidence")
    p.add_argument("script")
    p.add_argument("--normalized", action="store_true")
    p.set_defaults(func=cmd_swap)

    p = sub.add_parser("oracle-check", help="closed form vs explicit oracle")
    p.add_argument("--n-max", type=int, default=10)
    p.add_argument("--r-max", type=int, default=8)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--duplicates", action="store_true", help="force a repeated rule")
    p.set_defaults(func=cmd_oracle_check)

    p = sub.add_parser("study-agreement", help="information vs norm sign agreement")
    p.add_argument("--lengths", type=_lengths, default=list(experiments.DEFAULT_LENGTHS))
    p.add_argument("--trials", type=int, default=100_000)
    p.set_defaults(func=cmd_study_agreement)

    p = sub.add_parser("bench-led", help="noisy LED digit benchmark")
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--trials", type=int, default=50_000)
    p.add_argument("--estimate-from-samples", type=int, default=None, metavar="N")
    p.set_defaults(func=cmd_bench_led)

    for action in sub.choices.values():
        _global_flags(action, suppress=True)
    return parser


def make_config(args) -> Config:
    config = Config.load(args.config) if args.config else Config()
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.format is not None:
        overrides["format"] = args.format
    return Config.from_dict({**config.to_dict(), **overrides})


def main(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    args = build_parser().parse_args(argv)
    try:
        config = make_config(args)
        return args.func(args, config, out)
    except (RuleBaseError, InputError, ValueError) as exc:
        if isinstance(exc, (ConstraintError, InferenceError)):
            print(f"numerical error: {exc}", file=sys.stderr)
            return EXIT_NUMERIC
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
