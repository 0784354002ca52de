"""Command line entry point: ``twophase {summarize,evaluate,simulate,genpop,replay}``.

Exit codes: 0 success, 1 usage or validation error, 2 data error,
3 numeric guard (enumeration limit or rejection ceiling).
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import os
import sys
from typing import Sequence

from . import __version__
from .design import DesignSpec
from .errors import DataError, TwoPhaseError, ValidationError
from .estimators import PAPER_TABLE_IDS, EstimatorId
from .mse_theory import analytic_table
from .population import (
    anderson_summary,
    consistency_warnings,
    format_summary,
    load_population,
    load_summary,
    summarize,
    write_population,
)
from .report import FORMATS, render, render_json, render_text
from .simulate import (
    DEFAULT_ESTIMATORS,
    DEFAULT_MAX_OUTCOMES,
    GenSpec,
    RejectionPolicy,
    SimConfig,
    compare,
    enumerate_exact,
    generate_population,
    run_monte_carlo,
)

ANDERSON_TARGETS = {
    "means": (183.84, 185.72, 151.12),
    "cvs": (0.0546, 0.0526, 0.0488),
    "rhos": (0.7108, 0.7346, 0.6932),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _u64(text: str) -> int:
    try:
        val = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= val < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return val


def _triple(text: str) -> tuple[float, float, float]:
    try:
        vals = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected three comma-separated numbers, got {text!r}") from None
    if len(vals) != 3:
        raise argparse.ArgumentTypeError(f"expected three comma-separated numbers, got {text!r}")
    return vals


def _estimator_list(text: str) -> list[EstimatorId]:
    try:
        return [EstimatorId.parse(v) for v in text.split(",") if v.strip()]
    except ValidationError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_u64, default=None, help="unsigned 64-bit seed")
    common.add_argument("--format", choices=FORMATS, default="text")
    common.add_argument("--out", default=None, help="output file (default: standard output)")
    common.add_argument("--manifest", default=None, help="run manifest path (default: OUT.manifest.json)")

    design = argparse.ArgumentParser(add_help=False)
    design.add_argument("--N", dest="N", type=int, default=None, help="population size (default: from input)")
    design.add_argument("--nprime", type=int, required=True, help="first-phase sample size n'")
    design.add_argument("--n", type=int, required=True, help="second-phase sample size n")
    design.add_argument("--estimators", type=_estimator_list, default=None, help="comma-separated estimator names")
    design.add_argument("--alpha", type=float, default=None, help="fixed weight for tstar estimators (default: optimum)")

    p = _Parser(prog="twophase", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"twophase {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("summarize", parents=[common], help="population parameters from a y,x,z CSV")
    s.add_argument("population", help="CSV file with header y,x,z")

    e = sub.add_parser("evaluate", parents=[common, design], help="analytic MSE and PRE table")
    e.add_argument("summary", nargs="?", default=None, help="summary file (default: bundled Anderson data)")

    m = sub.add_parser("simulate", parents=[common, design], help="Monte Carlo or exact check against theory")
    m.add_argument("population", help="CSV file with header y,x,z")
    m.add_argument("--reps", type=int, default=10_000)
    m.add_argument("--exact", action="store_true", help="enumerate every two-phase sample instead")
    m.add_argument("--workers", type=int, default=1)
    m.add_argument("--policy", choices=[r.value for r in RejectionPolicy], default="skip")
    m.add_argument("--tolerance", type=float, default=0.1, help="relative deviation that flags a row")
    m.add_argument("--max-outcomes", type=int, default=DEFAULT_MAX_OUTCOMES)
    m.add_argument("--quiet", action="store_true", help="no progress on standard error")

    g = sub.add_parser("genpop", parents=[common], help="synthetic Gaussian population with target moments")
    g.add_argument("--N", dest="N", type=int, required=True)
    g.add_argument("--means", type=_triple, default=ANDERSON_TARGETS["means"], help="y,x,z")
    g.add_argument("--cvs", type=_triple, default=ANDERSON_TARGETS["cvs"], help="y,x,z")
    g.add_argument("--rhos", type=_triple, default=ANDERSON_TARGETS["rhos"], help="rho_xy,rho_xz,rho_yz")
    g.add_argument("--integer", action="store_true", help="round generated values to integers")

    r = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    r.add_argument("manifest_file")
    return p


def _emit(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _write_manifest(args, argv: Sequence[str], inputs: list[str], design: DesignSpec | None) -> None:
    manifest = {
        "command": args.command,
        "argv": list(argv),
        "inputs": [os.path.abspath(p) for p in inputs],
        "design": None
        if design is None
        else {"N": design.n_population, "nprime": design.n_first, "n": design.n_second},
        "seed": args.seed,
        "tool_version": __version__,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }
    path = args.manifest or (f"{args.out}.manifest.json" if args.out else None)
    text = json.dumps(manifest, indent=2) + "\n"
    if path is None:
        sys.stderr.write("manifest: " + json.dumps(manifest) + "\n")
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _summary_report(summary, fmt: str) -> str:
    records = [{"parameter": k, "value": float(v)} for k, v in summary.as_dict().items()]
    return render(records, fmt)


def cmd_summarize(args, argv) -> int:
    pop = load_population(args.population)
    summary = summarize(pop)
    kv = format_summary(summary, header=f"summary of {args.population}")
    if args.out:
        _emit(kv, args.out)
        sys.stdout.write(_summary_report(summary, args.format))
    else:
        sys.stdout.write(kv)
        sys.stderr.write(_summary_report(summary, "text"))
    _write_manifest(args, argv, [args.population], None)
    return 0


def _design(args, n_default: int) -> DesignSpec:
    return DesignSpec(args.N if args.N is not None else n_default, args.nprime, args.n)


def _design_meta(design: DesignSpec) -> dict:
    return {"N": design.n_population, "nprime": design.n_first, "n": design.n_second}


def cmd_evaluate(args, argv) -> int:
    summary = load_summary(args.summary) if args.summary else anderson_summary()
    for w in consistency_warnings(summary):
        sys.stderr.write(f"warning: {w}\n")
    design = _design(args, summary.n_population)
    ids = args.estimators or PAPER_TABLE_IDS
    table = analytic_table(summary, design, ids, alpha=args.alpha)
    meta = {"design": _design_meta(design), "base_variance": table.base_variance}
    text = render(table.records(), args.format, meta)
    if args.format == "text":
        text = f"# N={design.n_population} n'={design.n_first} n={design.n_second}\n" + text
    _emit(text, args.out)
    _write_manifest(args, argv, [args.summary] if args.summary else [], design)
    return 0


def _progress(done: int, total: int) -> None:
    end = "\n" if done >= total else ""
    if sys.stderr.isatty() or end:
        sys.stderr.write(f"\rsimulate: {done}/{total} replications{end}")
        sys.stderr.flush()


def cmd_simulate(args, argv) -> int:
    pop = load_population(args.population)
    design = _design(args, pop.size)
    ids = args.estimators or list(DEFAULT_ESTIMATORS)
    policy = RejectionPolicy(args.policy)
    if args.exact:
        result = enumerate_exact(pop, design, ids, args.alpha, policy, args.max_outcomes)
        kind = {"mode": "exact", "outcome_count": result.outcome_count}
    else:
        if args.seed is None:
            raise ValidationError("simulate needs --seed (or --exact)")
        cfg = SimConfig(args.reps, args.seed, policy)
        result = run_monte_carlo(
            pop, design, ids, cfg, args.alpha, workers=args.workers, progress=None if args.quiet else _progress
        )
        kind = {"mode": "monte_carlo", "replications": result.replications_used, "seed": result.seed}
    table = analytic_table(summarize(pop), design, ids, alpha=args.alpha)
    report = compare(table, result, args.tolerance)
    meta = {"design": _design_meta(design), **kind, "base_empirical_var": result.base_empirical_var}
    if args.format == "json":
        text = render_json({**meta, "result": result.records(), "comparison": report.records()})
        _emit(text, args.out)
    elif args.format == "csv":
        res_text = render(result.records(), "csv")
        cmp_text = render(report.records(), "csv")
        if args.out:
            _emit(res_text, args.out)
            _emit(cmp_text, f"{args.out}.comparison.csv")
        else:
            _emit(res_text + "\n" + cmp_text, None)
    else:
        head = " ".join(f"{k}={v}" for k, v in meta.items() if k != "design")
        head = f"# N={design.n_population} n'={design.n_first} n={design.n_second} {head}\n"
        _emit(head + render_text(result.records()) + "\n" + render_text(report.records()), args.out)
    _write_manifest(args, argv, [args.population], design)
    return 0


def cmd_genpop(args, argv) -> int:
    seed = 0 if args.seed is None else args.seed
    spec = GenSpec(args.N, args.means, args.cvs, args.rhos, seed=seed, integer=args.integer)
    pop = generate_population(spec)
    if args.out:
        write_population(pop, args.out)
        header = f"realized parameters of {os.path.basename(args.out)} (seed {seed})"
        with open(f"{args.out}.summary", "w", encoding="utf-8") as fh:
            fh.write(format_summary(summarize(pop), header=header))
    else:
        write_population(pop, sys.stdout)
    _write_manifest(args, argv, [], None)
    return 0


def cmd_replay(args, argv) -> int:
    try:
        with open(args.manifest_file, encoding="utf-8") as fh:
            recorded = json.load(fh)["argv"]
    except (KeyError, json.JSONDecodeError) as exc:
        raise DataError(f"{args.manifest_file}: not a run manifest ({exc})") from None
    return main(recorded)


COMMANDS = {
    "summarize": cmd_summarize,
    "evaluate": cmd_evaluate,
    "simulate": cmd_simulate,
    "genpop": cmd_genpop,
    "replay": cmd_replay,
}


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args, argv)
    except TwoPhaseError as exc:
        sys.stderr.write(f"twophase {args.command}: error: {exc}\n")
        return exc.exit_code
    except OSError as exc:
        sys.stderr.write(f"twophase {args.command}: error: {exc}\n")
        return DataError.exit_code
