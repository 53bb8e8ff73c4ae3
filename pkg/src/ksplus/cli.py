"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data or validation error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .baselines import METHOD_NAMES, SEGMENTED_METHODS
from .harness import (
    ConfigError,
    ExperimentConfig,
    load_default_limits,
    read_results,
    run_experiment,
    write_outputs,
)
from .predictor import DEFAULT_PEAK_MARGIN, DEFAULT_START_MARGIN, FittedTaskModel, fit_task, predict_plan
from .retry import DEFAULT_BUMP, RetryPolicy
from .simulator import DEFAULT_MAX_ATTEMPTS, simulate_with_retries
from .synth import ARCHETYPE_NAMES, builtin_archetype, draw_input_sizes, generate, load_archetype
from .trace import BYTES_PER_GB, TraceError, load_traces, write_traces

log = logging.getLogger("ksplus")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _seeds(text: str) -> list[int]:
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"--seeds expects comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ksplus", description="Workflow task memory prediction over time.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen-synthetic", help="write a synthetic JSONL trace file")
    g.add_argument("--archetype", required=True,
                   help=f"built-in name ({', '.join(ARCHETYPE_NAMES)}) or path to an archetype JSON file")
    g.add_argument("--n", type=int, default=50, help="number of executions")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--noise", type=float, default=None, help="override per-phase noise_rel")
    g.add_argument("--min-input-gb", type=float, default=1.0)
    g.add_argument("--max-input-gb", type=float, default=10.0)
    g.add_argument("--out", required=True)

    f = sub.add_parser("fit", help="fit a KS+ model for one task")
    f.add_argument("--traces", required=True)
    f.add_argument("--k", type=int, default=4)
    f.add_argument("--task", default=None, help="task to fit; required if the file has several")
    f.add_argument("--peak-margin", type=float, default=DEFAULT_PEAK_MARGIN)
    f.add_argument("--start-margin", type=float, default=DEFAULT_START_MARGIN)
    f.add_argument("--out", required=True)

    s = sub.add_parser("simulate", help="replay a fitted model against traces")
    s.add_argument("--model", required=True)
    s.add_argument("--traces", required=True)
    s.add_argument("--policy", default=RetryPolicy.KS_PLUS_RESCALE.value,
                   choices=[x.value for x in RetryPolicy])
    s.add_argument("--machine-max-gb", type=float, default=128.0)
    s.add_argument("--bump", type=float, default=DEFAULT_BUMP)
    s.add_argument("--max-attempts", type=int, default=DEFAULT_MAX_ATTEMPTS)
    s.add_argument("--out", default=None, help="write JSON here instead of standard output")

    r = sub.add_parser("run-experiment", help="run a full method comparison")
    r.add_argument("--config", default=None, help="ExperimentConfig JSON file")
    r.add_argument("--traces", default=None)
    r.add_argument("--out", default=None, help="output directory")
    r.add_argument("--method", action="append", choices=METHOD_NAMES,
                   help="method to evaluate (repeatable); overrides the config's list")
    r.add_argument("--k", type=int, default=None, help="segment count for segmented methods")
    r.add_argument("--train-frac", type=float, action="append", default=None)
    r.add_argument("--seeds", type=_seeds, default=None)
    r.add_argument("--machine-max-gb", type=float, default=None)
    r.add_argument("--peak-margin", type=float, default=None)
    r.add_argument("--start-margin", type=float, default=None)
    r.add_argument("--bump", type=float, default=None)
    r.add_argument("--default-limits", default=None)
    r.add_argument("--jobs", type=int, default=None, help="worker processes (default: all processors)")

    rep = sub.add_parser("report", help="re-aggregate an existing results.csv")
    rep.add_argument("--results", required=True)
    rep.add_argument("--out", default=None, help="output directory (default: alongside results)")
    return p


def _gen_synthetic(args) -> int:
    if Path(args.archetype).suffix == ".json" or Path(args.archetype).is_file():
        archetype = load_archetype(args.archetype)
        if args.noise is not None:
            archetype = archetype.with_noise(args.noise)
    else:
        if args.archetype not in ARCHETYPE_NAMES:
            raise UsageError(f"--archetype: unknown archetype {args.archetype!r}")
        archetype = builtin_archetype(args.archetype, 0.1 if args.noise is None else args.noise)
    if args.n < 1:
        raise UsageError("--n must be positive")
    sizes = draw_input_sizes(args.n, args.seed, args.min_input_gb * BYTES_PER_GB, args.max_input_gb * BYTES_PER_GB)
    traces = generate(archetype, sizes, args.seed)
    write_traces(traces, args.out)
    log.info("wrote %d executions to %s", len(traces), args.out)
    return 0


def _fit(args) -> int:
    traces = load_traces(args.traces)
    groups = traces.by_task()
    if args.task is not None:
        selected = [ex for (_, task), exs in groups.items() if task == args.task for ex in exs]
        if not selected:
            raise ValueError(f"{args.traces}: no executions of task {args.task!r}")
    elif len({task for _, task in groups}) == 1:
        selected = list(traces)
    else:
        raise UsageError("--task is required when the trace file holds several tasks")
    model = fit_task(selected, args.k, args.peak_margin, args.start_margin)
    model.save(args.out)
    log.info("fitted %s (k=%d) on %d executions", model.task, model.k, len(selected))
    return 0


def _simulate(args) -> int:
    model = FittedTaskModel.load(args.model)
    traces = [ex for ex in load_traces(args.traces) if ex.task == model.task]
    if not traces:
        raise ValueError(f"{args.traces}: no executions of task {model.task!r}")
    outcomes = [
        simulate_with_retries(
            ex,
            predict_plan(model, ex.input_size),
            args.policy,
            machine_max=args.machine_max_gb * BYTES_PER_GB,
            max_attempts=args.max_attempts,
            bump=args.bump,
        ).to_dict()
        for ex in traces
    ]
    text = json.dumps(outcomes, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)
    return 0


def _run_experiment(args) -> int:
    if args.config:
        config = ExperimentConfig.from_json(args.config)
    elif args.traces:
        config = ExperimentConfig(jobs=None)
    else:
        raise UsageError("run-experiment needs --config or --traces")
    if args.traces:
        config.trace_path = args.traces
    if args.out:
        config.output_dir = args.out
    if args.method:
        config.methods = [
            {"name": m, "k": args.k} if m in SEGMENTED_METHODS and args.k else m for m in args.method
        ]
    elif args.k is not None:
        config.k_values = [args.k]
    if args.train_frac:
        config.train_fractions = args.train_frac
    if args.seeds:
        config.seeds = args.seeds
    if args.machine_max_gb is not None:
        config.machine_max = args.machine_max_gb * BYTES_PER_GB
    for name in ("peak_margin", "start_margin", "bump", "jobs"):
        if getattr(args, name) is not None:
            setattr(config, name, getattr(args, name))
    if args.default_limits:
        config.default_limits = load_default_limits(args.default_limits)
    config.__post_init__()
    rows = run_experiment(config)
    paths = write_outputs(rows, config.output_dir)
    log.info("wrote %s", ", ".join(str(p) for p in paths.values()))
    return 0


def _report(args) -> int:
    rows = read_results(args.results)
    if not rows:
        raise ValueError(f"{args.results}: no result rows")
    out = args.out or str(Path(args.results).parent)
    write_outputs(rows, out)
    return 0


_COMMANDS = {
    "gen-synthetic": _gen_synthetic,
    "fit": _fit,
    "simulate": _simulate,
    "run-experiment": _run_experiment,
    "report": _report,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"ksplus {args.command}: {exc}", file=sys.stderr)
        return 1
    except (TraceError, ConfigError, ValueError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"ksplus {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
