"""Experiment orchestration: seeded per-task splits, method sweeps, aggregation, reports."""

from __future__ import annotations

import csv
import itertools
import json
import logging
import os
import zlib
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .baselines import SEGMENTED_METHODS, MethodSpec, fit_method
from .predictor import DEFAULT_PEAK_MARGIN, DEFAULT_START_MARGIN
from .retry import DEFAULT_BUMP, DEFAULT_MACHINE_MAX, DEFAULT_OFFSET_FACTOR
from .simulator import DEFAULT_MAX_ATTEMPTS, simulate_with_retries
from .trace import BYTES_PER_GB, TaskExecutionTrace, TraceSet, load_traces

log = logging.getLogger(__name__)

DEFAULT_K_VALUES = tuple(range(2, 11))
DEFAULT_TRAIN_FRACTIONS = (0.25, 0.5, 0.75)
DEFAULT_SEEDS = tuple(range(10))


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    trace_path: str | None = None
    methods: list[MethodSpec | str | dict] = field(default_factory=lambda: ["ksplus"])
    k_values: Sequence[int] = DEFAULT_K_VALUES
    train_fractions: Sequence[float] = DEFAULT_TRAIN_FRACTIONS
    seeds: Sequence[int] = DEFAULT_SEEDS
    machine_max: float = DEFAULT_MACHINE_MAX
    peak_margin: float = DEFAULT_PEAK_MARGIN
    start_margin: float = DEFAULT_START_MARGIN
    bump: float = DEFAULT_BUMP
    offset_factor: float = DEFAULT_OFFSET_FACTOR
    max_attempts: int = DEFAULT_MAX_ATTEMPTS
    output_dir: str = "results"
    default_limits: dict[str, float] | None = None
    jobs: int | None = 1

    def __post_init__(self) -> None:
        if not self.seeds:
            raise ConfigError("seeds must be non-empty")
        if not all(0 < f < 1 for f in self.train_fractions):
            raise ConfigError("train fractions must lie strictly between 0 and 1")
        if not self.k_values or any(k < 1 for k in self.k_values):
            raise ConfigError("k_values must be positive integers")

    def method_specs(self) -> list[MethodSpec]:
        """Methods with segmented ones lacking ``k`` expanded over ``k_values``."""
        specs = []
        for m in self.methods:
            if isinstance(m, MethodSpec):
                specs.append(m)
                continue
            if isinstance(m, str):
                m = {"name": m}
            name, k = m.get("name"), m.get("k")
            limits = self.default_limits if name == "default" else None
            try:
                if name in SEGMENTED_METHODS and k is None:
                    specs.extend(MethodSpec(name, kk) for kk in self.k_values)
                else:
                    specs.append(MethodSpec(name, k, limits))
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
        return list(dict.fromkeys(specs))

    @classmethod
    def from_dict(cls, d: Mapping, base_dir: str | Path | None = None) -> "ExperimentConfig":
        d = dict(d)
        # files default to every available processor; the constructor stays serial
        d.setdefault("jobs", None)
        known = {f.name for f in fields(cls)}
        if "machine_max_gb" in d:
            d["machine_max"] = float(d.pop("machine_max_gb")) * BYTES_PER_GB
        if "default_limits_path" in d:
            d["default_limits"] = load_default_limits(_resolve(d.pop("default_limits_path"), base_dir))
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        for key in ("trace_path", "output_dir"):
            if d.get(key) is not None:
                d[key] = str(_resolve(d[key], base_dir))
        return cls(**d)

    @classmethod
    def from_json(cls, path: str | Path) -> "ExperimentConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc.msg}") from exc
        return cls.from_dict(data, base_dir=path.parent)


def _resolve(p: str | Path, base_dir: str | Path | None) -> Path:
    p = Path(p)
    return p if p.is_absolute() or base_dir is None else Path(base_dir) / p


def load_default_limits(path: str | Path) -> dict[str, float]:
    """JSON object mapping task (or ``workflow/task``) to a limit in bytes."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, dict) or not all(isinstance(v, (int, float)) for v in data.values()):
        raise ConfigError(f"{path}: default limits must be a JSON object of task -> bytes")
    return {str(k): float(v) for k, v in data.items()}


@dataclass(frozen=True)
class ResultRow:
    workflow: str
    task: str
    method: str
    k: int | None
    train_fraction: float
    seed: int
    total_wastage: float  # GB·s summed over the test executions
    failures: int  # failed attempts over the test executions
    executions: int

    def sort_key(self) -> tuple:
        return (self.workflow, self.task, self.method, self.k or 0, self.train_fraction, self.seed)


def split_indices(n: int, fraction: float, seed: int, key: str) -> tuple[list[int], list[int]]:
    """Deterministic train/test split of ``range(n)`` seeded by ``(seed, key)``."""
    if n < 2:
        raise ValueError("need at least two executions to split")
    rng = np.random.default_rng([seed, zlib.crc32(key.encode("utf-8"))])
    perm = [int(i) for i in rng.permutation(n)]
    n_train = min(max(int(round(fraction * n)), 1), n - 1)
    return sorted(perm[:n_train]), sorted(perm[n_train:])


def _evaluate_unit(
    executions: Sequence[TaskExecutionTrace],
    fraction: float,
    seed: int,
    specs: Sequence[MethodSpec],
    config: ExperimentConfig,
) -> list[ResultRow]:
    ex0 = executions[0]
    train_idx, test_idx = split_indices(len(executions), fraction, seed, f"{ex0.workflow}/{ex0.task}")
    train = [executions[i] for i in train_idx]
    test = [executions[i] for i in test_idx]
    rows = []
    for spec in specs:
        method = fit_method(spec, train, config.machine_max, config.peak_margin, config.start_margin)
        wastage, failures = 0.0, 0
        for ex in test:
            outcome = simulate_with_retries(
                ex,
                method.plan(ex.input_size),
                method.policy,
                machine_max=config.machine_max,
                max_attempts=config.max_attempts,
                bump=config.bump,
                offset_factor=config.offset_factor,
            )
            if not outcome.succeeded:
                log.warning("%s/%s %s: %s", ex.task, ex.execution_id, spec.name, outcome.reason)
            wastage += outcome.total_wastage
            failures += outcome.failures
        rows.append(
            ResultRow(ex0.workflow, ex0.task, spec.name, spec.k, fraction, seed, wastage, failures, len(test))
        )
    return rows


def run_experiment(config: ExperimentConfig, traces: TraceSet | None = None) -> list[ResultRow]:
    """Evaluate every method on every (task, train fraction, seed); rows come back sorted."""
    if traces is None:
        if config.trace_path is None:
            raise ConfigError("no trace_path configured")
        traces = load_traces(config.trace_path)
    specs = config.method_specs()
    units = []
    for (workflow, task), executions in traces.by_task().items():
        if len(executions) < 2:
            log.warning("skipping %s/%s: %d execution(s), cannot split", workflow, task, len(executions))
            continue
        executions = sorted(executions, key=lambda e: e.execution_id)
        log.info("%s/%s: %d executions", workflow, task, len(executions))
        for fraction, seed in itertools.product(config.train_fractions, config.seeds):
            units.append((executions, fraction, seed))
    jobs = config.jobs or os.cpu_count() or 1
    rows: list[ResultRow] = []
    if jobs > 1 and len(units) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_evaluate_unit, ex, f, s, specs, config) for ex, f, s in units]
            for fut in futures:
                rows.extend(fut.result())
    else:
        for ex, f, s in units:
            rows.extend(_evaluate_unit(ex, f, s, specs, config))
    return sorted(rows, key=ResultRow.sort_key)


# -- aggregation ---------------------------------------------------------------

GROUP_FIELDS = ("workflow", "task", "method", "k", "train_fraction")


def method_label(method: str, k: int | None) -> str:
    return method if k is None else f"{method} (k={k})"


def aggregate(
    rows: Iterable[ResultRow], group_by: Sequence[str] = ("workflow", "method", "k", "train_fraction")
) -> list[dict]:
    """Sum within each (group, seed), then average over seeds.

    Returns one dict per group with the group fields plus ``wastage_gbs``,
    ``failures``, ``executions`` (seed means) and ``n_seeds``.
    """
    rows = list(rows)
    if not rows:
        raise ValueError("no result rows to aggregate")
    bad = set(group_by) - set(GROUP_FIELDS)
    if bad:
        raise ValueError(f"cannot group by {sorted(bad)}")
    per_seed: dict[tuple, list[float]] = defaultdict(lambda: [0.0, 0, 0])
    for r in rows:
        acc = per_seed[(tuple(getattr(r, g) for g in group_by), r.seed)]
        acc[0] += r.total_wastage
        acc[1] += r.failures
        acc[2] += r.executions
    groups: dict[tuple, list[list[float]]] = defaultdict(list)
    for (key, _seed), acc in per_seed.items():
        groups[key].append(acc)
    out = []
    for key in sorted(groups, key=lambda k: tuple((v is None, v) for v in k)):
        accs = groups[key]
        n = len(accs)
        rec = dict(zip(group_by, key))
        rec["wastage_gbs"] = sum(a[0] for a in accs) / n
        rec["failures"] = sum(a[1] for a in accs) / n
        rec["executions"] = sum(a[2] for a in accs) / n
        rec["n_seeds"] = n
        out.append(rec)
    return out


def reduction_pct(wastage: float, baseline_wastage: float) -> float:
    """Percentage by which ``wastage`` undercuts ``baseline_wastage``."""
    if baseline_wastage == 0:
        return 0.0 if wastage == 0 else float("-inf")
    return 100.0 * (1.0 - wastage / baseline_wastage)


def pairwise_reductions(summary: Sequence[Mapping]) -> list[dict]:
    """Reduction of every method against every other within the same context.

    Context is every group field of ``summary`` other than method and k.
    """
    context_fields = [f for f in summary[0] if f in GROUP_FIELDS and f not in ("method", "k")]
    by_context: dict[tuple, list[Mapping]] = defaultdict(list)
    for rec in summary:
        by_context[tuple(rec[f] for f in context_fields)].append(rec)
    out = []
    for ctx, recs in by_context.items():
        for a, b in itertools.permutations(recs, 2):
            row = dict(zip(context_fields, ctx))
            row["method"] = method_label(b["method"], b.get("k"))
            row["baseline"] = method_label(a["method"], a.get("k"))
            row["reduction_pct"] = reduction_pct(b["wastage_gbs"], a["wastage_gbs"])
            out.append(row)
    return out


def mean_task_reduction(rows: Sequence[ResultRow], method: str, k: int | None, baseline: str,
                        baseline_k: int | None, train_fraction: float) -> float:
    """Unweighted mean over tasks of the per-task percentage reduction."""
    summary = aggregate(
        [r for r in rows if r.train_fraction == train_fraction],
        ("workflow", "task", "method", "k"),
    )
    table = {(s["workflow"], s["task"], s["method"], s["k"]): s["wastage_gbs"] for s in summary}
    tasks = sorted({(s["workflow"], s["task"]) for s in summary})
    vals = [
        reduction_pct(table[(w, t, method, k)], table[(w, t, baseline, baseline_k)])
        for w, t in tasks
        if (w, t, method, k) in table and (w, t, baseline, baseline_k) in table
    ]
    if not vals:
        raise ValueError("no task has both methods")
    return sum(vals) / len(vals)


# -- emission ------------------------------------------------------------------

RESULT_FIELDS = [f.name for f in fields(ResultRow)]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_results(rows: Iterable[ResultRow], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULT_FIELDS)
        for r in sorted(rows, key=ResultRow.sort_key):
            w.writerow([_fmt(v) for v in asdict(r).values()])


def read_results(path: str | Path) -> list[ResultRow]:
    rows = []
    with Path(path).open(encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(RESULT_FIELDS) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        for lineno, rec in enumerate(reader, start=2):
            try:
                rows.append(
                    ResultRow(
                        workflow=rec["workflow"],
                        task=rec["task"],
                        method=rec["method"],
                        k=int(rec["k"]) if rec["k"] else None,
                        train_fraction=float(rec["train_fraction"]),
                        seed=int(rec["seed"]),
                        total_wastage=float(rec["total_wastage"]),
                        failures=int(rec["failures"]),
                        executions=int(rec["executions"]),
                    )
                )
            except (TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
    return rows


def write_summary_csv(summary: Sequence[Mapping], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        cols = list(summary[0])
        w.writerow(cols)
        for rec in summary:
            w.writerow([_fmt(rec[c]) for c in cols])


def _md_table(header: Sequence[str], body: Iterable[Sequence]) -> list[str]:
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
    for row in body:
        lines.append("| " + " | ".join(f"{v:.1f}" if isinstance(v, float) else str(v) for v in row) + " |")
    return lines


def summary_markdown(rows: Sequence[ResultRow]) -> str:
    fractions = sorted({r.train_fraction for r in rows})
    fcols = [f"{f:.0%} train" for f in fractions]
    out = ["# Memory wastage summary", "", "Mean over seeds, GB·s (1 GB = 10^9 bytes).", ""]
    for workflow in sorted({r.workflow for r in rows}):
        wrows = [r for r in rows if r.workflow == workflow]
        agg = aggregate(wrows, ("method", "k", "train_fraction"))
        table = {(a["method"], a["k"], a["train_fraction"]): a["wastage_gbs"] for a in agg}
        labels = list(dict.fromkeys((a["method"], a["k"]) for a in agg))

        out += [f"## Workflow `{workflow}`", "", "### Aggregate wastage per method", ""]
        out += _md_table(
            ["method", *fcols],
            ([method_label(m, k), *(table.get((m, k, f), "") for f in fractions)] for m, k in labels),
        )
        out.append("")

        swept = [m for m in sorted({m for m, _ in labels}) if sum(1 for mm, _ in labels if mm == m) > 1]
        for m in swept:
            out += [f"### Segment-count sweep: {m}", ""]
            out += _md_table(
                ["k", *fcols],
                ([k, *(table.get((m, k, f), "") for f in fractions)] for mm, k in labels if mm == m),
            )
            out.append("")

        ks_labels = [(m, k) for m, k in labels if m == "ksplus"]
        others = [(m, k) for m, k in labels if m != "ksplus"]
        if ks_labels and others:
            out += ["### Reduction of KS+ wastage vs other methods (%)", ""]
            body = []
            for (m, k), (bm, bk) in itertools.product(ks_labels, others):
                vals = []
                for f in fractions:
                    w, b = table.get((m, k, f)), table.get((bm, bk, f))
                    vals.append("" if w is None or b is None else reduction_pct(w, b))
                body.append([method_label(m, k), method_label(bm, bk), *vals])
            out += _md_table(["method", "baseline", *fcols], body)
            out.append("")

        out += ["### Wastage per task", ""]
        tagg = aggregate(wrows, ("task", "method", "k", "train_fraction"))
        ttable = {(a["task"], a["method"], a["k"], a["train_fraction"]): a["wastage_gbs"] for a in tagg}
        tkeys = list(dict.fromkeys((a["task"], a["method"], a["k"]) for a in tagg))
        out += _md_table(
            ["task", "method", *fcols],
            ([t, method_label(m, k), *(ttable.get((t, m, k, f), "") for f in fractions)] for t, m, k in tkeys),
        )
        out.append("")
    return "\n".join(out)


def write_outputs(rows: Sequence[ResultRow], output_dir: str | Path) -> dict[str, Path]:
    """Write results.csv, summary.csv and summary.md; returns their paths."""
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "results": out / "results.csv",
        "summary": out / "summary.csv",
        "markdown": out / "summary.md",
    }
    write_results(rows, paths["results"])
    write_summary_csv(aggregate(rows), paths["summary"])
    paths["markdown"].write_text(summary_markdown(rows), encoding="utf-8")
    return paths
