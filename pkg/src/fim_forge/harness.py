"""Benchmark loading, program assembly, sandboxed evaluation, and pass@1
reporting.

The harness is deterministic by construction: results are sorted by
(task_id, strategy) before aggregation, so reports do not depend on worker
scheduling.  Post-processing is never assumed to help; reports carry both
directions of any delta.
"""

import datetime as _dt
import enum
import hashlib
import json
import logging
from collections.abc import Callable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from fim_forge._jsonl import iter_jsonl_lines
from fim_forge.postprocess import Strategy, apply_strategy
from fim_forge.sandbox import ExecRequest, SandboxUnavailableError

log = logging.getLogger(__name__)

__all__ = [
    "BenchmarkFormatError",
    "Completion",
    "CoverageError",
    "DeltaRow",
    "EvalResult",
    "FimTask",
    "Report",
    "ReportRow",
    "TaskKind",
    "assemble_program",
    "build_report",
    "compare_strategies",
    "config_hash",
    "default_strategy_for",
    "delta_rows_from_report",
    "evaluate",
    "load_benchmark",
    "pass_at_1",
    "render_delta_table",
    "render_report_table",
]

BENCHMARK_FORMATS = ("generic-jsonl", "humaneval-infilling", "safim")

SAFIM_PLACEHOLDER = "# TODO: Your code here"


class BenchmarkFormatError(ValueError):
    """No usable record could be loaded from a benchmark file."""


class CoverageError(ValueError):
    """Results do not cover the task set exactly once."""


class TaskKind(enum.Enum):
    SINGLE_LINE = "single-line"
    MULTI_LINE = "multi-line"
    RANDOM_SPAN = "random-span"
    SAFIM_ALGO = "safim-algo"
    SAFIM_CONTROL = "safim-control"
    SAFIM_API = "safim-api"


_KIND_ALIASES = {
    **{kind.value: kind for kind in TaskKind},
    **{kind.name.lower(): kind for kind in TaskKind},
    "singleline": TaskKind.SINGLE_LINE,
    "multiline": TaskKind.MULTI_LINE,
    "randomspan": TaskKind.RANDOM_SPAN,
}


def parse_task_kind(value: str) -> TaskKind:
    key = value.strip().lower().replace("_", "").replace("-", "")
    normalized = {"single-line": "singleline", "multi-line": "multiline"}.get(value, key)
    for alias, kind in _KIND_ALIASES.items():
        if alias.replace("_", "").replace("-", "") == normalized:
            return kind
    raise ValueError(f"unknown task kind {value!r}")


@dataclass(frozen=True)
class FimTask:
    """One benchmark item; canonical middle must solve the tests."""

    task_id: str
    kind: TaskKind
    prefix: str
    suffix: str
    canonical_middle: str
    test_program: str

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "kind": self.kind.value,
            "prefix": self.prefix,
            "suffix": self.suffix,
            "canonical_middle": self.canonical_middle,
            "test_program": self.test_program,
        }


@dataclass
class Completion:
    """A model output for one task, plus any post-processed variants."""

    task_id: str
    raw: str
    processed: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if "none" in self.processed and self.processed["none"] != self.raw:
            raise ValueError("processed['none'] must equal raw")

    def to_dict(self) -> dict:
        return {"task_id": self.task_id, "raw": self.raw, "processed": self.processed}


@dataclass(frozen=True)
class EvalResult:
    task_id: str
    strategy: str
    status: str  # pass | fail | timeout | error
    duration_ms: float

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "strategy": self.strategy,
            "status": self.status,
            "duration_ms": self.duration_ms,
        }


@dataclass(frozen=True)
class ReportRow:
    kind: str
    strategy: str
    passed: int
    total: int

    @property
    def pass_at_1(self) -> float:
        return self.passed / self.total if self.total else 0.0

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "strategy": self.strategy,
            "passed": self.passed,
            "total": self.total,
            "pass_at_1": self.pass_at_1,
        }


@dataclass
class Report:
    rows: list[ReportRow]
    metadata: dict[str, str]

    def row(self, kind: str, strategy: str) -> ReportRow | None:
        for row in self.rows:
            if row.kind == kind and row.strategy == strategy:
                return row
        return None

    def to_dict(self) -> dict:
        return {
            "metadata": dict(self.metadata),
            "rows": [row.to_dict() for row in self.rows],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "Report":
        rows = [
            ReportRow(
                kind=r["kind"],
                strategy=r["strategy"],
                passed=r["passed"],
                total=r["total"],
            )
            for r in obj["rows"]
        ]
        return cls(rows=rows, metadata=dict(obj["metadata"]))


def config_hash(config: Mapping) -> str:
    """Short stable digest of result-affecting configuration.

    Scheduling knobs (worker counts, concurrency) must not be included,
    so reruns with different parallelism hash identically.
    """
    canonical = json.dumps(config, sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]


def utc_timestamp() -> str:
    return _dt.datetime.now(_dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


# --- Benchmark loading -----------------------------------------------------


def _task_from_generic(obj: dict) -> FimTask:
    return FimTask(
        task_id=str(obj["task_id"]),
        kind=parse_task_kind(obj["kind"]),
        prefix=obj["prefix"],
        suffix=obj["suffix"],
        canonical_middle=obj["canonical_middle"],
        test_program=obj["test_program"],
    )


def _task_from_humaneval(obj: dict, default_kind: TaskKind) -> FimTask:
    test_program = obj["test"]
    entry_point = obj.get("entry_point")
    if entry_point:
        test_program = f"{test_program}\ncheck({entry_point})\n"
    return FimTask(
        task_id=str(obj["task_id"]),
        kind=parse_task_kind(obj["kind"]) if "kind" in obj else default_kind,
        prefix=obj["prompt"],
        suffix=obj["suffix"],
        canonical_middle=obj["canonical_solution"],
        test_program=test_program,
    )


_SAFIM_KINDS = {
    "block": TaskKind.SAFIM_ALGO,
    "control": TaskKind.SAFIM_CONTROL,
    "api": TaskKind.SAFIM_API,
}


def _task_from_safim(obj: dict) -> FimTask:
    lang = obj.get("lang", "python")
    if lang != "python":
        raise ValueError(f"unsupported language {lang!r} (only python tasks run here)")
    completion_type = obj["completion_type"]
    if completion_type not in _SAFIM_KINDS:
        raise ValueError(f"unknown completion_type {completion_type!r}")
    prompt = obj["prompt"]
    if prompt.count(SAFIM_PLACEHOLDER) != 1:
        raise ValueError(f"prompt must contain {SAFIM_PLACEHOLDER!r} exactly once")
    prefix, suffix = prompt.split(SAFIM_PLACEHOLDER)
    return FimTask(
        task_id=str(obj["task_id"]),
        kind=_SAFIM_KINDS[completion_type],
        prefix=prefix,
        suffix=suffix,
        canonical_middle=obj["ground_truth"],
        test_program=obj.get("test") or obj.get("unit_tests") or "",
    )


def _humaneval_default_kind(path: str | Path) -> TaskKind:
    name = Path(path).name.lower()
    if "multi" in name:
        return TaskKind.MULTI_LINE
    if "random" in name:
        return TaskKind.RANDOM_SPAN
    return TaskKind.SINGLE_LINE


def load_benchmark(
    path: str | Path,
    format: str = "generic-jsonl",
    kind: TaskKind | None = None,
    sandbox=None,
    timeout_s: float = 10.0,
    on_record_error: Callable[[int, Exception], None] | None = None,
    on_sanity_failure: Callable[[str, str], None] | None = None,
) -> list[FimTask]:
    """Load benchmark records from a JSONL file (gzip supported).

    Bad records are reported per line through ``on_record_error`` and
    skipped; if nothing loads from a non-empty file the whole call raises
    :class:`BenchmarkFormatError`.  With a sandbox attached, every task's
    canonical middle is executed once and failures are reported through
    ``on_sanity_failure`` (task_id, status).
    """
    if format not in BENCHMARK_FORMATS:
        raise ValueError(f"unknown format {format!r}; valid: {BENCHMARK_FORMATS}")
    default_kind = kind or _humaneval_default_kind(path)

    def record_error(lineno: int, exc: Exception) -> None:
        if on_record_error is not None:
            on_record_error(lineno, exc)
        else:
            log.warning("%s line %d: %s", path, lineno, exc)

    tasks: list[FimTask] = []
    saw_lines = 0
    for lineno, line in iter_jsonl_lines(path):
        saw_lines += 1
        try:
            obj = json.loads(line)
            if format == "generic-jsonl":
                task = _task_from_generic(obj)
            elif format == "humaneval-infilling":
                task = _task_from_humaneval(obj, default_kind)
            else:
                task = _task_from_safim(obj)
        except (KeyError, ValueError, TypeError) as exc:
            reason = f"missing field {exc}" if isinstance(exc, KeyError) else str(exc)
            record_error(lineno, ValueError(reason))
            continue
        tasks.append(task)
    if saw_lines and not tasks:
        raise BenchmarkFormatError(f"no valid records in {path} ({saw_lines} lines)")
    if sandbox is not None:
        for task in tasks:
            verdict = sandbox.run_one(
                ExecRequest(
                    id=f"{task.task_id}::canonical",
                    program=assemble_program(task, task.canonical_middle),
                    timeout_s=timeout_s,
                )
            )
            if verdict.status != "pass":
                if on_sanity_failure is not None:
                    on_sanity_failure(task.task_id, verdict.status)
                else:
                    log.warning(
                        "canonical middle of %s does not pass (%s)",
                        task.task_id,
                        verdict.status,
                    )
    return tasks


def assemble_program(task: FimTask, middle: str) -> str:
    """Candidate program: prefix + middle + suffix, newline, test program."""
    return task.prefix + middle + task.suffix + "\n" + task.test_program


def default_strategy_for(kind: TaskKind, api_mode: str = "balanced") -> Strategy:
    """The truncation rule conventionally paired with each task kind."""
    table = {
        TaskKind.SINGLE_LINE: Strategy("single-line"),
        TaskKind.MULTI_LINE: Strategy("multi-line"),
        TaskKind.RANDOM_SPAN: Strategy("random-span"),
        TaskKind.SAFIM_ALGO: Strategy("safim-one-line"),
        TaskKind.SAFIM_CONTROL: Strategy("safim-structure"),
        TaskKind.SAFIM_API: Strategy("safim-api", api_mode=api_mode),
    }
    return table[kind]


def evaluate(
    tasks: Sequence[FimTask],
    completions: Sequence[Completion],
    strategies: Sequence[Strategy],
    sandbox,
    workers: int = 1,
    timeout_s: float = 10.0,
) -> list[EvalResult]:
    """Post-process, assemble, and execute every (task, strategy) pair.

    Requires exactly one completion per task.  Individual failures become
    ``error`` results; the run never aborts mid-way.  The returned list is
    sorted by (task_id, strategy) so downstream aggregation is identical
    for any worker count.
    """
    if sandbox is None:
        raise SandboxUnavailableError("no sandbox attached")
    if workers < 1:
        raise ValueError("workers must be >= 1")
    by_id: dict[str, Completion] = {}
    for completion in completions:
        if completion.task_id in by_id:
            raise CoverageError(f"duplicate completion for task {completion.task_id}")
        by_id[completion.task_id] = completion
    missing = [t.task_id for t in tasks if t.task_id not in by_id]
    if missing:
        raise CoverageError(f"missing completions for tasks: {', '.join(missing)}")

    jobs: list[tuple[FimTask, Strategy, Completion]] = [
        (task, strategy, by_id[task.task_id])
        for task in tasks
        for strategy in strategies
    ]

    def run(job: tuple[FimTask, Strategy, Completion]) -> EvalResult:
        task, strategy, completion = job
        try:
            processed = apply_strategy(
                strategy,
                completion.raw,
                prefix=task.prefix,
                suffix=task.suffix,
                ground_truth=task.canonical_middle,
            )
            completion.processed[strategy.name] = processed
            verdict = sandbox.run_one(
                ExecRequest(
                    id=f"{task.task_id}::{strategy.name}",
                    program=assemble_program(task, processed),
                    timeout_s=timeout_s,
                )
            )
            return EvalResult(
                task_id=task.task_id,
                strategy=strategy.name,
                status=verdict.status,
                duration_ms=verdict.duration_ms,
            )
        except Exception as exc:  # per-task crash: record, keep going
            log.warning("evaluation of %s/%s crashed: %s", task.task_id, strategy.name, exc)
            return EvalResult(
                task_id=task.task_id,
                strategy=strategy.name,
                status="error",
                duration_ms=0.0,
            )

    if workers == 1:
        results = [run(job) for job in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, jobs))
    results.sort(key=lambda r: (r.task_id, r.strategy))
    return results


def pass_at_1(
    results: Sequence[EvalResult],
    tasks: Sequence[FimTask],
    kind: TaskKind,
    strategy: str,
) -> float:
    """Fraction of tasks of ``kind`` whose completion passed under ``strategy``.

    Raises :class:`CoverageError` unless every task of the kind has exactly
    one result for the strategy.
    """
    task_ids = {t.task_id for t in tasks if t.kind is kind}
    if not task_ids:
        raise CoverageError(f"no tasks of kind {kind.value}")
    seen: dict[str, EvalResult] = {}
    for result in results:
        if result.strategy != strategy or result.task_id not in task_ids:
            continue
        if result.task_id in seen:
            raise CoverageError(
                f"duplicate result for task {result.task_id} under {strategy}"
            )
        seen[result.task_id] = result
    missing = sorted(task_ids - seen.keys())
    if missing:
        raise CoverageError(
            f"missing results under {strategy} for tasks: {', '.join(missing)}"
        )
    passed = sum(1 for r in seen.values() if r.status == "pass")
    return passed / len(task_ids)


def build_report(
    tasks: Sequence[FimTask],
    results: Sequence[EvalResult],
    metadata: Mapping[str, str],
) -> Report:
    """Aggregate results into per-(kind, strategy) pass@1 rows."""
    kinds_by_id = {t.task_id: t.kind for t in tasks}
    cells: dict[tuple[str, str], list[EvalResult]] = {}
    for result in results:
        kind = kinds_by_id.get(result.task_id)
        if kind is None:
            raise CoverageError(f"result for unknown task {result.task_id}")
        cells.setdefault((kind.value, result.strategy), []).append(result)
    totals: dict[str, int] = {}
    for task in tasks:
        totals[task.kind.value] = totals.get(task.kind.value, 0) + 1
    rows = []
    for (kind_value, strategy), cell in sorted(cells.items()):
        seen_ids = {r.task_id for r in cell}
        if len(seen_ids) != len(cell):
            raise CoverageError(f"duplicate results in cell ({kind_value}, {strategy})")
        if len(cell) != totals[kind_value]:
            raise CoverageError(
                f"cell ({kind_value}, {strategy}) covers {len(cell)} of "
                f"{totals[kind_value]} tasks"
            )
        passed = sum(1 for r in cell if r.status == "pass")
        rows.append(
            ReportRow(kind=kind_value, strategy=strategy, passed=passed, total=len(cell))
        )
    return Report(rows=rows, metadata=dict(metadata))


@dataclass(frozen=True)
class DeltaRow:
    kind: str
    strategy_without: str
    strategy_with: str
    without: float
    with_: float

    @property
    def delta(self) -> float:
        return self.with_ - self.without

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "strategy_without": self.strategy_without,
            "strategy_with": self.strategy_with,
            "pass_at_1_without": self.without,
            "pass_at_1_with": self.with_,
            "delta": self.delta,
        }


def delta_rows_from_report(report: Report, baseline: str = "none") -> list[DeltaRow]:
    """Pair each non-baseline strategy row with the baseline row of its kind."""
    rows = []
    for row in report.rows:
        if row.strategy == baseline:
            continue
        base = report.row(row.kind, baseline)
        if base is None:
            continue
        rows.append(
            DeltaRow(
                kind=row.kind,
                strategy_without=baseline,
                strategy_with=row.strategy,
                without=base.pass_at_1,
                with_=row.pass_at_1,
            )
        )
    return rows


def compare_strategies(report_a: Report, report_b: Report) -> list[DeltaRow]:
    """Per-kind deltas between two runs of the same benchmark and model.

    ``report_a`` is the without-post-processing side, ``report_b`` the
    with side.  Each report must carry one unambiguous row per kind.
    """
    for key in ("benchmark", "model"):
        a, b = report_a.metadata.get(key), report_b.metadata.get(key)
        if a != b:
            raise ValueError(f"reports disagree on {key}: {a!r} vs {b!r}")

    def rows_by_kind(report: Report) -> dict[str, ReportRow]:
        by_kind: dict[str, ReportRow] = {}
        for row in report.rows:
            if row.kind in by_kind:
                raise ValueError(
                    f"report has multiple strategies for kind {row.kind}; "
                    "comparison would be ambiguous"
                )
            by_kind[row.kind] = row
        return by_kind

    rows_a, rows_b = rows_by_kind(report_a), rows_by_kind(report_b)
    deltas = []
    for kind in sorted(rows_a.keys() & rows_b.keys()):
        deltas.append(
            DeltaRow(
                kind=kind,
                strategy_without=rows_a[kind].strategy,
                strategy_with=rows_b[kind].strategy,
                without=rows_a[kind].pass_at_1,
                with_=rows_b[kind].pass_at_1,
            )
        )
    return deltas


def render_report_table(report: Report) -> str:
    """Aligned text table of every report row."""
    header = f"{'kind':<14} {'strategy':<22} {'pass@1':>8} {'passed':>8} {'total':>8}"
    lines = [header, "-" * len(header)]
    for row in report.rows:
        lines.append(
            f"{row.kind:<14} {row.strategy:<22} {row.pass_at_1:>8.3f} "
            f"{row.passed:>8d} {row.total:>8d}"
        )
    meta = " ".join(f"{k}={v}" for k, v in sorted(report.metadata.items()))
    if meta:
        lines.append(meta)
    return "\n".join(lines)


def render_delta_table(rows: Sequence[DeltaRow]) -> str:
    """Aligned text table of without/with pass@1 pairs and signed deltas."""
    header = (
        f"{'kind':<14} {'without':>8} {'with':>8} {'delta':>8}  strategy"
    )
    lines = [header, "-" * len(header)]
    for row in rows:
        lines.append(
            f"{row.kind:<14} {row.without:>8.3f} {row.with_:>8.3f} "
            f"{row.delta:>+8.3f}  {row.strategy_with}"
        )
    return "\n".join(lines)
