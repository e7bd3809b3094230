"""Command-line entry point: prep, split, eval, and postprocess subcommands.

Every stage reads and writes JSONL so runs compose through files and are
re-runnable: identical inputs, seed, and configuration produce identical
outputs.  Exit codes: 0 success, 1 operational error, 2 usage error.
"""

import argparse
import json
import logging
import shlex
import sys
from pathlib import Path

from fim_forge import __version__
from fim_forge._jsonl import iter_jsonl_objects, write_jsonl
from fim_forge.client import GenRequest, LlmClient
from fim_forge.corpus import (
    decontaminate,
    dedup_exact,
    filter_documented,
    filter_typecheck,
    load_corpus,
    read_functions_jsonl,
)
from fim_forge.harness import (
    BENCHMARK_FORMATS,
    BenchmarkFormatError,
    Completion,
    TaskKind,
    build_report,
    config_hash,
    default_strategy_for,
    delta_rows_from_report,
    evaluate,
    load_benchmark,
    render_delta_table,
    render_report_table,
    utc_timestamp,
)
from fim_forge.postprocess import STRATEGY_KINDS, Strategy, apply_strategy
from fim_forge.prompts import (
    extract_middle_from_response,
    render_datagen_prompt,
    render_fim_instruct_prompt,
)
from fim_forge.sandbox import ProcessSandbox, SandboxUnavailableError
from fim_forge.splitter import parse_llm_split_response, rule_based_samples

log = logging.getLogger(__name__)

DEFAULT_SANDBOX_CMD = f"{sys.executable} -m fim_sandbox"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fim-forge",
        description="Fill-in-the-middle data synthesis, post-processing, and evaluation.",
    )
    parser.add_argument("--version", action="version", version=f"fim-forge {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    prep = sub.add_parser("prep", help="extract and filter a function corpus")
    prep.add_argument("inputs", nargs="+", help="source files or directories")
    prep.add_argument("--output", required=True, help="output JSONL of functions")
    prep.add_argument("--min-doc-chars", type=int, default=20)
    prep.add_argument(
        "--decontaminate",
        action="append",
        default=[],
        metavar="PATH",
        help="benchmark text file (.jsonl with a text field, or plain text); repeatable",
    )
    prep.add_argument(
        "--typecheck-cmd",
        default=None,
        help="external checker run per function; nonzero exit drops the function",
    )

    split = sub.add_parser("split", help="synthesize prefix/middle/suffix samples")
    split.add_argument("--input", required=True, help="function JSONL from prep")
    split.add_argument("--output", required=True, help="output JSONL of samples")
    split.add_argument("--mode", choices=("rule", "llm"), default="rule")
    split.add_argument("--seed", type=int, default=None, help="required in rule mode")
    split.add_argument("--samples-per-function", type=int, default=5)
    split.add_argument("--endpoint", default=None)
    split.add_argument("--model", default=None)
    split.add_argument("--max-tokens", type=int, default=512)
    split.add_argument("--temperature", type=float, default=0.0)
    split.add_argument("--concurrency", type=int, default=4)

    ev = sub.add_parser("eval", help="run a benchmark and report pass@1")
    ev.add_argument("--benchmark", required=True)
    ev.add_argument("--format", choices=BENCHMARK_FORMATS, default="generic-jsonl")
    ev.add_argument("--completions", default=None, help="JSONL with task_id and raw")
    ev.add_argument(
        "--canonical",
        action="store_true",
        help="evaluate the canonical middles instead of model completions",
    )
    ev.add_argument("--endpoint", default=None)
    ev.add_argument("--model", default=None)
    ev.add_argument("--max-tokens", type=int, default=512)
    ev.add_argument("--temperature", type=float, default=0.0)
    ev.add_argument("--concurrency", type=int, default=4)
    ev.add_argument(
        "--strategies",
        default="auto",
        help="comma-separated strategy names, or 'auto' for the per-kind bundle",
    )
    ev.add_argument("--api-mode", choices=("literal", "balanced"), default="balanced")
    ev.add_argument("--workers", type=int, default=1)
    ev.add_argument("--timeout-s", type=float, default=10.0)
    ev.add_argument("--sandbox-cmd", default=DEFAULT_SANDBOX_CMD)
    ev.add_argument("--out-results", default=None)
    ev.add_argument("--out-report", default=None)
    ev.add_argument("--out-deltas", default=None)

    post = sub.add_parser("postprocess", help="apply one truncation strategy to completions")
    post.add_argument("--input", required=True, help="completions JSONL")
    post.add_argument("--output", required=True)
    post.add_argument(
        "--strategy",
        required=True,
        help=f"one of: {', '.join(STRATEGY_KINDS)} (safim-api takes :literal or :balanced)",
    )
    post.add_argument("--benchmark", default=None, help="join prefix/suffix/ground truth by task_id")
    post.add_argument("--format", choices=BENCHMARK_FORMATS, default="generic-jsonl")
    post.add_argument("--api-mode", choices=("literal", "balanced"), default="balanced")
    return parser


# --- prep -------------------------------------------------------------------


def _load_benchmark_texts(path: str) -> list[str]:
    p = Path(path)
    if p.suffix == ".jsonl" or p.suffixes[-2:] == [".jsonl", ".gz"]:
        texts = []
        for _, obj in iter_jsonl_objects(p):
            if "text" in obj:
                texts.append(str(obj["text"]))
                continue
            parts = [
                str(obj[key])
                for key in ("prompt", "canonical_solution", "suffix", "test")
                if key in obj
            ]
            if parts:
                texts.append("".join(parts))
        return texts
    return [p.read_text(encoding="utf-8")]


def cmd_prep(args: argparse.Namespace) -> int:
    io_errors: list[str] = []

    def on_error(path: str, exc: Exception) -> None:
        io_errors.append(f"{path}: {exc}")

    funcs = load_corpus(args.inputs, on_error=on_error)
    stages = [("loaded", len(funcs), 0)]

    documented = filter_documented(funcs, args.min_doc_chars)
    stages.append(("documented", len(documented), len(funcs) - len(documented)))

    deduped = dedup_exact(documented)
    stages.append(("deduplicated", len(deduped), len(documented) - len(deduped)))

    benchmark_texts: list[str] = []
    for path in args.decontaminate:
        try:
            benchmark_texts.extend(_load_benchmark_texts(path))
        except OSError as exc:
            on_error(path, exc)
    cleaned = decontaminate(deduped, benchmark_texts)
    stages.append(("decontaminated", len(cleaned), len(deduped) - len(cleaned)))

    if args.typecheck_cmd:
        checked = filter_typecheck(
            cleaned, shlex.split(args.typecheck_cmd), on_error=lambda i, e: io_errors.append(f"{i}: {e}")
        )
        stages.append(("typechecked", len(checked), len(cleaned) - len(checked)))
        cleaned = checked

    write_jsonl(args.output, (f.to_dict() for f in cleaned))

    for name, kept, dropped in stages:
        print(f"{name:<16} kept {kept:>6}   dropped {dropped:>6}")
    for message in io_errors:
        print(f"error: {message}", file=sys.stderr)
    return 1 if io_errors else 0


# --- split ------------------------------------------------------------------


def cmd_split(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    if args.mode == "rule" and args.seed is None:
        parser.error("--seed is required in rule mode (reproducible training data)")
    if args.mode == "llm" and (not args.endpoint or not args.model):
        parser.error("--endpoint and --model are required in llm mode")

    funcs = read_functions_jsonl(args.input)
    emitted = 0
    rejected: list[str] = []
    endpoint_failures = 0

    with open(args.output, "w", encoding="utf-8", newline="\n") as out:

        def emit(sample) -> None:
            nonlocal emitted
            out.write(json.dumps(sample.to_dict(), ensure_ascii=False, sort_keys=True))
            out.write("\n")
            emitted += 1

        if args.mode == "rule":
            for func in funcs:
                samples = rule_based_samples(
                    func, args.seed, count=args.samples_per_function
                )
                if not samples:
                    rejected.append(f"{func.id}: no splittable span")
                for sample in samples:
                    assert sample.prefix + sample.middle + sample.suffix == func.content
                    emit(sample)
        else:
            client = LlmClient(endpoint=args.endpoint)
            requests_ = [
                GenRequest(
                    model=args.model,
                    prompt=render_datagen_prompt(func).text,
                    max_tokens=args.max_tokens,
                    temperature=args.temperature,
                )
                for func in funcs
            ]
            responses = client.complete_batch(requests_, max_in_flight=args.concurrency)
            for func, response in zip(funcs, responses):
                if response.finish_reason == "error":
                    endpoint_failures += 1
                    rejected.append(f"{func.id}: endpoint failure")
                    continue
                for sample in parse_llm_split_response(
                    response.text, func, rejections=rejected
                ):
                    emit(sample)

    print(f"functions        {len(funcs)}")
    print(f"samples emitted  {emitted}")
    print(f"rejections       {len(rejected)}")
    for reason in rejected:
        print(f"  rejected {reason}")
    if endpoint_failures:
        print(
            f"error: {endpoint_failures} endpoint failures; partial output kept at "
            f"{args.output}",
            file=sys.stderr,
        )
        return 1
    return 0


# --- eval -------------------------------------------------------------------


def _parse_strategies(text: str, api_mode: str, parser: argparse.ArgumentParser) -> list[Strategy] | None:
    if text.strip() == "auto":
        return None
    strategies = []
    for name in text.split(","):
        name = name.strip()
        if not name:
            continue
        try:
            strategies.append(Strategy.parse(name, default_api_mode=api_mode))
        except ValueError as exc:
            parser.error(str(exc))
    if not strategies:
        parser.error("--strategies must name at least one strategy")
    return strategies


def _read_completions(path: str) -> list[Completion]:
    completions = []
    for lineno, obj in iter_jsonl_objects(path):
        try:
            completions.append(
                Completion(
                    task_id=str(obj["task_id"]),
                    raw=obj["raw"],
                    processed=dict(obj.get("processed", {})),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"{path} line {lineno}: {exc}") from exc
    return completions


def _generate_completions(args: argparse.Namespace, tasks) -> tuple[list[Completion], int]:
    client = LlmClient(endpoint=args.endpoint)
    requests_ = [
        GenRequest(
            model=args.model,
            prompt=render_fim_instruct_prompt(task.prefix, task.suffix).text,
            max_tokens=args.max_tokens,
            temperature=args.temperature,
        )
        for task in tasks
    ]
    responses = client.complete_batch(requests_, max_in_flight=args.concurrency)
    completions = []
    failures = 0
    for task, response in zip(tasks, responses):
        if response.finish_reason == "error":
            failures += 1
        middle = extract_middle_from_response(response.text) if response.text else ""
        completions.append(Completion(task_id=task.task_id, raw=middle))
    return completions, failures


def cmd_eval(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    sources = sum(bool(x) for x in (args.completions, args.canonical, args.endpoint))
    if sources != 1:
        parser.error("pick exactly one of --completions, --canonical, or --endpoint/--model")
    if args.endpoint and not args.model:
        parser.error("--model is required with --endpoint")

    explicit = _parse_strategies(args.strategies, args.api_mode, parser)

    record_errors: list[str] = []
    try:
        tasks = load_benchmark(
            args.benchmark,
            format=args.format,
            on_record_error=lambda lineno, exc: record_errors.append(
                f"{args.benchmark} line {lineno}: {exc}"
            ),
        )
    except (OSError, BenchmarkFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for message in record_errors:
        print(f"error: {message}", file=sys.stderr)

    if args.canonical:
        completions = [Completion(t.task_id, t.canonical_middle) for t in tasks]
        model_tag = "canonical"
        generation_failures = 0
    elif args.completions:
        try:
            completions = _read_completions(args.completions)
        except (OSError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        model_tag = args.model or f"file:{Path(args.completions).name}"
        generation_failures = 0
    else:
        completions, generation_failures = _generate_completions(args, tasks)
        model_tag = args.model
        if generation_failures:
            print(
                f"warning: {generation_failures} generation failures scored as empty middles",
                file=sys.stderr,
            )

    try:
        sandbox = ProcessSandbox(args.sandbox_cmd, workers=args.workers)
    except SandboxUnavailableError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    try:
        results = []
        if explicit is None:
            by_kind: dict[TaskKind, list] = {}
            for task in tasks:
                by_kind.setdefault(task.kind, []).append(task)
            completions_by_id = {c.task_id: c for c in completions}
            for kind in sorted(by_kind, key=lambda k: k.value):
                bundle = [Strategy("none"), default_strategy_for(kind, args.api_mode)]
                if not any(s.name == "overlap-trim" for s in bundle):
                    bundle.append(Strategy("overlap-trim"))
                group = by_kind[kind]
                results.extend(
                    evaluate(
                        group,
                        [completions_by_id[t.task_id] for t in group],
                        bundle,
                        sandbox,
                        workers=args.workers,
                        timeout_s=args.timeout_s,
                    )
                )
            strategy_tag = "auto"
        else:
            results = evaluate(
                tasks,
                completions,
                explicit,
                sandbox,
                workers=args.workers,
                timeout_s=args.timeout_s,
            )
            strategy_tag = ",".join(s.name for s in explicit)
    finally:
        sandbox.close()

    results.sort(key=lambda r: (r.task_id, r.strategy))
    metadata = {
        "model": model_tag or "unknown",
        "benchmark": str(args.benchmark),
        "timestamp": utc_timestamp(),
        "config_hash": config_hash(
            {
                "benchmark": str(args.benchmark),
                "format": args.format,
                "strategies": strategy_tag,
                "api_mode": args.api_mode,
                "timeout_s": args.timeout_s,
                "model": model_tag or "unknown",
            }
        ),
    }
    report = build_report(tasks, results, metadata)
    deltas = delta_rows_from_report(report)

    print(render_report_table(report))
    if deltas:
        print()
        print(render_delta_table(deltas))

    if args.out_results:
        write_jsonl(args.out_results, (r.to_dict() for r in results))
    if args.out_report:
        # one JSON object on one line: a single-record JSONL report file
        Path(args.out_report).write_text(
            json.dumps(report.to_dict(), sort_keys=True, ensure_ascii=False) + "\n",
            encoding="utf-8",
        )
    if args.out_deltas:
        write_jsonl(args.out_deltas, (d.to_dict() for d in deltas))

    return 1 if record_errors else 0


# --- postprocess --------------------------------------------------------------


_NEEDS_CONTEXT = {"random-span", "overlap-trim", "safim-structure"}


def cmd_postprocess(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    try:
        strategy = Strategy.parse(args.strategy, default_api_mode=args.api_mode)
    except ValueError as exc:
        parser.error(str(exc))
    tasks_by_id: dict = {}
    if args.benchmark:
        tasks_by_id = {
            t.task_id: t for t in load_benchmark(args.benchmark, format=args.format)
        }

    rows = []
    for lineno, obj in iter_jsonl_objects(args.input):
        try:
            completion = Completion(
                task_id=str(obj["task_id"]),
                raw=obj["raw"],
                processed=dict(obj.get("processed", {})),
            )
        except (KeyError, TypeError, ValueError) as exc:
            print(f"error: {args.input} line {lineno}: {exc}", file=sys.stderr)
            return 1
        task = tasks_by_id.get(completion.task_id)
        prefix = task.prefix if task else obj.get("prefix", "")
        suffix = task.suffix if task else obj.get("suffix", "")
        ground_truth = (
            task.canonical_middle
            if task
            else obj.get("ground_truth", obj.get("canonical_middle"))
        )
        needs_ground_truth = strategy.kind == "safim-structure" or (
            strategy.kind == "multi-line" and strategy.num_lines is None
        )
        if needs_ground_truth and ground_truth is None:
            print(
                f"error: task {completion.task_id}: strategy {strategy.name} needs a "
                "ground-truth middle (pass --benchmark or add a ground_truth field)",
                file=sys.stderr,
            )
            return 1
        if strategy.kind in _NEEDS_CONTEXT and task is None and "prefix" not in obj:
            log.debug("task %s: trimming against empty context", completion.task_id)
        try:
            completion.processed[strategy.name] = apply_strategy(
                strategy,
                completion.raw,
                prefix=prefix,
                suffix=suffix,
                ground_truth=ground_truth,
            )
        except ValueError as exc:
            print(f"error: task {completion.task_id}: {exc}", file=sys.stderr)
            return 1
        record = dict(obj)
        record.update(completion.to_dict())
        rows.append(record)

    write_jsonl(args.output, rows)
    print(f"processed {len(rows)} completions with {strategy.name}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "prep":
            return cmd_prep(args)
        if args.command == "split":
            return cmd_split(args, parser)
        if args.command == "eval":
            return cmd_eval(args, parser)
        if args.command == "postprocess":
            return cmd_postprocess(args, parser)
    except (OSError, ValueError, KeyError) as exc:
        # malformed input files and bad records are operational errors,
        # not crashes
        print(f"error: {exc}", file=sys.stderr)
        return 1
    parser.error(f"unknown command {args.command!r}")
    return 2


if __name__ == "__main__":
    sys.exit(main())
