"""Deterministic fixture builders shared across the test suite.

Everything here is constructed, never sampled at import time, so tests
that compare exact counts and fractions stay stable.
"""

import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

from fim_forge.corpus import Origin, SourceFunction
from fim_forge.harness import Completion, FimTask, TaskKind, assemble_program
from fim_forge.postprocess import trim_overlaps, truncate_multi_line, countable_lines
from fim_forge.splitter import FimSample, SpanCategory

# --- corpus functions -------------------------------------------------------

_BODY_TEMPLATES = [
    (
        "def {name}(values):\n"
        '{doc}'
        "    total = 0\n"
        "    skipped = 0\n"
        "    for item in values:\n"
        "        if item > {k}:\n"
        "            total += item\n"
        "        else:\n"
        "            skipped += 1\n"
        "    return total, skipped\n"
    ),
    (
        "def {name}(limit):\n"
        '{doc}'
        "    count = 0\n"
        "    value = {k}\n"
        "    while value < limit:\n"
        "        value = value * 2 + 1\n"
        "        count += 1\n"
        "    return count\n"
    ),
    (
        "def {name}(text):\n"
        '{doc}'
        "    parts = text.split(',')\n"
        "    cleaned = []\n"
        "    for part in parts:\n"
        "        stripped = part.strip()\n"
        "        if stripped:\n"
        "            cleaned.append(stripped.lower())\n"
        "    return cleaned\n"
    ),
    (
        "def {name}(mapping, key):\n"
        '{doc}'
        "    try:\n"
        "        raw = mapping[key]\n"
        "    except KeyError:\n"
        "        return {k}\n"
        "    scaled = int(raw) * {k}\n"
        "    return scaled\n"
    ),
]


def make_function(i: int, documented: bool = True) -> str:
    """One deterministic, syntactically valid corpus function."""
    template = _BODY_TEMPLATES[i % len(_BODY_TEMPLATES)]
    if documented:
        doc = (
            f'    """Derive quantity {i} from the input, skipping entries '
            f'that fail the {i % 7}-threshold rule."""\n'
        )
    else:
        doc = ""
    return template.format(name=f"helper_{i:03d}", doc=doc, k=i % 9 + 1)


def write_corpus(
    directory: Path, count: int = 120, undocumented_every: int = 12, per_file: int = 20
) -> list[Path]:
    """Write ``count`` functions across several files; returns the paths."""
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for start in range(0, count, per_file):
        chunk = [
            make_function(i, documented=(i % undocumented_every != 0) or i == 0)
            for i in range(start, min(start + per_file, count))
        ]
        path = directory / f"corpus_{start // per_file}.py"
        path.write_text("".join(chunk), encoding="utf-8")
        paths.append(path)
    return paths


def function_from_text(text: str, func_id: str = "fixture:0") -> SourceFunction:
    return SourceFunction.from_content(
        text, Origin(path="fixture.py", start=0, end=len(text)), func_id
    )


# --- the even/odd digit-counting example ------------------------------------

EVEN_ODD_COUNT = (
    "def even_odd_count(num):\n"
    '    """Return a tuple with the counts of even and odd digits of num."""\n'
    "    even_count = 0\n"
    "    odd_count = 0\n"
    "    for i in str(abs(num)):\n"
    "        if int(i)%2==0:\n"
    "            even_count +=1\n"
    "        else:\n"
    "            odd_count +=1\n"
    "    return (even_count, odd_count)\n"
)

EVEN_ODD_FOR_LINE = "    for i in str(abs(num)):"

# A five-line middle that is longer than the canonical single line yet
# still correct in context.
EVEN_ODD_LONGER_MIDDLE = (
    "    if num < 0:\n"
    "        num = str(num)[1:]\n"
    "    else:\n"
    "        num = str(num)\n"
    "    for i in num:"
)

EVEN_ODD_TEST = (
    "def check(candidate):\n"
    "    assert candidate(7) == (0, 1)\n"
    "    assert candidate(-78) == (1, 1)\n"
    "    assert candidate(3452) == (2, 2)\n"
    "    assert candidate(346211) == (3, 3)\n"
    "    assert candidate(0) == (1, 0)\n"
    "check(even_odd_count)\n"
)


def even_odd_task() -> FimTask:
    """Single-line task splitting out the digit-iteration header line."""
    idx = EVEN_ODD_COUNT.index(EVEN_ODD_FOR_LINE)
    prefix = EVEN_ODD_COUNT[:idx]
    suffix = EVEN_ODD_COUNT[idx + len(EVEN_ODD_FOR_LINE):]
    task = FimTask(
        task_id="fixture/even_odd_count",
        kind=TaskKind.SINGLE_LINE,
        prefix=prefix,
        suffix=suffix,
        canonical_middle=EVEN_ODD_FOR_LINE,
        test_program=EVEN_ODD_TEST,
    )
    assert prefix + task.canonical_middle + suffix == EVEN_ODD_COUNT
    return task


# --- synthetic benchmark suites ----------------------------------------------


@dataclass
class SyntheticSuite:
    tasks: list[FimTask]
    completions: list[Completion]
    accepted_programs: set[str] = field(default_factory=set)

    def accept(self, task: FimTask, middle: str) -> None:
        self.accepted_programs.add(assemble_program(task, middle))


_KIND_CYCLE = [
    TaskKind.SINGLE_LINE,
    TaskKind.MULTI_LINE,
    TaskKind.RANDOM_SPAN,
    TaskKind.SAFIM_ALGO,
    TaskKind.SAFIM_CONTROL,
    TaskKind.SAFIM_API,
]


def _make_task(i: int, kind: TaskKind) -> FimTask:
    """A small runnable task of the given kind; canonical middles never
    overlap their context, so overlap trimming is a no-op on them."""
    name = f"task_{i:02d}"
    mult = i % 5 + 2
    if kind is TaskKind.RANDOM_SPAN:
        prefix = f"def {name}(x):\n    base = {i}\n    value = ba"
        middle = f"se + x * {mult}"
        suffix = f"\n    return value\n"
    elif kind is TaskKind.MULTI_LINE:
        prefix = f"def {name}(x):\n    base = {i}\n    "
        middle = f"partial = base + x\n    value = partial * {mult}"
        suffix = "\n    return value\n"
    elif kind is TaskKind.SAFIM_API:
        prefix = f"def {name}(x):\n    base = {i}\n    value = "
        middle = f"max(base, x * {mult})"
        suffix = "\n    return value\n"
    elif kind is TaskKind.SAFIM_CONTROL:
        prefix = f"def {name}(x):\n    value = {i}\n    "
        middle = f"if x > {mult}:"
        suffix = f"\n        value += x\n    return value\n"
    else:  # SINGLE_LINE and SAFIM_ALGO share a one-line middle shape
        prefix = f"def {name}(x):\n    base = {i}\n    "
        middle = f"value = base + x * {mult}"
        suffix = "\n    return value\n"

    if kind is TaskKind.MULTI_LINE:
        expected = f"({i} + 3) * {mult}"
    elif kind is TaskKind.SAFIM_API:
        expected = f"max({i}, 3 * {mult})"
    elif kind is TaskKind.SAFIM_CONTROL:
        expected = f"({i} + 3 if 3 > {mult} else {i})"
    else:
        expected = f"{i} + 3 * {mult}"
    test_program = f"assert {name}(3) == {expected}\nprint('ok')\n"

    task = FimTask(
        task_id=f"synthetic/{name}",
        kind=kind,
        prefix=prefix,
        suffix=suffix,
        canonical_middle=middle,
        test_program=test_program,
    )
    assert trim_overlaps(prefix, middle, suffix) == middle, task.task_id
    assert truncate_multi_line(middle, max(1, countable_lines(middle))) == middle
    return task


def canonical_suite(count: int = 20) -> SyntheticSuite:
    """Mixed-kind suite whose completions are the canonical middles."""
    tasks = [_make_task(i, _KIND_CYCLE[i % len(_KIND_CYCLE)]) for i in range(count)]
    suite = SyntheticSuite(
        tasks=tasks,
        completions=[Completion(t.task_id, t.canonical_middle) for t in tasks],
    )
    for task in tasks:
        suite.accept(task, task.canonical_middle)
    return suite


def overlap_suite(count: int = 20, overlapped: int = 8) -> SyntheticSuite:
    """Random-span suite where ``overlapped`` completions duplicate context.

    Raw completions repeat the tail of the prefix and the head of the
    suffix around the correct middle, so they fail untouched and pass
    after overlap trimming.
    """
    tasks = [_make_task(i, TaskKind.RANDOM_SPAN) for i in range(count)]
    suite = SyntheticSuite(tasks=tasks, completions=[])
    for i, task in enumerate(tasks):
        suite.accept(task, task.canonical_middle)
        if i < overlapped:
            raw = task.prefix[-12:] + task.canonical_middle + task.suffix[:6]
            assert trim_overlaps(task.prefix, raw, task.suffix) == task.canonical_middle
            assert raw != task.canonical_middle
        else:
            raw = task.canonical_middle
        suite.completions.append(Completion(task.task_id, raw))
    return suite


def longer_middle_suite(count: int = 20, longer: int = 5) -> SyntheticSuite:
    """Multi-line suite where ``longer`` completions are valid but exceed
    the canonical line count, so line-count truncation breaks them."""
    tasks = [_make_task(i, TaskKind.MULTI_LINE) for i in range(count)]
    suite = SyntheticSuite(tasks=tasks, completions=[])
    for i, task in enumerate(tasks):
        suite.accept(task, task.canonical_middle)
        if i < longer:
            mult = i % 5 + 2
            raw = (
                f"partial = base + x\n"
                f"    scale = {mult}\n"
                f"    value = partial * scale"
            )
            assert trim_overlaps(task.prefix, raw, task.suffix) == raw
            suite.accept(task, raw)
        else:
            raw = task.canonical_middle
        suite.completions.append(Completion(task.task_id, raw))
    return suite


# --- JSONL and fake-runner helpers -------------------------------------------


def write_benchmark_jsonl(path: Path, tasks: list[FimTask]) -> Path:
    with open(path, "w", encoding="utf-8") as handle:
        for task in tasks:
            handle.write(json.dumps(task.to_dict(), ensure_ascii=False) + "\n")
    return path


def write_completions_jsonl(path: Path, completions: list[Completion]) -> Path:
    with open(path, "w", encoding="utf-8") as handle:
        for completion in completions:
            handle.write(json.dumps(completion.to_dict(), ensure_ascii=False) + "\n")
    return path


_FAKE_RUNNER_SOURCE = '''\
import hashlib, json, sys

table = json.load(open(sys.argv[1], encoding="utf-8"))
for line in sys.stdin:
    line = line.strip()
    if not line:
        continue
    try:
        req = json.loads(line)
        digest = hashlib.sha256(req["program"].encode("utf-8")).hexdigest()
        verdict = {
            "id": req["id"],
            "status": table.get(digest, "fail"),
            "stderr_tail": "",
            "duration_ms": 1.0,
        }
    except Exception as exc:
        verdict = {"id": "?", "status": "error", "stderr_tail": str(exc), "duration_ms": 0.0}
    sys.stdout.write(json.dumps(verdict) + "\\n")
    sys.stdout.flush()
'''


def make_fake_runner(tmp_path: Path, passing_programs: set[str]) -> str:
    """Write a canned-verdict runner script; returns its command string."""
    table = {
        hashlib.sha256(program.encode("utf-8")).hexdigest(): "pass"
        for program in passing_programs
    }
    script = tmp_path / "fake_runner.py"
    table_path = tmp_path / "fake_runner_table.json"
    script.write_text(_FAKE_RUNNER_SOURCE, encoding="utf-8")
    table_path.write_text(json.dumps(table), encoding="utf-8")
    return f"{sys.executable} {script} {table_path}"


# --- datagen response serialization ------------------------------------------

_LABEL_TEXT = {
    SpanCategory.RANDOM_SPAN: ("1", "A random span"),
    SpanCategory.ALGORITHMIC_BLOCK: ("2", "An algorithmic block"),
    SpanCategory.CONTROL_FLOW_EXPRESSION: ("3", "A control-flow expression"),
    SpanCategory.API_FUNCTION_CALL: ("4", "An API function call"),
    SpanCategory.ASSIGNMENT_EXPRESSION: ("5", "An assignment expression"),
}


def format_split_example(number: int, sample: FimSample, label_as_name: bool = False) -> str:
    label = _LABEL_TEXT[sample.category][1 if label_as_name else 0]
    return (
        f"# Example: {number}\n\n"
        f"## Prefix\n```python\n{sample.prefix}\n```\n\n"
        f"## Suffix\n```python\n{sample.suffix}\n```\n\n"
        f"## Middle\n```python\n{sample.middle}\n```\n\n"
        f"## Label\n{label}\n\n"
    )


def format_split_response(samples: list[FimSample]) -> str:
    return "".join(
        format_split_example(i + 1, sample, label_as_name=bool(i % 2))
        for i, sample in enumerate(samples)
    )


def stub_split_response(content: str, corrupt_third: bool = False) -> str:
    """Five fraction-based splits of ``content`` in the response format.

    Intentionally independent of the package's own splitter: plain cuts at
    fixed fractions of the body.  With ``corrupt_third`` the third example
    drops a character so it cannot reconstruct.
    """
    sig_end = content.find("\n") + 1
    body_len = len(content) - sig_end
    assert body_len >= 5, "stub responses need a function body to cut"
    parts = []
    for k in range(5):
        start = sig_end + (k * body_len) // 6
        end = min(len(content), start + max(1, body_len // 5))
        prefix, middle, suffix = content[:start], content[start:end], content[end:]
        if corrupt_third and k == 2:
            middle = middle[:-1] or "?"
        parts.append(
            "# Example: {n}\n\n"
            "## Prefix\n```python\n{p}\n```\n\n"
            "## Suffix\n```python\n{s}\n```\n\n"
            "## Middle\n```python\n{m}\n```\n\n"
            "## Label\n1\n\n".format(n=k + 1, p=prefix, s=suffix, m=middle)
        )
    return "".join(parts)


DATAGEN_CONTENT_START = "The input code is as follows.\n```python\n"
DATAGEN_CONTENT_END = "\n```\n\nProvide 5 examples"


def content_from_datagen_prompt(prompt: str) -> str:
    """Recover the inserted function text from a rendered datagen prompt."""
    after = prompt.split(DATAGEN_CONTENT_START, 1)[1]
    return after.split(DATAGEN_CONTENT_END, 1)[0]


def prefix_suffix_from_instruct_prompt(prompt: str) -> tuple[str, str]:
    """Recover the inserted contexts from a rendered middle-generation prompt."""
    prefix = prompt.split("# Prefix\n```python\n", 1)[1].split("\n```\n\n# Suffix", 1)[0]
    suffix = prompt.split("# Suffix\n```python\n", 1)[1].split("\n```\n\n# Middle", 1)[0]
    return prefix, suffix
