"""Prefix/middle/suffix sample synthesis from source functions.

Two routes produce :class:`FimSample` objects: deterministic rule-based
splitting over the five middle categories, and parsing of LLM responses
to the data-generation prompt.  Both enforce the reconstruction
invariant: prefix + middle + suffix equals the original content,
byte-exact.  Syntactic candidates come from a line/token scanner, not a
grammar, so detection is heuristic by design.
"""

import ast
import enum
import keyword
import random
import re
import textwrap
from collections.abc import Callable
from dataclasses import dataclass

from fim_forge.corpus import SourceFunction

__all__ = [
    "FimSample",
    "SpanCategory",
    "fim_sample_from_dict",
    "parse_llm_split_response",
    "rule_based_samples",
    "split_random_span",
    "split_syntactic",
    "verify_reconstruction",
]

# Fraction of the content a random-span middle may cover at most.
RANDOM_SPAN_MAX_FRACTION = 0.3

_CONTROL_KEYWORDS = ("if", "elif", "else", "for", "while", "try", "except", "with")

# Statement-leading keywords that disqualify a line as an assignment.
_NON_ASSIGN_LEADERS = frozenset(
    {
        "assert", "async", "break", "class", "continue", "def", "del",
        "from", "global", "import", "nonlocal", "pass", "raise", "return",
        "yield", *_CONTROL_KEYWORDS,
    }
)

_CONTROL_RE = re.compile(r"^[ \t]*(%s)\b" % "|".join(_CONTROL_KEYWORDS))
_CALL_RE = re.compile(r"(?<![\w.])([A-Za-z_]\w*(?:\.[A-Za-z_]\w*)*)\(")


class SpanCategory(enum.Enum):
    """The five middle categories of the data-generation prompt."""

    RANDOM_SPAN = "random-span"
    ALGORITHMIC_BLOCK = "algorithmic-block"
    CONTROL_FLOW_EXPRESSION = "control-flow-expression"
    API_FUNCTION_CALL = "api-function-call"
    ASSIGNMENT_EXPRESSION = "assignment-expression"


# Numbering follows the category list in the data-generation prompt.
_CATEGORY_BY_NUMBER = {
    1: SpanCategory.RANDOM_SPAN,
    2: SpanCategory.ALGORITHMIC_BLOCK,
    3: SpanCategory.CONTROL_FLOW_EXPRESSION,
    4: SpanCategory.API_FUNCTION_CALL,
    5: SpanCategory.ASSIGNMENT_EXPRESSION,
}

_CATEGORY_BY_WORDS = {
    "random span": SpanCategory.RANDOM_SPAN,
    "algorithmic block": SpanCategory.ALGORITHMIC_BLOCK,
    "control flow expression": SpanCategory.CONTROL_FLOW_EXPRESSION,
    "api function call": SpanCategory.API_FUNCTION_CALL,
    "assignment expression": SpanCategory.ASSIGNMENT_EXPRESSION,
}


@dataclass(frozen=True)
class FimSample:
    """One training-data unit: a categorized split of a source function."""

    source_id: str
    prefix: str
    middle: str
    suffix: str
    category: SpanCategory

    def __post_init__(self) -> None:
        if not self.middle:
            raise ValueError("middle must be non-empty")

    def to_dict(self) -> dict:
        return {
            "source_id": self.source_id,
            "prefix": self.prefix,
            "middle": self.middle,
            "suffix": self.suffix,
            "category": self.category.value,
        }


def fim_sample_from_dict(obj: dict) -> FimSample:
    return FimSample(
        source_id=obj["source_id"],
        prefix=obj["prefix"],
        middle=obj["middle"],
        suffix=obj["suffix"],
        category=SpanCategory(obj["category"]),
    )


def verify_reconstruction(sample: FimSample, func: SourceFunction) -> bool:
    """True iff the sample's parts concatenate back to the function, byte-exact."""
    if sample.source_id != func.id:
        raise ValueError(
            f"sample source_id {sample.source_id!r} does not match function {func.id!r}"
        )
    return sample.prefix + sample.middle + sample.suffix == func.content


def _rng(func: SourceFunction, rng_seed: int) -> random.Random:
    # Mix the content hash in so one corpus-wide seed still draws
    # independently per function while staying a pure function of
    # (func, seed).
    return random.Random(f"{rng_seed}:{func.content_hash}")


def split_random_span(func: SourceFunction, rng_seed: int) -> FimSample:
    """Split at a random character position after the signature line.

    The middle length is uniform in [1, floor(0.3 * len(content))],
    clipped at the end of the content.  Deterministic for a given
    (function, seed) pair.
    """
    content = func.content
    if len(content) < 3:
        raise ValueError("content too short to split")
    newline = content.find("\n")
    sig_end = newline + 1 if newline >= 0 else len(content)
    if sig_end >= len(content):
        raise ValueError("no content after the signature line to split")
    rng = _rng(func, rng_seed)
    start = rng.randrange(sig_end, len(content))
    cap = max(1, int(RANDOM_SPAN_MAX_FRACTION * len(content)))
    length = rng.randint(1, cap)
    end = min(start + length, len(content))
    return FimSample(
        source_id=func.id,
        prefix=content[:start],
        middle=content[start:end],
        suffix=content[end:],
        category=SpanCategory.RANDOM_SPAN,
    )


def _line_spans(content: str) -> list[tuple[int, int]]:
    """(start, end) character offsets per line; end includes the newline."""
    spans = []
    pos = 0
    while pos < len(content):
        newline = content.find("\n", pos)
        end = len(content) if newline < 0 else newline + 1
        spans.append((pos, end))
        pos = end
    return spans


def _excluded_lines(content: str, line_count: int) -> set[int]:
    """Line indices covered by the signature and the docstring.

    Falls back to excluding just the first line when the content does not
    parse cleanly.
    """
    excluded: set[int] = {0}
    try:
        tree = ast.parse(textwrap.dedent(content))
    except (SyntaxError, ValueError):
        return excluded
    for node in tree.body:
        if isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef)):
            if not node.body:
                break
            first_body_line = node.body[0].lineno
            excluded.update(range(0, min(first_body_line - 1, line_count)))
            first = node.body[0]
            if (
                isinstance(first, ast.Expr)
                and isinstance(first.value, ast.Constant)
                and isinstance(first.value.value, str)
            ):
                end = first.end_lineno or first.lineno
                excluded.update(range(first.lineno - 1, min(end, line_count)))
            break
    return excluded


def _control_flow_candidates(content: str) -> list[tuple[int, int]]:
    spans = _line_spans(content)
    excluded = _excluded_lines(content, len(spans))
    candidates = []
    for idx, (start, end) in enumerate(spans):
        if idx in excluded:
            continue
        if _CONTROL_RE.match(content[start:end]):
            candidates.append((start, end))
    return candidates


def _standalone_assign_count(line: str) -> int:
    """Number of '=' characters that are plain assignment operators."""
    count = 0
    for i, ch in enumerate(line):
        if ch != "=":
            continue
        prev = line[i - 1] if i > 0 else ""
        nxt = line[i + 1] if i + 1 < len(line) else ""
        if prev in "=!<>+-*/%&|^:@" or nxt == "=":
            continue
        count += 1
    return count


def _assignment_candidates(content: str) -> list[tuple[int, int]]:
    spans = _line_spans(content)
    excluded = _excluded_lines(content, len(spans))
    candidates = []
    for idx, (start, end) in enumerate(spans):
        if idx in excluded:
            continue
        line = content[start:end]
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        first_word = re.match(r"\w+", stripped)
        if first_word and first_word.group(0) in _NON_ASSIGN_LEADERS:
            continue
        if _standalone_assign_count(line) == 1:
            candidates.append((start, end))
    return candidates


def _balanced_paren_end(content: str, open_idx: int) -> int | None:
    """Index one past the ')' matching the '(' at ``open_idx``."""
    depth = 0
    for i in range(open_idx, len(content)):
        ch = content[i]
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth == 0:
                return i + 1
    return None


def _api_call_candidates(content: str) -> list[tuple[int, int]]:
    spans = _line_spans(content)
    excluded = _excluded_lines(content, len(spans))
    excluded_ranges = [spans[i] for i in sorted(excluded) if i < len(spans)]
    candidates = []
    for match in _CALL_RE.finditer(content):
        name_start = match.start(1)
        if any(start <= name_start < end for start, end in excluded_ranges):
            continue
        name = match.group(1)
        if keyword.iskeyword(name.split(".", 1)[0]):
            continue
        line_start = content.rfind("\n", 0, name_start) + 1
        before = content[line_start:name_start].rstrip()
        if before.endswith("def"):
            continue
        end = _balanced_paren_end(content, match.end(1))
        if end is not None:
            candidates.append((name_start, end))
    return candidates


def _block_candidates(content: str) -> list[tuple[int, int]]:
    """Maximal runs of >= 2 adjacent statement lines at equal indent."""
    spans = _line_spans(content)
    excluded = _excluded_lines(content, len(spans))
    candidates = []
    run: list[tuple[int, int]] = []
    run_indent: int | None = None

    def flush() -> None:
        if len(run) >= 2:
            candidates.append((run[0][0], run[-1][1]))

    for idx, (start, end) in enumerate(spans):
        line = content[start:end]
        stripped = line.strip()
        is_statement = (
            idx not in excluded and bool(stripped) and not stripped.startswith("#")
        )
        if not is_statement:
            flush()
            run, run_indent = [], None
            continue
        indent = len(line) - len(line.lstrip(" \t"))
        if run_indent is not None and indent != run_indent:
            flush()
            run = []
        run_indent = indent
        run.append((start, end))
    flush()
    return candidates


_CANDIDATE_FINDERS: dict[SpanCategory, Callable[[str], list[tuple[int, int]]]] = {
    SpanCategory.CONTROL_FLOW_EXPRESSION: _control_flow_candidates,
    SpanCategory.ASSIGNMENT_EXPRESSION: _assignment_candidates,
    SpanCategory.API_FUNCTION_CALL: _api_call_candidates,
    SpanCategory.ALGORITHMIC_BLOCK: _block_candidates,
}


def syntactic_candidates(func: SourceFunction, category: SpanCategory) -> list[tuple[int, int]]:
    """Candidate (start, end) spans for a syntactic category."""
    if category is SpanCategory.RANDOM_SPAN:
        raise ValueError("random-span middles are not produced by the syntactic scanner")
    return _CANDIDATE_FINDERS[category](func.content)


def split_syntactic(
    func: SourceFunction, category: SpanCategory, rng_seed: int
) -> FimSample | None:
    """Pick one candidate span of ``category`` uniformly at random.

    Returns None when the function has no candidate of that category.
    """
    candidates = syntactic_candidates(func, category)
    if not candidates:
        return None
    rng = _rng(func, rng_seed)
    start, end = candidates[rng.randrange(len(candidates))]
    return FimSample(
        source_id=func.id,
        prefix=func.content[:start],
        middle=func.content[start:end],
        suffix=func.content[end:],
        category=category,
    )


def rule_based_samples(
    func: SourceFunction, rng_seed: int, count: int = 5
) -> list[FimSample]:
    """Draw ``count`` samples, choosing uniformly among available categories.

    A category is available when the function has at least one candidate
    span for it; random-span is available whenever the function has a body
    to split.  Returns fewer than ``count`` samples (possibly zero) for
    functions nothing applies to.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    available: list[SpanCategory] = []
    content = func.content
    newline = content.find("\n")
    if len(content) >= 3 and 0 <= newline < len(content) - 1:
        available.append(SpanCategory.RANDOM_SPAN)
    for category in _CANDIDATE_FINDERS:
        if _CANDIDATE_FINDERS[category](content):
            available.append(category)
    if not available:
        return []
    rng = _rng(func, rng_seed)
    samples = []
    for _ in range(count):
        category = available[rng.randrange(len(available))]
        seed = rng.randrange(2**32)
        if category is SpanCategory.RANDOM_SPAN:
            samples.append(split_random_span(func, seed))
        else:
            sample = split_syntactic(func, category, seed)
            if sample is not None:
                samples.append(sample)
    return samples


# --- Parsing of LLM responses to the data-generation prompt ---------------

_EXAMPLE_HEADING = re.compile(r"(?m)^#[ \t]*Example\b[^\n]*$")
_SECTION_HEADING = re.compile(r"(?m)^##[ \t]*(\w+)\b")
_SECTION_FENCE = re.compile(r"```[^\n]*\n(.*?)```", re.DOTALL)


def _section_bounds(chunk: str, title: str) -> tuple[int, int] | None:
    """(start, end) of the section body under ``## <title>`` within a chunk."""
    for match in _SECTION_HEADING.finditer(chunk):
        if match.group(1).lower() != title.lower():
            continue
        nxt = _SECTION_HEADING.search(chunk, match.end())
        return match.end(), nxt.start() if nxt else len(chunk)
    return None


def _fenced_block(section: str) -> str | None:
    match = _SECTION_FENCE.search(section)
    if match is None:
        return None
    body = match.group(1)
    # The newline before the closing fence belongs to the fence syntax.
    return body[:-1] if body.endswith("\n") else body


def parse_label(text: str) -> SpanCategory | None:
    """Map a label line to a category, accepting the number or the name.

    Names may carry the leading article used in the category list
    ("A random span", "An API function call").
    """
    stripped = text.strip().lstrip(":.*-) \t")
    number = re.match(r"(\d+)", stripped)
    if number:
        return _CATEGORY_BY_NUMBER.get(int(number.group(1)))
    words = re.sub(r"[^a-z0-9]+", " ", stripped.lower()).split()
    if words and words[0] in ("a", "an"):
        words = words[1:]
    return _CATEGORY_BY_WORDS.get(" ".join(words))


def _label_in(section: str) -> SpanCategory | None:
    for line in section.split("\n"):
        if line.strip():
            return parse_label(line)
    return None


def parse_llm_split_response(
    response: str,
    func: SourceFunction,
    rejections: list[str] | None = None,
) -> list[FimSample]:
    """Extract verified samples from a data-generation response.

    Scans for ``# Example`` sections, pulls the fenced blocks under the
    Prefix/Suffix/Middle headings and the Label line, and keeps only
    examples whose parts reconstruct the function byte-exactly.  Malformed
    or non-reconstructing examples are dropped; a reason string per drop
    is appended to ``rejections`` when provided.  At most five samples are
    returned.
    """
    headings = list(_EXAMPLE_HEADING.finditer(response))
    samples: list[FimSample] = []

    def reject(example: int, reason: str) -> None:
        if rejections is not None:
            rejections.append(f"example {example}: {reason}")

    for i, heading in enumerate(headings):
        if len(samples) >= 5:
            break
        chunk_end = headings[i + 1].start() if i + 1 < len(headings) else len(response)
        chunk = response[heading.end():chunk_end]
        parts = {}
        for title in ("Prefix", "Suffix", "Middle"):
            bounds = _section_bounds(chunk, title)
            block = _fenced_block(chunk[bounds[0]:bounds[1]]) if bounds else None
            if block is None:
                parts = {}
                break
            parts[title] = block
        if not parts:
            reject(i + 1, "missing section or fenced block")
            continue
        bounds = _section_bounds(chunk, "Label")
        category = _label_in(chunk[bounds[0]:bounds[1]]) if bounds else None
        if category is None:
            reject(i + 1, "missing or unrecognized label")
            continue
        if not parts["Middle"]:
            reject(i + 1, "empty middle")
            continue
        sample = FimSample(
            source_id=func.id,
            prefix=parts["Prefix"],
            middle=parts["Middle"],
            suffix=parts["Suffix"],
            category=category,
        )
        if not verify_reconstruction(sample, func):
            reject(i + 1, "parts do not reconstruct the original function")
            continue
        samples.append(sample)
    return samples
