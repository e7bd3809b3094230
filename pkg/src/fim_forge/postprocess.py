"""Truncation and overlap-trimming rules for raw model completions.

Every operation deletes characters from the head and/or tail of its input
and never inserts or reorders anything, so the output is always a
contiguous slice of the completion.  ``apply_strategy`` dispatches a named
:class:`Strategy` to the matching rule.
"""

from dataclasses import dataclass

__all__ = [
    "API_MODES",
    "STRATEGY_KINDS",
    "Strategy",
    "apply_strategy",
    "countable_lines",
    "overlap_suffix_prefix_len",
    "overlap_suffix_prefix_len_linear",
    "remove_overlap_middle_suffix",
    "remove_overlap_prefix_middle",
    "trim_overlaps",
    "truncate_api_call",
    "truncate_multi_line",
    "truncate_single_line",
    "truncate_to_structure",
]

STRATEGY_KINDS = (
    "none",
    "single-line",
    "multi-line",
    "random-span",
    "safim-one-line",
    "safim-structure",
    "safim-api",
    "overlap-trim",
)

API_MODES = ("literal", "balanced")


@dataclass(frozen=True)
class Strategy:
    """A named post-processing rule plus its parameters.

    ``num_lines`` pins the multi-line cut to a fixed count instead of
    deriving it from a ground-truth middle.  ``api_mode`` selects whether
    API-call truncation cuts at the first ``)`` character (``literal``) or
    at the parenthesis that balances the first opening one (``balanced``).
    """

    kind: str
    num_lines: int | None = None
    api_mode: str = "balanced"

    def __post_init__(self) -> None:
        if self.kind not in STRATEGY_KINDS:
            raise ValueError(
                f"unknown strategy {self.kind!r}; valid: {', '.join(STRATEGY_KINDS)}"
            )
        if self.num_lines is not None and self.num_lines < 1:
            raise ValueError("num_lines must be >= 1")
        if self.api_mode not in API_MODES:
            raise ValueError(f"api_mode must be one of {API_MODES}")

    @property
    def name(self) -> str:
        """Stable name used in CLI flags, report rows, and JSONL records."""
        if self.kind == "safim-api":
            return f"safim-api:{self.api_mode}"
        if self.kind == "multi-line" and self.num_lines is not None:
            return f"multi-line:{self.num_lines}"
        return self.kind

    @classmethod
    def parse(cls, text: str, *, default_api_mode: str = "balanced") -> "Strategy":
        """Parse a strategy name such as ``multi-line`` or ``safim-api:literal``."""
        base, sep, arg = text.strip().partition(":")
        if base == "safim-api":
            return cls("safim-api", api_mode=arg if sep else default_api_mode)
        if base == "multi-line":
            if sep:
                try:
                    return cls("multi-line", num_lines=int(arg))
                except ValueError:
                    raise ValueError(f"bad multi-line count {arg!r}") from None
            return cls("multi-line")
        if sep:
            raise ValueError(f"strategy {base!r} takes no {arg!r} argument")
        if base not in STRATEGY_KINDS:
            raise ValueError(
                f"unknown strategy {text!r}; valid: {', '.join(STRATEGY_KINDS)}"
            )
        return cls(base)


def truncate_single_line(completion: str) -> str:
    """Keep only the first line that is neither blank nor a ``#`` comment.

    Indentation of the surviving line is preserved; if every line is blank
    or a comment the result is empty.
    """
    for line in completion.splitlines():
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            continue
        return line
    return ""


def truncate_multi_line(completion: str, num_lines: int) -> str:
    """Cut the completion after its ``num_lines``-th countable line.

    Countable means non-blank and not a ``#`` comment.  Blank and comment
    lines before the cut are kept; everything after it is dropped.  When
    the completion has fewer countable lines than requested it is returned
    whole.
    """
    if num_lines < 1:
        raise ValueError("num_lines must be >= 1")
    kept = []
    counted = 0
    for line in completion.split("\n"):
        kept.append(line)
        stripped = line.strip()
        if stripped and not stripped.startswith("#"):
            counted += 1
            if counted == num_lines:
                break
    return "\n".join(kept)


def overlap_suffix_prefix_len(left: str, right: str) -> int:
    """Length of the longest suffix of ``left`` that is a prefix of ``right``.

    Greedy scan from the largest candidate length downward.
    """
    for i in range(min(len(left), len(right)), 0, -1):
        if right.startswith(left[-i:]):
            return i
    return 0


_SENTINEL = object()


def overlap_suffix_prefix_len_linear(left: str, right: str) -> int:
    """Linear-time variant of :func:`overlap_suffix_prefix_len`.

    Runs the classic prefix-function over ``right + sentinel + left``; the
    sentinel compares unequal to every character, capping borders at the
    shorter operand.  Agrees byte-for-byte with the greedy scan.
    """
    cap = min(len(left), len(right))
    if cap == 0:
        return 0
    seq = list(right[:cap]) + [_SENTINEL] + list(left[-cap:])
    table = [0] * len(seq)
    k = 0
    for i in range(1, len(seq)):
        while k and seq[i] != seq[k]:
            k = table[k - 1]
        if seq[i] == seq[k]:
            k += 1
        table[i] = k
    return table[-1]


def remove_overlap_prefix_middle(prefix: str, middle: str) -> str:
    """Drop from the start of ``middle`` its longest overlap with ``prefix``.

    The overlap is the largest ``i`` such that the last ``i`` characters of
    the prefix equal the first ``i`` characters of the middle.
    """
    return middle[overlap_suffix_prefix_len(prefix, middle):]


def remove_overlap_middle_suffix(middle: str, suffix: str) -> str:
    """Drop from the end of ``middle`` its longest overlap with ``suffix``.

    The overlap is the largest ``i`` such that the last ``i`` characters of
    the middle equal the first ``i`` characters of the suffix.
    """
    i = overlap_suffix_prefix_len(middle, suffix)
    return middle[: len(middle) - i]


def trim_overlaps(prefix: str, middle: str, suffix: str) -> str:
    """Remove prefix/middle overlap, then middle/suffix overlap, in that order."""
    return remove_overlap_middle_suffix(
        remove_overlap_prefix_middle(prefix, middle), suffix
    )


def truncate_api_call(completion: str, mode: str = "balanced") -> str:
    """Cut the completion just after the closing parenthesis of a call.

    ``literal`` cuts after the first ``)`` character no matter what.
    ``balanced`` cuts after the ``)`` that balances the first unmatched
    ``(``; a ``)`` seen before any ``(`` still ends the cut, which makes
    the balanced mode degrade to the literal one on such inputs.  Without
    any closing parenthesis the completion is returned whole.
    """
    if mode not in API_MODES:
        raise ValueError(f"mode must be one of {API_MODES}")
    if mode == "literal":
        idx = completion.find(")")
        return completion if idx < 0 else completion[: idx + 1]
    depth = 0
    for i, ch in enumerate(completion):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth <= 0:
                return completion[: i + 1]
    return completion


def countable_lines(text: str) -> int:
    """Number of non-blank, non-comment lines in ``text``."""
    return sum(
        1
        for line in text.split("\n")
        if line.strip() and not line.strip().startswith("#")
    )


def truncate_to_structure(completion: str, ground_truth: str) -> str:
    """Truncate the completion to the line structure of ``ground_truth``.

    Reduces to :func:`truncate_multi_line` with the ground truth's
    countable line count.  A ground truth with no countable lines leaves
    the completion untouched.
    """
    if not ground_truth:
        raise ValueError("ground_truth must be non-empty")
    n = countable_lines(ground_truth)
    if n == 0:
        return completion
    return truncate_multi_line(completion, n)


def apply_strategy(
    strategy: Strategy,
    completion: str,
    prefix: str = "",
    suffix: str = "",
    ground_truth: str | None = None,
) -> str:
    """Route ``completion`` through the rule selected by ``strategy``.

    ``prefix``/``suffix`` feed the overlap trimmers; ``ground_truth`` is
    required to derive a line count for ``multi-line`` (when no explicit
    count was pinned) and for ``safim-structure``.
    """
    kind = strategy.kind
    if kind == "none":
        return completion
    if kind in ("single-line", "safim-one-line"):
        return truncate_single_line(completion)
    if kind == "multi-line":
        n = strategy.num_lines
        if n is None:
            if ground_truth is None:
                raise ValueError(
                    "multi-line truncation needs ground_truth to derive the line count"
                )
            n = max(1, countable_lines(ground_truth))
        return truncate_multi_line(completion, n)
    if kind in ("random-span", "overlap-trim"):
        return trim_overlaps(prefix, completion, suffix)
    if kind == "safim-structure":
        if ground_truth is None:
            raise ValueError("safim-structure truncation needs ground_truth")
        return truncate_to_structure(completion, ground_truth)
    if kind == "safim-api":
        return truncate_api_call(completion, strategy.api_mode)
    raise ValueError(f"unhandled strategy kind {kind!r}")
