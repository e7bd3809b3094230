"""Corpus ingestion and filtering: extraction, documentation filter,
exact deduplication, and benchmark decontamination.

All filters are pure functions over immutable :class:`SourceFunction`
lists; output order always follows input order.
"""

import ast
import hashlib
import logging
import re
import subprocess
import tempfile
import textwrap
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass
from pathlib import Path

log = logging.getLogger(__name__)

__all__ = [
    "Origin",
    "SourceFunction",
    "decontaminate",
    "dedup_exact",
    "filter_documented",
    "filter_typecheck",
    "function_docstring",
    "load_corpus",
    "normalize_whitespace",
    "read_functions_jsonl",
    "scan_function_spans",
    "source_function_from_dict",
]

# A new function starts on a `def` / `async def` line; the scanner treats
# the smallest indent at which `def` appears as the file's top level.
_DEF_LINE = re.compile(r"^([ \t]*)(?:async[ \t]+)?def[ \t]", re.MULTILINE)


@dataclass(frozen=True)
class Origin:
    """Where a function came from: file path plus byte offsets."""

    path: str
    start: int
    end: int


@dataclass(frozen=True)
class SourceFunction:
    """One corpus function, byte-preserving from signature through body."""

    id: str
    content: str
    origin: Origin
    has_docstring: bool
    content_hash: str

    @classmethod
    def from_content(cls, content: str, origin: Origin, func_id: str) -> "SourceFunction":
        if not content:
            raise ValueError("function content must be non-empty")
        return cls(
            id=func_id,
            content=content,
            origin=origin,
            has_docstring=function_docstring(content) is not None,
            content_hash=hashlib.sha256(content.encode("utf-8")).hexdigest(),
        )

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "content": self.content,
            "origin": {
                "path": self.origin.path,
                "start": self.origin.start,
                "end": self.origin.end,
            },
            "has_docstring": self.has_docstring,
            "content_hash": self.content_hash,
        }


def source_function_from_dict(obj: dict) -> SourceFunction:
    origin = obj["origin"]
    return SourceFunction(
        id=obj["id"],
        content=obj["content"],
        origin=Origin(path=origin["path"], start=origin["start"], end=origin["end"]),
        has_docstring=obj["has_docstring"],
        content_hash=obj["content_hash"],
    )


def function_docstring(content: str) -> str | None:
    """Docstring of the first function in ``content``, or None.

    Returns the raw string literal value (uncleaned) so length thresholds
    apply to what the author actually wrote.
    """
    try:
        tree = ast.parse(textwrap.dedent(content))
    except (SyntaxError, ValueError):
        return None
    for node in tree.body:
        if isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef)):
            return ast.get_docstring(node, clean=False)
    return None


def scan_function_spans(text: str) -> list[tuple[int, int]]:
    """Character spans of top-level functions found by the line scanner.

    Each span runs from the start of a signature line to the start of the
    next one (or end of file), so concatenating sibling spans reproduces
    the covered file region byte-exactly.
    """
    matches = list(_DEF_LINE.finditer(text))
    if not matches:
        return []
    base = min(len(m.group(1)) for m in matches)
    starts = [m.start() for m in matches if len(m.group(1)) == base]
    spans = []
    for i, start in enumerate(starts):
        end = starts[i + 1] if i + 1 < len(starts) else len(text)
        spans.append((start, end))
    return spans


def _iter_source_files(path: Path) -> Iterable[Path]:
    if path.is_dir():
        yield from sorted(path.rglob("*.py"))
    else:
        yield path


def load_corpus(
    paths: Sequence[str | Path],
    on_error: Callable[[str, Exception], None] | None = None,
) -> list[SourceFunction]:
    """Extract one :class:`SourceFunction` per top-level function in ``paths``.

    Directories are walked recursively for ``*.py`` files.  Unreadable
    paths produce an error record through ``on_error`` (default: a warning
    log) and processing continues.  An empty result triggers a warning.
    """

    def record(path: str, exc: Exception) -> None:
        if on_error is not None:
            on_error(path, exc)
        else:
            log.warning("skipping %s: %s", path, exc)

    funcs: list[SourceFunction] = []
    for raw in paths:
        root = Path(raw)
        if not root.exists():
            record(str(root), FileNotFoundError(f"no such path: {root}"))
            continue
        for file in _iter_source_files(root):
            try:
                text = file.read_text(encoding="utf-8")
            except (OSError, UnicodeDecodeError) as exc:
                record(str(file), exc)
                continue
            for idx, (start, end) in enumerate(scan_function_spans(text)):
                funcs.append(
                    SourceFunction.from_content(
                        text[start:end],
                        Origin(path=str(file), start=start, end=end),
                        func_id=f"{file}:{idx}",
                    )
                )
    if not funcs:
        log.warning("no functions found under %s", [str(p) for p in paths])
    return funcs


def filter_documented(
    funcs: Sequence[SourceFunction], min_doc_chars: int = 20
) -> list[SourceFunction]:
    """Keep functions whose docstring is at least ``min_doc_chars`` long."""
    if min_doc_chars < 0:
        raise ValueError("min_doc_chars must be >= 0")
    kept = []
    for func in funcs:
        doc = function_docstring(func.content)
        if doc is not None and len(doc) >= min_doc_chars:
            kept.append(func)
    return kept


def dedup_exact(funcs: Sequence[SourceFunction]) -> list[SourceFunction]:
    """Keep the first occurrence of each content hash, preserving order."""
    seen: set[str] = set()
    kept = []
    for func in funcs:
        if func.content_hash in seen:
            continue
        seen.add(func.content_hash)
        kept.append(func)
    return kept


def normalize_whitespace(text: str) -> str:
    """Collapse every run of whitespace to a single space and trim ends."""
    return " ".join(text.split())


def decontaminate(
    funcs: Sequence[SourceFunction], benchmark_texts: Sequence[str]
) -> list[SourceFunction]:
    """Drop functions overlapping any benchmark text.

    A function is contaminated when its whitespace-normalized content
    contains, or is contained in, a whitespace-normalized benchmark text.
    """
    normalized_benchmarks = [
        nb for nb in (normalize_whitespace(t) for t in benchmark_texts) if nb
    ]
    if not normalized_benchmarks:
        return list(funcs)
    kept = []
    for func in funcs:
        nf = normalize_whitespace(func.content)
        if any(nf in nb or nb in nf for nb in normalized_benchmarks):
            continue
        kept.append(func)
    return kept


def filter_typecheck(
    funcs: Sequence[SourceFunction],
    command: Sequence[str],
    on_error: Callable[[str, Exception], None] | None = None,
) -> list[SourceFunction]:
    """Run an external checker command per function; drop on nonzero exit.

    The command is invoked as ``command + [file]`` with the function body
    (dedented) written to a temporary file.  Failures to launch the
    command are reported via ``on_error`` and the function is kept, so a
    misconfigured checker never silently empties a corpus.
    """
    if not command:
        raise ValueError("command must be non-empty")
    kept = []
    for func in funcs:
        with tempfile.NamedTemporaryFile(
            "w", suffix=".py", encoding="utf-8", delete=True
        ) as handle:
            handle.write(textwrap.dedent(func.content))
            handle.flush()
            try:
                proc = subprocess.run(
                    [*command, handle.name],
                    stdout=subprocess.DEVNULL,
                    stderr=subprocess.DEVNULL,
                    check=False,
                )
            except OSError as exc:
                if on_error is not None:
                    on_error(func.id, exc)
                else:
                    log.warning("type check of %s failed to run: %s", func.id, exc)
                kept.append(func)
                continue
        if proc.returncode == 0:
            kept.append(func)
    return kept


def read_functions_jsonl(path: str | Path) -> list[SourceFunction]:
    """Load SourceFunction records from a JSONL file."""
    from fim_forge._jsonl import iter_jsonl_objects

    return [source_function_from_dict(obj) for _, obj in iter_jsonl_objects(path)]
