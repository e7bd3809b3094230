"""Small JSONL helpers shared by the pipeline stages."""

import gzip
import json
from collections.abc import Iterable, Iterator, Mapping
from pathlib import Path
from typing import IO


def open_maybe_gzip(path: str | Path, mode: str = "rt") -> IO[str]:
    path = Path(path)
    if path.suffix == ".gz":
        return gzip.open(path, mode, encoding="utf-8")
    return open(path, mode, encoding="utf-8")


def iter_jsonl_lines(path: str | Path) -> Iterator[tuple[int, str]]:
    """Yield (line_number, raw_line) for every non-blank line."""
    with open_maybe_gzip(path) as handle:
        for lineno, line in enumerate(handle, start=1):
            if line.strip():
                yield lineno, line


def iter_jsonl_objects(path: str | Path) -> Iterator[tuple[int, dict]]:
    """Yield (line_number, parsed_object); raises on malformed lines."""
    for lineno, line in iter_jsonl_lines(path):
        yield lineno, json.loads(line)


def write_jsonl(path: str | Path, rows: Iterable[Mapping]) -> int:
    """Write one JSON object per line; returns the number of rows written."""
    count = 0
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for row in rows:
            handle.write(json.dumps(row, ensure_ascii=False, sort_keys=True))
            handle.write("\n")
            count += 1
    return count
