"""Prompt rendering and middle extraction.

The two templates ship as resource files and are pinned byte-for-byte by
golden tests.  Substitution is plain token splicing: inserted code is
never escaped, and placeholder-looking text inside the inserted code is
left alone.
"""

import re
from dataclasses import dataclass
from importlib import resources

from fim_forge.corpus import SourceFunction

__all__ = [
    "PromptRendering",
    "extract_middle_from_response",
    "render_datagen_prompt",
    "render_fim_instruct_prompt",
    "template_text",
]

TEMPLATE_FILES = {
    "datagen": "datagen.txt",
    "fim_instruct": "fim_instruct.txt",
}

_FENCE = re.compile(r"```[^\n]*\n(.*?)```", re.DOTALL)


@dataclass(frozen=True)
class PromptRendering:
    template_id: str
    text: str


def template_text(template_id: str) -> str:
    """Raw template bytes for ``datagen`` or ``fim_instruct``."""
    try:
        filename = TEMPLATE_FILES[template_id]
    except KeyError:
        raise ValueError(f"unknown template {template_id!r}") from None
    package = resources.files("fim_forge").joinpath("templates").joinpath(filename)
    return package.read_text(encoding="utf-8")


def _splice(template: str, values: dict[str, str]) -> str:
    """Replace each placeholder exactly once, without rescanning values.

    Placeholder positions are located in the template alone, so inserted
    code containing brace tokens can never be substituted again.
    """
    positions = []
    for token, value in values.items():
        if template.count(token) != 1:
            raise ValueError(f"template must contain {token} exactly once")
        idx = template.index(token)
        positions.append((idx, idx + len(token), value))
    positions.sort()
    pieces = []
    cursor = 0
    for start, end, value in positions:
        pieces.append(template[cursor:start])
        pieces.append(value)
        cursor = end
    pieces.append(template[cursor:])
    return "".join(pieces)


def render_datagen_prompt(func: SourceFunction) -> PromptRendering:
    """Render the data-generation prompt for one source function."""
    if not func.content:
        raise ValueError("function content must be non-empty")
    text = _splice(template_text("datagen"), {"{content}": func.content})
    return PromptRendering(template_id="datagen", text=text)


def render_fim_instruct_prompt(prefix: str, suffix: str) -> PromptRendering:
    """Render the middle-generation instruction for a prefix/suffix pair."""
    text = _splice(
        template_text("fim_instruct"), {"{prefix}": prefix, "{suffix}": suffix}
    )
    return PromptRendering(template_id="fim_instruct", text=text)


def extract_middle_from_response(response: str) -> str:
    """Contents of the first fenced code block in a model response.

    The language tag after the opening fence is ignored.  Responses
    without any fence fall back to the whole text trimmed of leading and
    trailing blank lines.
    """
    match = _FENCE.search(response)
    if match is not None:
        body = match.group(1)
        return body[:-1] if body.endswith("\n") else body
    lines = response.split("\n")
    while lines and not lines[0].strip():
        lines.pop(0)
    while lines and not lines[-1].strip():
        lines.pop()
    return "\n".join(lines)
