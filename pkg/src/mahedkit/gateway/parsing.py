"""Turn free-text model output into a label from a template's vocabulary.

Tried in order:

1. ``exact``                   the whole (normalized) response is a known form
2. ``final_answer_extraction`` text after the last ``Final Answer:`` marker
3. ``normalized_match``        exactly one label occurs as a whole-word phrase

Anything else raises :class:`LabelParseError`; no label is guessed.
"""

from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass

from ..errors import LabelParseError
from .templates import PromptTemplate, get_template

_MARKER = re.compile(r"final\s*answer\s*[:：]", re.IGNORECASE)


@dataclass(frozen=True)
class RawResponse:
    text: str
    latency: float = 0.0
    status: str = "ok"


@dataclass(frozen=True)
class ParsedLabel:
    label: str
    parse_method: str
    raw: str = ""


def normalize(text: str) -> str:
    """Lowercase, turn ``_`` into spaces, drop punctuation/markup, squeeze spaces."""
    text = unicodedata.normalize("NFKC", text).lower().replace("_", " ")
    kept = [ch if (ch.isalnum() or ch.isspace()) else " " for ch in text]
    return " ".join("".join(kept).split())


def _exact(text: str, template: PromptTemplate):
    return template.surface_forms.get(normalize(text))


def _containment(text: str, template: PromptTemplate) -> set:
    tokens = normalize(text).split()
    used = [False] * len(tokens)
    found = set()
    forms = sorted(template.surface_forms, key=lambda f: -len(f.split()))
    for form in forms:
        parts = form.split()
        k = len(parts)
        for i in range(len(tokens) - k + 1):
            if tokens[i:i + k] == parts and not any(used[i:i + k]):
                found.add(template.surface_forms[form])
                for j in range(i, i + k):
                    used[j] = True
    return found


def parse_label(response: RawResponse | str, template: PromptTemplate | str) -> ParsedLabel:
    if isinstance(template, str):
        template = get_template(template)
    raw = response.text if isinstance(response, RawResponse) else str(response)

    label = _exact(raw, template)
    if label is not None:
        return ParsedLabel(label, "exact", raw)

    markers = list(_MARKER.finditer(raw))
    scope = raw
    if markers:
        tail = raw[markers[-1].end():].strip()
        answer = tail.splitlines()[0] if tail else ""
        label = _exact(answer, template)
        if label is not None:
            return ParsedLabel(label, "final_answer_extraction", raw)
        scope = tail

    found = _containment(scope, template)
    if len(found) == 1:
        return ParsedLabel(found.pop(), "normalized_match", raw)
    if not found:
        raise LabelParseError(f"no {template.id} label found", raw)
    raise LabelParseError(f"ambiguous {template.id} answer ({', '.join(sorted(found))})", raw)
