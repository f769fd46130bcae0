"""Remote predictors behind one contract: render -> transport -> parse.

The gateway never invents a label. Parse failures and transport failures
propagate to the caller, which decides what a failed record means.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from ..corpus import Record
from ..errors import ContractViolation
from .parsing import ParsedLabel, RawResponse, normalize, parse_label
from .templates import TEMPLATES, PromptTemplate, get_template, render
from .transport import (
    HttpChatTransport,
    HttpJsonTransport,
    RecordingTransport,
    ReplayTransport,
    Transport,
)

__all__ = [
    "PredictorSpec", "LlmPredictor", "SafetyAdapter", "classify", "safety_adapter_flag",
    "interpret_safety_payload", "make_transport", "ParsedLabel", "RawResponse", "PromptTemplate",
    "TEMPLATES", "get_template", "render", "parse_label", "normalize", "ReplayTransport",
    "RecordingTransport", "HttpChatTransport", "HttpJsonTransport",
]

PREDICTOR_KINDS = ("remote_chat", "remote_vision", "safety_adapter", "replay")
SAFETY_TEMPLATE = "safety"
FLAGGED_HATE = "flagged_hate"
NOT_FLAGGED = "not_flagged"
# Llama Guard taxonomy code for the hate category
LLAMA_GUARD_HATE = "S10"
HATE_CATEGORY_KEYS = ("hate", "hate/threatening")


@dataclass(frozen=True)
class PredictorSpec:
    kind: str
    model_name: str
    template_id: str
    endpoint: str | None = None
    fixture_path: str | None = None
    api_key_env: str | None = None

    def __post_init__(self):
        if self.kind not in PREDICTOR_KINDS:
            raise ValueError(f"unknown predictor kind {self.kind!r}")
        if self.kind in ("remote_chat", "remote_vision", "safety_adapter") and not self.endpoint \
                and not self.fixture_path:
            raise ValueError(f"{self.kind} predictor requires an endpoint")
        if self.kind == "replay" and not self.fixture_path:
            raise ValueError("replay predictor requires a fixture path")
        if self.template_id != SAFETY_TEMPLATE:
            get_template(self.template_id)

    @classmethod
    def from_dict(cls, obj: dict) -> "PredictorSpec":
        return cls(
            kind=obj["kind"], model_name=obj.get("model_name", obj["kind"]),
            template_id=obj.get("template", obj.get("template_id", SAFETY_TEMPLATE)),
            endpoint=obj.get("endpoint"), fixture_path=obj.get("fixtures", obj.get("fixture_path")),
            api_key_env=obj.get("api_key_env"),
        )


def make_transport(spec: PredictorSpec, client=None, record_to=None) -> Transport:
    """Build the transport for ``spec``.

    A spec with a fixture path and no endpoint replays; ``record_to`` wraps
    a live transport in a recorder.
    """
    if spec.kind == "replay" or (spec.fixture_path and not spec.endpoint):
        return ReplayTransport(spec.fixture_path)
    kwargs = {"api_key_env": spec.api_key_env}
    if client is not None:
        kwargs["client"] = client
    if spec.kind == "safety_adapter":
        transport = HttpJsonTransport(spec.endpoint, spec.model_name, **kwargs)
    else:
        transport = HttpChatTransport(spec.endpoint, spec.model_name, **kwargs)
    return RecordingTransport(transport, record_to) if record_to else transport


class LlmPredictor:
    """Callable ``record -> ParsedLabel`` for one (model, template) pair."""

    def __init__(self, spec: PredictorSpec, transport: Transport | None = None, name: str | None = None):
        self.spec = spec
        self.template = get_template(spec.template_id)
        self.transport = transport or make_transport(spec)
        self.name = name or f"{spec.model_name}:{spec.template_id}"

    def __call__(self, record: Record) -> ParsedLabel:
        payload = render(self.template, record)
        return parse_label(self.transport.send(payload), self.template)


def classify(record: Record, predictor: PredictorSpec, transport: Transport | None = None) -> ParsedLabel:
    return LlmPredictor(predictor, transport)(record)


def interpret_safety_payload(payload, policy: str = "hate_only") -> str:
    """Map a safety classifier's output to ``flagged_hate`` / ``not_flagged``.

    Accepted shapes: ``{"flagged", "categories"}``, a moderation response
    ``{"results": [...]}``, or Llama-Guard style text (``safe`` /
    ``unsafe\\nS10,...``). ``policy="hate_only"`` counts only the hate
    category; ``"any_flag"`` counts the overall flag.
    """
    if policy not in ("hate_only", "any_flag"):
        raise ValueError(f"unknown safety policy {policy!r}")
    if isinstance(payload, str):
        text = payload.strip()
        try:
            payload = json.loads(text)
        except ValueError:
            return _interpret_guard_text(text, policy)
    if not isinstance(payload, dict):
        raise ContractViolation(f"safety payload must be an object, got {type(payload).__name__}")
    if "results" in payload:
        results = payload["results"]
        if not isinstance(results, list) or not results:
            raise ContractViolation("safety payload has an empty results list")
        outcomes = [interpret_safety_payload(r, policy) for r in results]
        return FLAGGED_HATE if FLAGGED_HATE in outcomes else NOT_FLAGGED
    if "flagged" not in payload or not isinstance(payload["flagged"], bool):
        raise ContractViolation("safety payload lacks a boolean 'flagged' field")
    categories = payload.get("categories", {})
    if not isinstance(categories, dict):
        raise ContractViolation("safety payload 'categories' must be an object")
    if policy == "any_flag":
        return FLAGGED_HATE if payload["flagged"] else NOT_FLAGGED
    hit = any(bool(categories.get(k)) for k in HATE_CATEGORY_KEYS)
    return FLAGGED_HATE if payload["flagged"] and hit else NOT_FLAGGED


def _interpret_guard_text(text: str, policy: str) -> str:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].lower() not in ("safe", "unsafe"):
        raise ContractViolation(f"unrecognized safety classifier output {text[:40]!r}")
    if lines[0].lower() == "safe":
        return NOT_FLAGGED
    if policy == "any_flag":
        return FLAGGED_HATE
    codes = {c.strip().upper() for ln in lines[1:] for c in ln.split(",")}
    return FLAGGED_HATE if LLAMA_GUARD_HATE in codes else NOT_FLAGGED


class SafetyAdapter:
    def __init__(self, spec: PredictorSpec, transport: Transport | None = None, policy: str = "hate_only"):
        if spec.kind not in ("safety_adapter", "replay"):
            raise ValueError("SafetyAdapter needs a safety_adapter or replay spec")
        self.spec = spec
        self.policy = policy
        self.transport = transport or make_transport(spec)

    @property
    def name(self) -> str:
        return f"{self.spec.model_name}:{self.policy}"

    def flag(self, record: Record) -> str:
        payload = {
            "template": SAFETY_TEMPLATE,
            "record_id": record.id,
            "system": None,
            "user": record.text,
            "image": record.image_ref,
        }
        return interpret_safety_payload(self.transport.send(payload).text, self.policy)


def safety_adapter_flag(record: Record, adapter: PredictorSpec, transport: Transport | None = None,
                        policy: str = "hate_only") -> str:
    return SafetyAdapter(adapter, transport, policy).flag(record)
