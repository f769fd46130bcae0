"""Transports that carry a rendered payload to a model and bring back text.

* :class:`HttpChatTransport`   OpenAI-compatible ``/chat/completions`` over httpx
* :class:`HttpJsonTransport`   raw JSON POST (safety/moderation endpoints)
* :class:`ReplayTransport`     answers from a fixture file, never touches the network
* :class:`RecordingTransport`  wraps another transport and appends to a fixture file
"""

from __future__ import annotations

import base64
import json
import logging
import mimetypes
import os
import threading
import time
from pathlib import Path
from typing import Protocol

import httpx

from ..errors import MissingFixtureError, TransportError
from .parsing import RawResponse

log = logging.getLogger(__name__)


class Transport(Protocol):
    def send(self, payload: dict) -> RawResponse: ...


def fixture_key(payload: dict) -> tuple[str, str]:
    return payload["template"], payload["record_id"]


class ReplayTransport:
    """Line-delimited fixtures ``{"template", "record_id", "response"}``."""

    def __init__(self, fixture_path):
        self.fixture_path = Path(fixture_path)
        self.table: dict[tuple[str, str], str] = {}
        with self.fixture_path.open(encoding="utf-8") as fh:
            for n, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                obj = json.loads(line)
                key = (obj["template"], obj["record_id"])
                if key in self.table and self.table[key] != obj["response"]:
                    raise ValueError(f"{self.fixture_path}:{n}: conflicting fixture for {key}")
                self.table[key] = obj["response"]
        self.requests = 0

    def send(self, payload: dict) -> RawResponse:
        self.requests += 1
        key = fixture_key(payload)
        try:
            return RawResponse(self.table[key], 0.0, "replay")
        except KeyError:
            raise MissingFixtureError(
                f"no fixture for template={key[0]!r} record={key[1]!r} in {self.fixture_path}"
            ) from None


class RecordingTransport:
    def __init__(self, inner: Transport, fixture_path):
        self.inner = inner
        self.fixture_path = Path(fixture_path)
        self._lock = threading.Lock()

    def send(self, payload: dict) -> RawResponse:
        resp = self.inner.send(payload)
        line = json.dumps(
            {"template": payload["template"], "record_id": payload["record_id"], "response": resp.text},
            ensure_ascii=False, sort_keys=True,
        )
        with self._lock, self.fixture_path.open("a", encoding="utf-8") as fh:
            fh.write(line + "\n")
        return resp


def _image_url(ref: str) -> str:
    if "://" in ref:
        return ref
    path = Path(ref)
    if not path.is_file():
        raise TransportError(f"image {ref!r} not found", retriable=False)
    mime = mimetypes.guess_type(path.name)[0] or "application/octet-stream"
    return f"data:{mime};base64,{base64.b64encode(path.read_bytes()).decode('ascii')}"


class _HttpBase:
    def __init__(self, endpoint: str, api_key_env: str | None = None, client: httpx.Client | None = None,
                 max_attempts: int = 3, backoff: float = 0.5, timeout: float = 60.0, max_in_flight: int = 4):
        self.endpoint = endpoint
        self.api_key_env = api_key_env
        self.client = client or httpx.Client(timeout=timeout)
        self.max_attempts = max_attempts
        self.backoff = backoff
        self._slots = threading.BoundedSemaphore(max_in_flight)
        self.requests = 0

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        secret = os.environ.get(self.api_key_env) if self.api_key_env else None
        if secret:
            headers["Authorization"] = f"Bearer {secret}"
        return headers

    def _post(self, body: dict) -> tuple[dict, float]:
        last = None
        with self._slots:
            for attempt in range(self.max_attempts):
                if attempt:
                    time.sleep(self.backoff * 2 ** (attempt - 1))
                t0 = time.perf_counter()
                try:
                    self.requests += 1
                    resp = self.client.post(self.endpoint, json=body, headers=self._headers())
                except httpx.HTTPError as exc:
                    # exception text may echo the request; log the type only
                    log.warning("request to %s failed (attempt %d): %s",
                                self.endpoint, attempt + 1, type(exc).__name__)
                    last = type(exc).__name__
                    continue
                elapsed = time.perf_counter() - t0
                if resp.status_code == 429 or resp.status_code >= 500:
                    last = f"HTTP {resp.status_code}"
                    continue
                if resp.status_code >= 400:
                    raise TransportError(f"{self.endpoint} returned HTTP {resp.status_code}", retriable=False)
                try:
                    return resp.json(), elapsed
                except ValueError:
                    raise TransportError(f"{self.endpoint} returned non-JSON body", retriable=False) from None
        raise TransportError(f"{self.endpoint} failed after {self.max_attempts} attempts ({last})")


class HttpChatTransport(_HttpBase):
    def __init__(self, endpoint: str, model_name: str, **kwargs):
        super().__init__(endpoint, **kwargs)
        self.model_name = model_name

    def build_body(self, payload: dict) -> dict:
        messages = []
        if payload.get("system"):
            messages.append({"role": "system", "content": payload["system"]})
        if payload.get("image"):
            content = [
                {"type": "text", "text": payload["user"]},
                {"type": "image_url", "image_url": {"url": _image_url(payload["image"])}},
            ]
        else:
            content = payload["user"]
        messages.append({"role": "user", "content": content})
        return {"model": self.model_name, "messages": messages, "temperature": 0}

    def send(self, payload: dict) -> RawResponse:
        data, elapsed = self._post(self.build_body(payload))
        try:
            text = data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError):
            raise TransportError("chat response lacks choices[0].message.content", retriable=False) from None
        return RawResponse(text or "", elapsed, "ok")


class HttpJsonTransport(_HttpBase):
    """POST ``{"model", "input", "image"}`` and return the JSON body as text."""

    def __init__(self, endpoint: str, model_name: str, **kwargs):
        super().__init__(endpoint, **kwargs)
        self.model_name = model_name

    def send(self, payload: dict) -> RawResponse:
        body = {"model": self.model_name, "input": payload["user"]}
        if payload.get("image"):
            body["image"] = _image_url(payload["image"])
        data, elapsed = self._post(body)
        return RawResponse(json.dumps(data, sort_keys=True), elapsed, "ok")
