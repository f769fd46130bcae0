"""Per-modality embedding providers and a content-addressed vector cache.

Three provider kinds share one contract (512 finite floats per call):

* ``stub``   - pseudo-random unit vector seeded by a digest of the content;
               optional label leak adds a class-dependent offset so synthetic
               fixtures are learnable.
* ``remote`` - HTTP JSON endpoint, bounded retries.
* ``replay`` - answers from a line-delimited file of captured vectors.
"""

from __future__ import annotations

import base64
import hashlib
import json
import logging
import os
import tempfile
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

import httpx
import numpy as np

from .errors import ContractViolation, InputError, TransportError

log = logging.getLogger(__name__)

EMBEDDING_DIM = 512
MODALITIES = ("text", "image")
CACHE_FORMAT = "mahedkit-embedding/1"


@dataclass(frozen=True)
class EmbeddingProviderSpec:
    kind: str = "stub"
    model_name: str = "stub-v1"
    endpoint: str | None = None
    api_key_env: str | None = None
    fixture_path: str | None = None
    label_leak: float = 0.0
    timeout: float = 30.0
    max_attempts: int = 3
    backoff: float = 0.5

    def __post_init__(self):
        if self.kind not in ("remote", "stub", "replay"):
            raise ValueError(f"unknown provider kind {self.kind!r}")
        if self.kind == "remote" and not self.endpoint:
            raise ValueError("remote provider requires an endpoint")
        if self.kind == "replay" and not self.fixture_path:
            raise ValueError("replay provider requires a fixture path")
        if self.label_leak < 0:
            raise ValueError("label_leak must be non-negative")

    def __repr__(self):
        # api_key_env names a variable, never the secret itself
        return (f"EmbeddingProviderSpec(kind={self.kind!r}, model_name={self.model_name!r}, "
                f"endpoint={self.endpoint!r}, label_leak={self.label_leak!r})")


def content_bytes(content: str, modality: str) -> bytes:
    """Bytes that identify ``content``: UTF-8 text, or the image file's bytes."""
    if modality == "text":
        if not isinstance(content, str) or content == "":
            raise InputError("text content must be a non-empty string")
        return content.encode("utf-8")
    if modality == "image":
        if not content:
            raise InputError("image reference is empty")
        path = Path(content)
        if not path.is_file():
            raise InputError(f"unresolvable image reference {content!r}")
        return path.read_bytes()
    raise ValueError(f"unknown modality {modality!r}")


def cache_key(modality: str, model_name: str, data: bytes, salt: str = "") -> str:
    h = hashlib.sha256()
    for part in (modality.encode(), model_name.encode(), salt.encode()):
        h.update(len(part).to_bytes(8, "big"))
        h.update(part)
    h.update(data)
    return h.hexdigest()


def validate_vector(values) -> np.ndarray:
    vec = np.asarray(values, dtype=np.float64)
    if vec.ndim != 1 or vec.shape[0] != EMBEDDING_DIM:
        raise ContractViolation(
            f"provider returned {vec.shape[0] if vec.ndim == 1 else vec.shape} values, "
            f"expected {EMBEDDING_DIM}"
        )
    if not np.all(np.isfinite(vec)):
        raise ContractViolation("provider returned non-finite values")
    return vec


def _unit_from_digest(digest: bytes) -> np.ndarray:
    rng = np.random.default_rng(np.frombuffer(digest, dtype=np.uint32))
    vec = rng.standard_normal(EMBEDDING_DIM)
    return vec / np.linalg.norm(vec)


def stub_vector(data: bytes, modality: str, label: str | None = None, leak: float = 0.0) -> np.ndarray:
    """Deterministic unit vector for ``data``.

    With ``leak > 0`` and a label, the vector is shifted by ``leak`` times a
    unit direction derived from (modality, label) and renormalized.
    """
    vec = _unit_from_digest(hashlib.sha256(modality.encode() + b"\0" + data).digest())
    if leak > 0 and label is not None:
        direction = _unit_from_digest(hashlib.sha256(f"leak\0{modality}\0{label}".encode()).digest())
        vec = vec + leak * direction
        vec = vec / np.linalg.norm(vec)
    return vec


class EmbeddingCache:
    """One file per entry, named by hex digest.

    File layout: a JSON header line ``{"format", "modality", "model_name",
    "created_at"}`` followed by 512 lines, each a ``repr`` float (exact
    round-trip). Readers run concurrently; writers are serialized and
    publish atomically via rename.
    """

    def __init__(self, directory):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self._write_lock = threading.Lock()

    def _path(self, key: str) -> Path:
        return self.directory / f"{key}.emb"

    def get(self, key: str) -> np.ndarray | None:
        path = self._path(key)
        try:
            text = path.read_text(encoding="utf-8")
        except FileNotFoundError:
            return None
        try:
            header, *rows = text.splitlines()
            meta = json.loads(header)
            if meta.get("format") != CACHE_FORMAT:
                raise ValueError(f"unknown format {meta.get('format')!r}")
            return validate_vector([float(r) for r in rows])
        except (ValueError, ContractViolation) as exc:
            log.warning("dropping corrupted cache entry %s (%s)", path.name, exc)
            try:
                path.unlink()
            except FileNotFoundError:
                pass
            return None

    def put(self, key: str, vector, modality: str = "", model_name: str = "") -> None:
        vec = validate_vector(vector)
        header = {
            "format": CACHE_FORMAT,
            "modality": modality,
            "model_name": model_name,
            "created_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        }
        body = json.dumps(header, sort_keys=True) + "\n" + "\n".join(repr(float(v)) for v in vec) + "\n"
        with self._write_lock:
            fd, tmp = tempfile.mkstemp(dir=self.directory, suffix=".tmp")
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                fh.write(body)
            os.replace(tmp, self._path(key))

    def __contains__(self, key: str) -> bool:
        return self._path(key).exists()

    def __len__(self) -> int:
        return sum(1 for _ in self.directory.glob("*.emb"))


class Embedder:
    """Resolve embeddings through the cache, then the configured provider.

    ``http_client`` may be injected (tests pass an ``httpx.Client`` with a
    mock transport). ``max_in_flight`` bounds concurrent remote requests.
    """

    def __init__(self, provider: EmbeddingProviderSpec, cache: EmbeddingCache | None = None,
                 http_client: httpx.Client | None = None, max_in_flight: int = 4):
        self.provider = provider
        self.cache = cache
        self._client = http_client
        self._slots = threading.BoundedSemaphore(max_in_flight)
        self.max_in_flight = max_in_flight
        self._replay: dict[str, list[float]] | None = None
        self.provider_calls = 0

    def _salt(self, label):
        if self.provider.kind == "stub" and self.provider.label_leak > 0 and label is not None:
            return f"leak={self.provider.label_leak!r};label={label}"
        return ""

    def key_for(self, content: str, modality: str, label: str | None = None) -> str:
        data = content_bytes(content, modality)
        return cache_key(modality, self.provider.model_name, data, self._salt(label))

    def embed(self, content: str, modality: str, label: str | None = None) -> np.ndarray:
        """Return the 512-dim vector for ``content`` (text or image path).

        ``label`` only matters for a stub provider with label leak enabled.
        """
        if modality not in MODALITIES:
            raise ValueError(f"unknown modality {modality!r}")
        data = content_bytes(content, modality)
        key = cache_key(modality, self.provider.model_name, data, self._salt(label))
        if self.cache is not None:
            hit = self.cache.get(key)
            if hit is not None:
                return hit
        vec = self._compute(data, content, modality, label, key)
        if self.cache is not None:
            self.cache.put(key, vec, modality, self.provider.model_name)
        return vec

    def embed_many(self, items: Sequence[tuple[str, str, str | None]]) -> list[np.ndarray]:
        """Embed ``(content, modality, label)`` triples; output order matches input."""
        if self.provider.kind != "remote" or self.max_in_flight <= 1:
            return [self.embed(*item) for item in items]
        with ThreadPoolExecutor(max_workers=self.max_in_flight) as pool:
            return list(pool.map(lambda item: self.embed(*item), items))

    def _compute(self, data, content, modality, label, key) -> np.ndarray:
        kind = self.provider.kind
        if kind == "stub":
            return stub_vector(data, modality, label, self.provider.label_leak)
        if kind == "replay":
            return self._from_replay(key)
        with self._slots:
            return self._remote(data, modality)

    def _from_replay(self, key: str) -> np.ndarray:
        if self._replay is None:
            table = {}
            with open(self.provider.fixture_path, encoding="utf-8") as fh:
                for line in fh:
                    if line.strip():
                        obj = json.loads(line)
                        table[obj["key"]] = obj["values"]
            self._replay = table
        if key not in self._replay:
            raise InputError(f"no replayed embedding for key {key[:12]}...")
        return validate_vector(self._replay[key])

    def _remote(self, data: bytes, modality: str) -> np.ndarray:
        spec = self.provider
        headers = {"Content-Type": "application/json"}
        if spec.api_key_env:
            secret = os.environ.get(spec.api_key_env)
            if secret:
                headers["Authorization"] = f"Bearer {secret}"
        payload = {"model": spec.model_name, "modality": modality}
        if modality == "text":
            payload["text"] = data.decode("utf-8")
        else:
            payload["image_base64"] = base64.b64encode(data).decode("ascii")
        client = self._client or httpx.Client(timeout=spec.timeout)
        try:
            last_exc = None
            for attempt in range(spec.max_attempts):
                if attempt:
                    time.sleep(spec.backoff * 2 ** (attempt - 1))
                try:
                    resp = client.post(spec.endpoint, json=payload, headers=headers)
                except httpx.HTTPError as exc:
                    last_exc = exc
                    log.warning("embedding request failed (attempt %d): %s", attempt + 1, type(exc).__name__)
                    continue
                self.provider_calls += 1
                if resp.status_code >= 500 or resp.status_code == 429:
                    last_exc = TransportError(f"HTTP {resp.status_code}")
                    continue
                if resp.status_code >= 400:
                    raise TransportError(f"embedding endpoint returned HTTP {resp.status_code}", retriable=False)
                try:
                    values = resp.json()["embedding"]
                except (ValueError, KeyError, TypeError):
                    raise ContractViolation("embedding response lacks an 'embedding' array") from None
                return validate_vector(values)
            raise TransportError(f"embedding endpoint unreachable after {spec.max_attempts} attempts: {last_exc}")
        finally:
            if self._client is None:
                client.close()


def write_replay_fixture(path, entries: Iterable[tuple[str, Sequence[float]]]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for key, values in entries:
            fh.write(json.dumps({"key": key, "values": [float(v) for v in values]}) + "\n")


def embed(content: str, modality: str, provider: EmbeddingProviderSpec,
          cache: EmbeddingCache | None = None, label: str | None = None) -> np.ndarray:
    """One-shot convenience wrapper around :class:`Embedder`."""
    return Embedder(provider, cache).embed(content, modality, label)
