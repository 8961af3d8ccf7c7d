"""Clients for the external model services, plus deterministic replay clients.

Wire protocols (all JSON over HTTP POST):
  caption:   {"image": str, "prompt": str}            -> {"text": str}
  generate:  {"system": str, "prompt": str, "image"?} -> {"text": str}
  embed:     {"texts": [str]}                         -> {"vectors": [[float]], "signed": bool}
  ner:       {"text": str}                            -> {"entities": [...]}

Replay clients answer from a fixture keyed by the 64-bit FNV-1a hash of the
canonical request text; a miss on the caption/generate/embed capabilities is
a hard error.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import requests

from .errors import (
    DimensionMismatch,
    EmptyGeneration,
    FixtureMiss,
    ProtocolError,
    SchemaError,
    ServiceUnavailable,
)

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def fnv1a64(text: str) -> str:
    """Hex digest of the 64-bit FNV-1a hash of UTF-8 text."""
    h = _FNV_OFFSET
    for byte in text.encode("utf-8"):
        h ^= byte
        h = (h * _FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
    return f"{h:016x}"


def caption_key(image_ref: str, prompt: str) -> str:
    return fnv1a64("caption\n" + image_ref + "\n" + prompt)


def generate_key(system: str, prompt: str, image: Optional[str] = None) -> str:
    return fnv1a64("generate\n" + system + "\n" + prompt + "\n" + (image or ""))


def embed_key(text: str) -> str:
    return fnv1a64("embed\n" + text)


def ner_key(text: str) -> str:
    return fnv1a64("ner\n" + text)


@dataclass(frozen=True)
class ServiceEndpoint:
    base_url: str
    timeout_ms: int = 30000
    max_in_flight: int = 4
    auth_token: Optional[str] = None
    max_retries: int = 2

    def __post_init__(self):
        if self.timeout_ms <= 0:
            raise ValueError("timeout must be positive")
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")


def endpoints_from_env() -> Dict[str, Optional[ServiceEndpoint]]:
    """Endpoints from KGV_GEN_URL / KGV_EMBED_URL / KGV_NER_URL (+ auth token)."""
    token = os.environ.get("KGV_AUTH_TOKEN")
    out = {}
    for name, var in (("gen", "KGV_GEN_URL"), ("embed", "KGV_EMBED_URL"),
                      ("ner", "KGV_NER_URL")):
        url = os.environ.get(var)
        out[name] = ServiceEndpoint(url, auth_token=token) if url else None
    return out


class ReplayClient:
    """Serves all capabilities from a recorded fixture; safe for concurrent reads.

    NER lookups are non-strict by default: an unrecorded text yields an empty
    entity list, so captions produced downstream (e.g. template corrections)
    can still be re-extracted without a recorded reply.
    """

    def __init__(self, fixture, strict_ner: bool = False):
        if isinstance(fixture, (str, Path)):
            try:
                fixture = json.loads(Path(fixture).read_text(encoding="utf-8"))
            except (OSError, ValueError) as exc:
                raise SchemaError(f"cannot read replay fixture: {exc}") from exc
        if not isinstance(fixture, dict):
            raise SchemaError("replay fixture must be a JSON object")
        for key, value in fixture.items():
            if not isinstance(value, dict):
                raise SchemaError(f"fixture entry {key!r} must be an object")
        self._fixture = dict(fixture)
        self._strict_ner = strict_ner

    def _lookup(self, key: str, what: str) -> dict:
        try:
            return self._fixture[key]
        except KeyError:
            raise FixtureMiss(f"no recorded {what} reply for request hash {key}") from None

    def caption_image(self, image_ref: str, prompt: str) -> str:
        entry = self._lookup(caption_key(image_ref, prompt), "caption")
        text = entry.get("text", "")
        if not text.strip():
            raise EmptyGeneration("recorded caption is blank")
        return text

    def generate(self, system: str, prompt: str, image: Optional[str] = None) -> str:
        return self._lookup(generate_key(system, prompt, image), "generate").get("text", "")

    def embed_text(self, texts: List[str]) -> Tuple[List[List[float]], bool]:
        vectors, signed = [], False
        for text in texts:
            entry = self._lookup(embed_key(text), "embed")
            vectors.append(list(entry["vector"]))
            signed = bool(entry.get("signed", False))
        dims = {len(v) for v in vectors}
        if len(dims) > 1:
            raise DimensionMismatch(f"fixture vectors have lengths {sorted(dims)}")
        return vectors, signed

    def ner(self, text: str) -> dict:
        key = ner_key(text)
        if key not in self._fixture:
            if self._strict_ner:
                raise FixtureMiss(f"no recorded ner reply for request hash {key}")
            return {"entities": []}
        return self._fixture[key]


class HttpClient:
    """Live client over the neutral wire protocols, one endpoint per capability."""

    def __init__(self, gen: Optional[ServiceEndpoint] = None,
                 embed: Optional[ServiceEndpoint] = None):
        self._gen = gen
        self._embed = embed
        self._gates = {ep: threading.Semaphore(ep.max_in_flight)
                       for ep in (gen, embed) if ep is not None}

    def _post(self, endpoint: Optional[ServiceEndpoint], payload: dict) -> dict:
        if endpoint is None:
            raise ServiceUnavailable("no endpoint configured for this capability")
        headers = {}
        if endpoint.auth_token:
            headers["Authorization"] = f"Bearer {endpoint.auth_token}"
        last_error: Exception = ServiceUnavailable("request not attempted")
        for _ in range(endpoint.max_retries + 1):
            try:
                with self._gates[endpoint]:
                    resp = requests.post(endpoint.base_url, json=payload,
                                         headers=headers,
                                         timeout=endpoint.timeout_ms / 1000.0)
            except requests.RequestException as exc:
                last_error = exc
                continue
            if resp.status_code >= 500:
                last_error = ServiceUnavailable(f"HTTP {resp.status_code}")
                continue
            if resp.status_code != 200:
                raise ServiceUnavailable(
                    f"{endpoint.base_url}: HTTP {resp.status_code}")
            try:
                return resp.json()
            except ValueError as exc:
                raise ProtocolError(f"{endpoint.base_url}: non-JSON reply") from exc
        raise ServiceUnavailable(f"{endpoint.base_url}: {last_error}")

    def caption_image(self, image_ref: str, prompt: str) -> str:
        reply = self._post(self._gen, {"image": image_ref, "prompt": prompt})
        text = reply.get("text", "")
        if not isinstance(text, str):
            raise ProtocolError("caption reply 'text' must be a string")
        if not text.strip():
            raise EmptyGeneration("caption service returned a blank reply")
        return text

    def generate(self, system: str, prompt: str, image: Optional[str] = None) -> str:
        payload = {"system": system, "prompt": prompt}
        if image is not None:
            payload["image"] = image
        reply = self._post(self._gen, payload)
        text = reply.get("text", "")
        if not isinstance(text, str):
            raise ProtocolError("generate reply 'text' must be a string")
        return text

    def embed_text(self, texts: List[str]) -> Tuple[List[List[float]], bool]:
        if not texts:
            raise ValueError("texts must be non-empty")
        reply = self._post(self._embed, {"texts": list(texts)})
        vectors = reply.get("vectors")
        if not isinstance(vectors, list) or len(vectors) != len(texts):
            raise ProtocolError("embed reply must carry one vector per text")
        dims = {len(v) for v in vectors}
        if len(dims) > 1:
            raise DimensionMismatch(f"embed reply vectors have lengths {sorted(dims)}")
        return [list(map(float, v)) for v in vectors], bool(reply.get("signed", False))
