"""Chat-completion and embedding providers.

One generic HTTP JSON client covers OpenAI/Gemini/Llama-style endpoints via
configurable request templates and response field paths; deterministic mock
providers make every pipeline testable offline.  Auth material is referenced
by environment-variable name only and never serialized or logged; request
logging records payload hashes, not payloads.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Protocol, Tuple

import httpx
import numpy as np

from .errors import (
    AuthError,
    EmptyCompletionError,
    DimensionMismatchError,
    MalformedResponseError,
    ProviderError,
    RateLimitError,
    TimeoutError_,
)

logger = logging.getLogger("promptveil.providers")

OBFUSCATION_TEMPERATURE = 1.0
INFERENCE_TEMPERATURE = 0.0

# Misc Symbols and Pictographs block: 768 assigned glyphs
_GLYPH_BASE = 0x1F300
_GLYPH_RANGE = 0x300
_GLYPHS_PER_TOKEN = 5


class ChatProvider(Protocol):
    def chat(self, system: str, user: str, temperature: float) -> str:
        ...


class EmbeddingProvider(Protocol):
    def embed(self, text: str, dim: int) -> List[float]:
        ...


def payload_hash(payload: Any) -> str:
    blob = json.dumps(payload, sort_keys=True, ensure_ascii=False, default=str)
    return hashlib.blake2b(blob.encode("utf-8"), digest_size=16).hexdigest()


@dataclass
class RequestTemplate:
    """Declarative shape of a provider's request body and response path.

    Body strings equal to a placeholder ("{system}", "{user}", "{text}")
    are substituted with the call's values; "{temperature}" and "{dim}"
    substitute as numbers, "{model}" as the configured model string.
    """

    path: str
    body: Dict[str, Any]
    response_path: str
    auth_header: str = "Authorization"
    auth_format: str = "Bearer {token}"


def openai_chat_template() -> RequestTemplate:
    return RequestTemplate(
        path="/chat/completions",
        body={
            "model": "{model}",
            "temperature": "{temperature}",
            "messages": [
                {"role": "system", "content": "{system}"},
                {"role": "user", "content": "{user}"},
            ],
        },
        response_path="choices.0.message.content",
    )


def openai_embed_template() -> RequestTemplate:
    return RequestTemplate(
        path="/embeddings",
        body={"model": "{model}", "input": "{text}", "dimensions": "{dim}"},
        response_path="data.0.embedding",
    )


@dataclass
class ProviderConfig:
    kind: str = "mock"  # http-chat | http-embed | mock
    base_url: str = ""
    model: str = ""
    auth_env: str = ""  # environment variable NAME; the value is never stored
    timeout: float = 30.0
    max_attempts: int = 3
    backoff_base: float = 0.5
    rate_limit: Optional[float] = None  # requests per second
    rate_burst: int = 1
    template: Optional[RequestTemplate] = None
    seed: int = 0


class TokenBucket:
    """Blocking token-bucket limiter shared across concurrent requests."""

    def __init__(self, rate: float, burst: int = 1):
        self.rate = float(rate)
        self.capacity = max(1, int(burst))
        self._tokens = float(self.capacity)
        self._stamp = time.monotonic()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self._lock:
                now = time.monotonic()
                self._tokens = min(
                    self.capacity, self._tokens + (now - self._stamp) * self.rate
                )
                self._stamp = now
                if self._tokens >= 1.0:
                    self._tokens -= 1.0
                    return
                wait = (1.0 - self._tokens) / self.rate
            time.sleep(wait)


def _substitute(node: Any, values: Dict[str, Any]) -> Any:
    if isinstance(node, dict):
        return {k: _substitute(v, values) for k, v in node.items()}
    if isinstance(node, list):
        return [_substitute(v, values) for v in node]
    if isinstance(node, str):
        key = node.strip("{}")
        if node.startswith("{") and node.endswith("}") and key in values:
            return values[key]
        out = node
        for k, v in values.items():
            if isinstance(v, str):
                out = out.replace("{" + k + "}", v)
        return out
    return node


def _extract_path(payload: Any, path: str) -> Any:
    node = payload
    for part in path.split("."):
        try:
            if isinstance(node, list):
                node = node[int(part)]
            else:
                node = node[part]
        except (KeyError, IndexError, TypeError, ValueError):
            raise MalformedResponseError(
                f"response path {path!r} failed at segment {part!r}"
            )
    return node


class HttpJsonProvider:
    """Generic JSON-over-HTTPS client with retries and rate limiting."""

    def __init__(self, cfg: ProviderConfig, transport: Optional[httpx.BaseTransport] = None):
        self.cfg = cfg
        self._client = httpx.Client(
            base_url=cfg.base_url, timeout=cfg.timeout, transport=transport
        )
        self._bucket = (
            TokenBucket(cfg.rate_limit, cfg.rate_burst) if cfg.rate_limit else None
        )

    def _auth_token(self) -> str:
        if not self.cfg.auth_env:
            return ""
        token = os.environ.get(self.cfg.auth_env)
        if token is None:
            raise AuthError(
                f"environment variable {self.cfg.auth_env!r} is not set"
            )
        return token

    def _request(self, template: RequestTemplate, values: Dict[str, Any]) -> Any:
        token = self._auth_token()
        body = _substitute(template.body, values)
        headers = {}
        if token:
            headers[template.auth_header] = template.auth_format.format(token=token)
        logger.info("provider request path=%s payload_hash=%s", template.path, payload_hash(body))
        last_error: Optional[ProviderError] = None
        for attempt in range(self.cfg.max_attempts):
            if self._bucket is not None:
                self._bucket.acquire()
            if attempt > 0:
                time.sleep(self.cfg.backoff_base * (2 ** (attempt - 1)))
            try:
                resp = self._client.post(template.path, json=body, headers=headers)
            except httpx.TimeoutException as exc:
                last_error = TimeoutError_(str(exc))
                continue
            except httpx.TransportError as exc:
                last_error = ProviderError(str(exc))
                continue
            if resp.status_code in (401, 403):
                raise AuthError(f"provider rejected credentials (HTTP {resp.status_code})")
            if resp.status_code == 429:
                last_error = RateLimitError("provider throttled the request (HTTP 429)")
                continue
            if resp.status_code >= 500:
                last_error = ProviderError(f"server error HTTP {resp.status_code}")
                continue
            if resp.status_code >= 400:
                raise ProviderError(f"HTTP {resp.status_code}: {resp.text[:200]}")
            try:
                payload = resp.json()
            except json.JSONDecodeError:
                raise MalformedResponseError("response body is not JSON")
            logger.info("provider response payload_hash=%s", payload_hash(payload))
            return _extract_path(payload, template.response_path)
        assert last_error is not None
        raise last_error


class HttpChatProvider(HttpJsonProvider):
    def __init__(self, cfg: ProviderConfig, transport: Optional[httpx.BaseTransport] = None):
        super().__init__(cfg, transport)
        self.template = cfg.template or openai_chat_template()

    def chat(self, system: str, user: str, temperature: float) -> str:
        values = {
            "model": self.cfg.model,
            "system": system,
            "user": user,
            "temperature": temperature,
        }
        out = self._request(self.template, values)
        if not isinstance(out, str):
            raise MalformedResponseError(
                f"completion field is {type(out).__name__}, expected string"
            )
        return out


class HttpEmbeddingProvider(HttpJsonProvider):
    def __init__(self, cfg: ProviderConfig, transport: Optional[httpx.BaseTransport] = None):
        super().__init__(cfg, transport)
        self.template = cfg.template or openai_embed_template()

    def embed(self, text: str, dim: int) -> List[float]:
        values = {"model": self.cfg.model, "text": text, "dim": dim}
        out = self._request(self.template, values)
        try:
            vec = [float(x) for x in out]
        except (TypeError, ValueError):
            raise MalformedResponseError("embedding field is not a numeric list")
        if len(vec) != dim:
            raise DimensionMismatchError(
                f"requested dimension {dim}, provider returned {len(vec)}"
            )
        return vec


class MockCodebook:
    """Seeded bijective map from tokens to fixed glyph groups.

    Each whitespace token maps to a stable 5-glyph emoji string; the map is
    invertible, so decoding an encoded text recovers the original exactly
    (for single-spaced input).
    """

    def __init__(self, seed: int = 0):
        self.seed = seed
        self._key = hashlib.blake2b(
            f"codebook-{seed}".encode(), digest_size=16
        ).digest()
        self._fwd: Dict[str, str] = {}
        self._rev: Dict[str, str] = {}

    def _glyphs_for(self, token: str, salt: int) -> str:
        digest = hashlib.blake2b(
            f"{token}\x00{salt}".encode("utf-8"), key=self._key, digest_size=2 * _GLYPHS_PER_TOKEN
        ).digest()
        chars = []
        for i in range(_GLYPHS_PER_TOKEN):
            word = int.from_bytes(digest[2 * i : 2 * i + 2], "big")
            chars.append(chr(_GLYPH_BASE + word % _GLYPH_RANGE))
        return "".join(chars)

    def encode_token(self, token: str) -> str:
        if token in self._fwd:
            return self._fwd[token]
        salt = 0
        while True:
            glyphs = self._glyphs_for(token, salt)
            if glyphs not in self._rev:
                self._fwd[token] = glyphs
                self._rev[glyphs] = token
                return glyphs
            salt += 1

    def encode(self, text: str) -> str:
        return " ".join(self.encode_token(t) for t in text.split())

    def decode(self, text: str) -> str:
        return " ".join(self._rev.get(t, t) for t in text.split())

    def decode_known(self, text: str) -> str:
        """Decode only tokens the codebook has issued, dropping the rest."""
        return " ".join(self._rev[t] for t in text.split() if t in self._rev)


@dataclass
class MockChatProvider:
    """Deterministic chat provider: completions are codebook images.

    Keeps a request log (system, user, temperature) so tests can assert
    what actually left the process.
    """

    codebook: MockCodebook = field(default_factory=MockCodebook)
    calls: List[Tuple[str, str, float]] = field(default_factory=list)

    def chat(self, system: str, user: str, temperature: float) -> str:
        self.calls.append((system, user, temperature))
        return self.codebook.encode(user)


@dataclass
class MockRecoveryProvider:
    """Attack ceiling: inverts every known glyph group in the request."""

    codebook: MockCodebook
    calls: List[Tuple[str, str, float]] = field(default_factory=list)

    def chat(self, system: str, user: str, temperature: float) -> str:
        self.calls.append((system, user, temperature))
        return self.codebook.decode_known(user)


@dataclass
class ConstantProvider:
    """Attack floor: returns the same completion regardless of input."""

    completion: str = "qzx glorp vwm blek"
    calls: List[Tuple[str, str, float]] = field(default_factory=list)

    def chat(self, system: str, user: str, temperature: float) -> str:
        self.calls.append((system, user, temperature))
        return self.completion


class MockEmbeddingProvider:
    """Seeded hash-derived unit vectors with positive components."""

    def __init__(self, seed: int = 0):
        self.seed = seed

    def embed(self, text: str, dim: int) -> List[float]:
        digest = hashlib.blake2b(
            f"{self.seed}|{dim}|{text}".encode("utf-8"), digest_size=8
        ).digest()
        rng = np.random.default_rng(int.from_bytes(digest, "big"))
        vec = rng.uniform(0.1, 1.0, size=dim)
        vec /= np.linalg.norm(vec)
        return vec.tolist()


def scripted_chat(completions: List[str]) -> "ScriptedChatProvider":
    return ScriptedChatProvider(completions=list(completions))


@dataclass
class ScriptedChatProvider:
    """Replays a fixed completion sequence; raises when exhausted."""

    completions: List[str]
    calls: List[Tuple[str, str, float]] = field(default_factory=list)

    def chat(self, system: str, user: str, temperature: float) -> str:
        self.calls.append((system, user, temperature))
        if not self.completions:
            raise EmptyCompletionError("scripted provider exhausted")
        return self.completions.pop(0)


def build_chat_provider(cfg: ProviderConfig, transport: Optional[httpx.BaseTransport] = None) -> ChatProvider:
    if cfg.kind == "mock":
        return MockChatProvider(codebook=MockCodebook(seed=cfg.seed))
    if cfg.kind == "http-chat":
        return HttpChatProvider(cfg, transport)
    raise ValueError(f"not a chat provider kind: {cfg.kind!r}")


def build_embedding_provider(cfg: ProviderConfig, transport: Optional[httpx.BaseTransport] = None) -> EmbeddingProvider:
    if cfg.kind == "mock":
        return MockEmbeddingProvider(seed=cfg.seed)
    if cfg.kind == "http-embed":
        return HttpEmbeddingProvider(cfg, transport)
    raise ValueError(f"not an embedding provider kind: {cfg.kind!r}")
