"""Provider-agnostic chat-completion and embedding access.

One gateway instance wraps a provider config with a shared response cache,
a sliding-window rate limiter, and bounded retries. The mock provider
short-circuits before any networking, so offline runs are pure functions
of their prompts. Remote adapters speak a chat-completions-style HTTP+JSON
protocol (POST, bearer auth; see ``_remote_chat`` / ``_remote_embed`` for
the exact field mapping).
"""

import collections
import json
import logging
import os
import random
import threading
import time
from dataclasses import dataclass, field

from . import mock_provider
from .cache import ResponseCache, cache_key
from .errors import (
    AuthError,
    GatewayError,
    MalformedJson,
    NoJsonFound,
    ProviderRejected,
    RateLimited,
    TransportError,
)
from .storage import sha256_text

logger = logging.getLogger(__name__)

PROVIDER_KINDS = ("remote_chat", "remote_embedding", "mock")

RETRY_BACKOFF_BASE_S = 1.0
RETRY_BACKOFF_FACTOR = 2.0


@dataclass(frozen=True)
class ProviderConfig:
    provider_kind: str = "mock"
    model_id: str = "mock-model"
    base_url: str = ""
    api_key_env: str = ""
    max_concurrency: int = 4
    requests_per_minute: int = 60
    max_retries: int = 3
    temperature: float = 0.0
    timeout_s: float = 60.0

    def __post_init__(self):
        if self.provider_kind not in PROVIDER_KINDS:
            raise ValueError(f"unknown provider_kind {self.provider_kind!r}")
        if self.max_concurrency < 1:
            raise ValueError("max_concurrency must be >= 1")
        if self.requests_per_minute < 1:
            raise ValueError("requests_per_minute must be >= 1")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.timeout_s <= 0:
            raise ValueError("timeout_s must be > 0")

    @classmethod
    def from_doc(cls, doc: dict) -> "ProviderConfig":
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in doc.items() if k in known})

    def to_doc(self) -> dict:
        return {
            "provider_kind": self.provider_kind,
            "model_id": self.model_id,
            "base_url": self.base_url,
            "api_key_env": self.api_key_env,
            "max_concurrency": self.max_concurrency,
            "requests_per_minute": self.requests_per_minute,
            "max_retries": self.max_retries,
            "temperature": self.temperature,
            "timeout_s": self.timeout_s,
        }


@dataclass(frozen=True)
class ChatRequest:
    prompt_text: str
    model_id: str
    temperature: float = 0.0
    max_output_tokens: int | None = None

    def __post_init__(self):
        if not self.prompt_text:
            raise ValueError("prompt_text must be non-empty")


@dataclass(frozen=True)
class ChatResponse:
    raw_text: str
    usage: dict | None = None
    latency_s: float = 0.0
    from_cache: bool = False
    retry_count: int = 0


@dataclass(frozen=True)
class EmbeddingVector:
    values: tuple[float, ...]
    model_id: str

    def __post_init__(self):
        if not self.values:
            raise ValueError("embedding must be non-empty")
        if any(v != v or v in (float("inf"), float("-inf")) for v in self.values):
            raise ValueError("embedding contains non-finite values")


class SlidingWindowRateLimiter:
    """Caps request starts to ``per_minute`` over any sliding 60s window.

    Clock and sleep are injectable so the window property can be asserted
    under a simulated clock.
    """

    def __init__(self, per_minute: int, clock=time.monotonic, sleep=time.sleep):
        self.per_minute = per_minute
        self._clock = clock
        self._sleep = sleep
        self._starts: collections.deque[float] = collections.deque()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self._lock:
                now = self._clock()
                while self._starts and self._starts[0] <= now - 60.0:
                    self._starts.popleft()
                if len(self._starts) < self.per_minute:
                    self._starts.append(now)
                    return
                wait = self._starts[0] + 60.0 - now
            self._sleep(max(wait, 1e-6))


def extract_json(raw: str) -> dict:
    """Pull the first balanced top-level JSON object out of response text.

    Code fences are stripped first; prose before or after the object is
    ignored. Raises NoJsonFound when there is no '{' at all, MalformedJson
    when braces never balance or the region fails to parse.
    """
    text = raw
    fenced = _strip_code_fences(text)
    if fenced is not None:
        text = fenced
    start = text.find("{")
    if start < 0:
        raise NoJsonFound()
    end = _balanced_end(text, start)
    if end < 0:
        raise MalformedJson(start, "unbalanced braces")
    region = text[start : end + 1]
    try:
        doc = json.loads(region)
    except json.JSONDecodeError as exc:
        raise MalformedJson(start + exc.pos, exc.msg) from exc
    return doc


def _strip_code_fences(text: str) -> str | None:
    stripped = text.strip()
    if "```" not in stripped:
        return None
    first = stripped.find("```")
    newline = stripped.find("\n", first)
    if newline < 0:
        return None
    closing = stripped.find("```", newline)
    if closing < 0:
        return None
    return stripped[newline + 1 : closing]


def _balanced_end(text: str, start: int) -> int:
    """Index of the brace closing the object at ``start``; -1 if unbalanced.

    String-aware: braces inside JSON string literals do not count.
    """
    depth = 0
    in_string = False
    escaped = False
    for i in range(start, len(text)):
        ch = text[i]
        if in_string:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"':
            in_string = True
        elif ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return i
    return -1


def _default_http_post(url: str, headers: dict, payload: dict, timeout_s: float) -> tuple[int, str]:
    import requests

    try:
        resp = requests.post(url, headers=headers, json=payload, timeout=timeout_s)
    except requests.RequestException as exc:
        raise TransportError(str(exc)) from exc
    return resp.status_code, resp.text


class LlmGateway:
    """Cached, rate-limited access to one provider.

    Safe for concurrent use: the rate limiter, concurrency semaphore, and
    cache are internally synchronized. ``transport``, ``clock``, and
    ``sleep`` are injectable for tests.
    """

    def __init__(
        self,
        cfg: ProviderConfig,
        cache: ResponseCache | None = None,
        transport=None,
        clock=time.monotonic,
        sleep=time.sleep,
        rng: random.Random | None = None,
    ):
        self.cfg = cfg
        self.cache = cache if cache is not None else ResponseCache()
        self._transport = transport or _default_http_post
        self._clock = clock
        self._sleep = sleep
        self._rng = rng or random.Random()
        self._limiter = SlidingWindowRateLimiter(cfg.requests_per_minute, clock=clock, sleep=sleep)
        self._slots = threading.Semaphore(cfg.max_concurrency)
        if cfg.provider_kind.startswith("remote"):
            self._resolve_api_key()

    # -- public surface --------------------------------------------------

    def complete(self, req: ChatRequest) -> ChatResponse:
        """Chat completion with caching and bounded retries.

        Cache hits return without a network call and consume no rate-limit
        slot. Misses retry on transient failures (timeouts, 429, 5xx) with
        exponential backoff and full jitter, then store the result.
        """
        key = cache_key(req.model_id, req.temperature, "chat", req.prompt_text)
        cached = self.cache.load(key)
        if cached is not None:
            return ChatResponse(raw_text=cached, from_cache=True)
        started = self._clock()
        raw, retries = self._call_with_retries(lambda: self._dispatch_chat(req))
        self.cache.store(key, raw, model_id=req.model_id, temperature=req.temperature)
        return ChatResponse(
            raw_text=raw,
            latency_s=self._clock() - started,
            retry_count=retries,
        )

    def embed(self, text: str) -> EmbeddingVector:
        """Embedding lookup with the same cache and retry policy as chat."""
        if not text:
            raise ValueError("cannot embed empty text")
        key = cache_key(self.cfg.model_id, self.cfg.temperature, "embed", text)
        cached = self.cache.load(key)
        if cached is not None:
            return EmbeddingVector(tuple(json.loads(cached)), self.cfg.model_id)
        raw, _ = self._call_with_retries(lambda: self._dispatch_embed(text))
        self.cache.store(key, raw, model_id=self.cfg.model_id)
        return EmbeddingVector(tuple(json.loads(raw)), self.cfg.model_id)

    # -- provider dispatch -------------------------------------------------

    def _dispatch_chat(self, req: ChatRequest) -> str:
        if self.cfg.provider_kind == "mock":
            return mock_provider.mock_complete(req.prompt_text)
        if self.cfg.provider_kind != "remote_chat":
            raise GatewayError(f"provider {self.cfg.provider_kind!r} cannot serve chat requests")
        return self._remote_chat(req)

    def _dispatch_embed(self, text: str) -> str:
        if self.cfg.provider_kind == "mock":
            return json.dumps(mock_provider.mock_embed(text))
        if self.cfg.provider_kind != "remote_embedding":
            raise GatewayError(f"provider {self.cfg.provider_kind!r} cannot serve embeddings")
        return self._remote_embed(text)

    def _call_with_retries(self, call) -> tuple[str, int]:
        attempts = self.cfg.max_retries + 1
        last: Exception | None = None
        for attempt in range(attempts):
            if attempt:
                delay = RETRY_BACKOFF_BASE_S * (RETRY_BACKOFF_FACTOR ** (attempt - 1))
                self._sleep(self._rng.uniform(0.0, delay))  # full jitter
            try:
                return call(), attempt
            except (TransportError, RateLimited) as exc:
                last = exc
                logger.warning("transient provider failure (attempt %d/%d): %s", attempt + 1, attempts, exc)
        assert last is not None
        raise last

    # -- remote adapters ---------------------------------------------------
    # Chat: POST {base_url}/chat/completions with
    #   {"model": ..., "temperature": ..., "messages": [{"role": "user", "content": prompt}]}
    # reading choices[0].message.content.
    # Embeddings: POST {base_url}/embeddings with {"model": ..., "input": text}
    # reading data[0].embedding.

    def _remote_chat(self, req: ChatRequest) -> str:
        payload = {
            "model": req.model_id,
            "temperature": req.temperature,
            "messages": [{"role": "user", "content": req.prompt_text}],
        }
        if req.max_output_tokens is not None:
            payload["max_tokens"] = req.max_output_tokens
        body = self._post(f"{self.cfg.base_url.rstrip('/')}/chat/completions", payload)
        try:
            return body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderRejected(200, f"unexpected chat response shape: {exc}") from exc

    def _remote_embed(self, text: str) -> str:
        payload = {"model": self.cfg.model_id, "input": text}
        body = self._post(f"{self.cfg.base_url.rstrip('/')}/embeddings", payload)
        try:
            return json.dumps([float(v) for v in body["data"][0]["embedding"]])
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise ProviderRejected(200, f"unexpected embedding response shape: {exc}") from exc

    def _post(self, url: str, payload: dict) -> dict:
        self._limiter.acquire()
        headers = {"Authorization": f"Bearer {self._resolve_api_key()}"}
        with self._slots:
            status, text = self._transport(url, headers, payload, self.cfg.timeout_s)
        if status in (401, 403):
            raise AuthError(f"provider returned {status}")
        if status == 429:
            raise RateLimited("provider returned 429")
        if status >= 500:
            raise TransportError(f"provider returned {status}")
        if status >= 400:
            raise ProviderRejected(status, text[:200])
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise ProviderRejected(status, f"non-JSON body: {text[:200]}") from exc

    def _resolve_api_key(self) -> str:
        if not self.cfg.api_key_env:
            raise AuthError("remote provider config has no api_key_env")
        key = os.environ.get(self.cfg.api_key_env)
        if not key:
            raise AuthError(f"environment variable {self.cfg.api_key_env} is not set")
        return key


def complete(req: ChatRequest, cfg: ProviderConfig, cache: ResponseCache | None = None) -> ChatResponse:
    return LlmGateway(cfg, cache=cache).complete(req)


def embed(text: str, cfg: ProviderConfig, cache: ResponseCache | None = None) -> EmbeddingVector:
    return LlmGateway(cfg, cache=cache).embed(text)


def response_digest(raw_text: str) -> str:
    return sha256_text(raw_text)
