"""Provider-agnostic chat-completion client.

One OpenAI-compatible wire protocol covers every serving backend; on top
of the raw transport this module layers bounded retries, a token-bucket
rate limiter, a content-addressed on-disk response cache, and a fully
deterministic mock backend used by the test suite and the CLI --mock mode.
"""

from __future__ import annotations

import hashlib
import json
import os
import random
import re
import threading
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Mapping

import requests

from agora.domain import ConfigurationError

ROLES = ("system", "user", "assistant")
RESPONSE_FORMATS = ("free_text", "json_object")


class GatewayError(RuntimeError):
    """Terminal gateway failure. ``kind`` is transport | request | protocol."""

    def __init__(self, kind: str, message: str):
        super().__init__(message)
        self.kind = kind


class MockError(RuntimeError):
    """No mock script entry matched the request."""


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str

    def __post_init__(self) -> None:
        if self.role not in ROLES:
            raise ConfigurationError(f"bad message role {self.role!r}")


def system(content: str) -> ChatMessage:
    return ChatMessage("system", content)


def user(content: str) -> ChatMessage:
    return ChatMessage("user", content)


@dataclass(frozen=True)
class ChatRequest:
    model_id: str
    messages: tuple[ChatMessage, ...]
    temperature: float = 0.7
    max_tokens: int = 512
    seed: int | None = None
    response_format: str = "free_text"

    def __post_init__(self) -> None:
        object.__setattr__(self, "messages", tuple(self.messages))
        if not self.messages:
            raise ConfigurationError("request needs at least one message")
        if self.messages[0].role not in ("system", "user"):
            raise ConfigurationError("first message must be system or user")
        if self.response_format not in RESPONSE_FORMATS:
            raise ConfigurationError(
                f"bad response_format {self.response_format!r}"
            )

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "model_id": self.model_id,
            "messages": [{"role": m.role, "content": m.content} for m in self.messages],
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
            "seed": self.seed,
            "response_format": self.response_format,
        }

    def joined_text(self) -> str:
        return "\n".join(m.content for m in self.messages)


@dataclass(frozen=True)
class Usage:
    prompt_tokens: int = 0
    completion_tokens: int = 0


@dataclass(frozen=True)
class ChatResponse:
    text: str
    finish_reason: str = "stop"
    usage: Usage = field(default_factory=Usage)
    cached: bool = False


@dataclass(frozen=True)
class BackendConfig:
    base_url: str
    api_key: str = ""
    timeout_ms: int = 60_000
    max_retries: int = 2
    retry_backoff_ms: int = 250
    rate_limit_rps: float | None = None
    cache_dir: str | None = None

    def __post_init__(self) -> None:
        if self.timeout_ms <= 0:
            raise ConfigurationError("timeout_ms must be > 0")
        if self.max_retries < 0:
            raise ConfigurationError("max_retries must be >= 0")

    @classmethod
    def from_env(cls, **overrides: Any) -> "BackendConfig":
        values: dict[str, Any] = {
            "base_url": os.environ.get("AGORA_BASE_URL", "http://localhost:8000/v1"),
            "api_key": os.environ.get("AGORA_API_KEY", ""),
            "cache_dir": os.environ.get("AGORA_CACHE_DIR"),
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


def cache_key(req: ChatRequest) -> str:
    """Stable content hash of everything that affects a completion."""
    payload = json.dumps(req.to_json_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class ResponseCache:
    """Content-addressed disk cache; atomic writes keep concurrent writers safe."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, key: str) -> Path:
        return self.root / key[:2] / f"{key}.json"

    def get(self, key: str) -> ChatResponse | None:
        path = self._path(key)
        try:
            payload = json.loads(path.read_text(encoding="utf-8"))
            resp = payload["response"]
            return ChatResponse(
                text=resp["text"],
                finish_reason=resp.get("finish_reason", "stop"),
                usage=Usage(**resp.get("usage", {})),
                cached=True,
            )
        except (OSError, ValueError, KeyError, TypeError):
            return None

    def put(self, key: str, req: ChatRequest, resp: ChatResponse) -> None:
        path = self._path(key)
        path.parent.mkdir(parents=True, exist_ok=True)
        payload = {
            "request": req.to_json_dict(),
            "response": {
                "text": resp.text,
                "finish_reason": resp.finish_reason,
                "usage": {
                    "prompt_tokens": resp.usage.prompt_tokens,
                    "completion_tokens": resp.usage.completion_tokens,
                },
            },
            "timestamp": time.time(),
        }
        tmp = path.with_suffix(f".tmp{os.getpid()}.{threading.get_ident()}")
        tmp.write_text(json.dumps(payload, ensure_ascii=False), encoding="utf-8")
        os.replace(tmp, path)


class TokenBucket:
    """Shared limiter: burst of one request above the steady rate."""

    def __init__(
        self,
        rate: float,
        clock: Callable[[], float] = time.monotonic,
        sleeper: Callable[[float], None] = time.sleep,
    ):
        if rate <= 0:
            raise ConfigurationError("rate must be > 0")
        self.rate = rate
        self._clock = clock
        self._sleeper = sleeper
        self._tokens = 1.0
        self._updated = clock()
        self._lock = threading.Lock()

    def acquire(self) -> float:
        with self._lock:
            now = self._clock()
            self._tokens = min(1.0, self._tokens + (now - self._updated) * self.rate)
            self._updated = now
            if self._tokens >= 1.0:
                self._tokens -= 1.0
                return 0.0
            wait = (1.0 - self._tokens) / self.rate
            self._sleeper(wait)
            self._updated = self._clock()
            self._tokens = 0.0
            return wait


class HttpBackend:
    """OpenAI-compatible chat-completions transport with bounded retries."""

    RETRYABLE_STATUS = frozenset({429, 500, 502, 503, 504})

    def __init__(
        self,
        config: BackendConfig,
        sleeper: Callable[[float], None] = time.sleep,
    ):
        self.config = config
        self._sleeper = sleeper

    def describe(self) -> str:
        return f"http:{self.config.base_url}"

    def _payload(self, req: ChatRequest) -> dict[str, Any]:
        payload: dict[str, Any] = {
            "model": req.model_id,
            "messages": [{"role": m.role, "content": m.content} for m in req.messages],
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        }
        if req.seed is not None:
            payload["seed"] = req.seed
        if req.response_format == "json_object":
            payload["response_format"] = {"type": "json_object"}
        return payload

    def send(self, req: ChatRequest) -> ChatResponse:
        url = self.config.base_url.rstrip("/") + "/chat/completions"
        headers = {"Content-Type": "application/json"}
        if self.config.api_key:
            headers["Authorization"] = f"Bearer {self.config.api_key}"
        timeout = self.config.timeout_ms / 1000.0
        attempts = 1 + self.config.max_retries
        last_error = "no attempt made"
        for attempt in range(attempts):
            if attempt:
                self._sleeper(self.config.retry_backoff_ms / 1000.0 * 2 ** (attempt - 1))
            try:
                http = requests.post(
                    url, json=self._payload(req), headers=headers, timeout=timeout
                )
            except requests.RequestException as exc:
                last_error = f"{type(exc).__name__}: {exc}"
                continue
            if http.status_code in self.RETRYABLE_STATUS:
                last_error = f"HTTP {http.status_code}"
                continue
            if http.status_code >= 400:
                raise GatewayError(
                    "request", f"HTTP {http.status_code}: {http.text[:500]}"
                )
            return self._parse(http)
        raise GatewayError(
            "transport", f"gave up after {attempts} attempt(s): {last_error}"
        )

    def _parse(self, http: requests.Response) -> ChatResponse:
        try:
            body = http.json()
            choice = body["choices"][0]
            text = choice["message"]["content"]
            if text is None:
                raise KeyError("content")
            usage = body.get("usage") or {}
            return ChatResponse(
                text=text,
                finish_reason=choice.get("finish_reason") or "stop",
                usage=Usage(
                    prompt_tokens=int(usage.get("prompt_tokens", 0)),
                    completion_tokens=int(usage.get("completion_tokens", 0)),
                ),
            )
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise GatewayError("protocol", f"malformed provider payload: {exc}") from exc


# --- deterministic mock backend -------------------------------------------

@dataclass(frozen=True)
class MockRule:
    substring: str
    reply: str | Callable[[ChatRequest], str]


@dataclass(frozen=True)
class MockScript:
    """Canned replies keyed by substring match, with an optional seeded
    generator fallback when no rule matches."""

    rules: tuple[MockRule, ...] = ()
    generator_seed: int | None = None


_SENTENCE_POOL = (
    "It sounds like this has been weighing on you for a while, and reaching out takes courage.",
    "Your feelings make sense given what you describe, and you deserve support while you work through this.",
    "Notice the thought behind the worry and ask whether the evidence really supports it.",
    "Try to reframe the setback as information about what to adjust rather than proof that you failed.",
    "One small step you can try this week is to write the concern down and pick a single piece to act on.",
    "You have already managed hard moments before, and those same strengths can help you here.",
    "Consider setting one clear, reachable goal and checking in with yourself about it each day.",
    "Being kind to yourself in this situation is not indulgence; it is part of getting better.",
    "A brief daily routine, even ten minutes of walking or writing, can give the week some structure.",
    "What you are feeling is common and it is okay to feel it, and it does not define who you are.",
    "If the pressure keeps building, talking it through with someone you trust can lighten the load.",
    "Focus on what is within your control today and let the rest wait until it is actionable.",
)

_ATTRIBUTE_OPENERS = {
    "reframing": "From a reframing standpoint, the priority is the story you tell yourself about this.",
    "regard": "Before anything else, you deserve acceptance exactly as you are right now.",
    "solution": "Looking at this practically, a concrete next step matters most.",
}


def _digest_int(seed: int, key: str, salt: str) -> int:
    raw = hashlib.sha256(f"{seed}:{key}:{salt}".encode("utf-8")).digest()
    return int.from_bytes(raw[:8], "big")


def _schema_keys(prompt: str, keys: tuple[str, ...]) -> list[str]:
    return [k for k in keys if f'"{k}"' in prompt]


def _seeded_reply(req: ChatRequest, seed: int) -> str:
    """Generate a deterministic reply appropriate to the request shape.

    Structured requests are recognised by the quoted field names their
    prompts demand; everything else gets pseudo counselor prose.
    """
    prompt = req.joined_text()
    key = cache_key(req)

    criteria = _schema_keys(
        prompt,
        ("customization", "satisfaction", "professionalism", "relevance", "understanding"),
    )
    if len(criteria) == 5:
        scores = {c: 1 + _digest_int(seed, key, c) % 5 for c in criteria}
        return json.dumps(scores)

    if "from best to worst" in prompt:
        labels = re.findall(r"^Response ([A-Z]):", prompt, flags=re.MULTILINE)
        rng = random.Random(_digest_int(seed, key, "ranking"))
        rng.shuffle(labels)
        return " > ".join(labels)

    attr_keys = _schema_keys(prompt, ("reframing", "regard", "solution"))
    if attr_keys and '"persona_text"' in prompt:
        out: dict[str, Any] = {k: 1 + _digest_int(seed, key, k) % 3 for k in attr_keys}
        blend = ", ".join(f"{k} at strength {out[k]}" for k in attr_keys)
        out["persona_text"] = (
            "You are a supportive counselor who blends the discussed strategies: "
            f"{blend}. Respond warmly and concretely to the user's situation."
        )
        return json.dumps(out)
    if attr_keys and req.response_format == "json_object":
        return json.dumps(
            {k: round(1.0 + (_digest_int(seed, key, k) % 201) / 100.0, 2) for k in attr_keys}
        )

    rng = random.Random(_digest_int(seed, key, "prose"))
    sentences = rng.sample(_SENTENCE_POOL, 3)
    for marker, opener in _ATTRIBUTE_OPENERS.items():
        if req.messages[0].role == "system" and marker in req.messages[0].content.lower():
            sentences.insert(0, opener)
            break
    return " ".join(sentences)


def mock_complete(req: ChatRequest, script: MockScript) -> ChatResponse:
    """Resolve a request against a mock script; fully deterministic."""
    prompt = req.joined_text()
    for rule in script.rules:
        if rule.substring in prompt:
            text = rule.reply(req) if callable(rule.reply) else rule.reply
            return ChatResponse(text=text, usage=Usage(len(prompt.split()), len(text.split())))
    if script.generator_seed is not None:
        text = _seeded_reply(req, script.generator_seed)
        return ChatResponse(text=text, usage=Usage(len(prompt.split()), len(text.split())))
    raise MockError(f"no mock rule matched request {cache_key(req)[:12]}")


class MockBackend:
    """Scripted/seeded backend; records every request it serves."""

    def __init__(self, script: MockScript):
        self.script = script
        self.requests: list[ChatRequest] = []
        self._lock = threading.Lock()

    @classmethod
    def seeded(cls, seed: int = 0) -> "MockBackend":
        return cls(MockScript(generator_seed=seed))

    def describe(self) -> str:
        return f"mock:{self.script.generator_seed}"

    def send(self, req: ChatRequest) -> ChatResponse:
        with self._lock:
            self.requests.append(req)
        return mock_complete(req, self.script)


class LlmGateway:
    """Cache + rate limiting around a backend; safe for concurrent use."""

    def __init__(
        self,
        backend: Any,
        cache_dir: str | Path | None = None,
        rate_limit_rps: float | None = None,
        clock: Callable[[], float] = time.monotonic,
        sleeper: Callable[[float], None] = time.sleep,
    ):
        self.backend = backend
        self.cache = ResponseCache(cache_dir) if cache_dir else None
        self.bucket = (
            TokenBucket(rate_limit_rps, clock=clock, sleeper=sleeper)
            if rate_limit_rps
            else None
        )
        self.call_log: list[ChatRequest] = []
        self._lock = threading.Lock()

    @property
    def fingerprint(self) -> str:
        return self.backend.describe()

    def reset_log(self) -> None:
        with self._lock:
            self.call_log.clear()

    def calls(self) -> int:
        with self._lock:
            return len(self.call_log)

    def complete(self, req: ChatRequest) -> ChatResponse:
        with self._lock:
            self.call_log.append(req)
        key = cache_key(req)
        if self.cache is not None:
            hit = self.cache.get(key)
            if hit is not None:
                return hit
        if self.bucket is not None:
            self.bucket.acquire()
        resp = self.backend.send(req)
        if self.cache is not None:
            self.cache.put(key, req, resp)
        return replace(resp, cached=False)


def complete(req: ChatRequest, backend: BackendConfig) -> ChatResponse:
    """One-shot completion honoring the config's cache and rate limit."""
    gateway = LlmGateway(
        HttpBackend(backend),
        cache_dir=backend.cache_dir,
        rate_limit_rps=backend.rate_limit_rps,
    )
    return gateway.complete(req)


def resolve_config_value(
    flag: Any, file_config: Mapping[str, Any], key: str, env_var: str | None = None
) -> Any:
    """Flags override config-file values, which override env vars."""
    if flag is not None:
        return flag
    if key in file_config:
        return file_config[key]
    if env_var:
        return os.environ.get(env_var)
    return None
