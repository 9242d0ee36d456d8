"""Shared machinery for structured (JSON) model outputs.

Persona creation, attribute scoring, and judging all demand a single JSON
object from the model and all use the same recovery ladder: strict parse,
markdown-fence stripping, then one repair completion before giving up.
Validation failures (wrong types, out-of-range values) are terminal; the
repair pass exists for formatting problems, not for bad judgments.
"""

from __future__ import annotations

import json
import re
from typing import Any, Callable, Mapping, Sequence, TypeVar

from agora.gateway import ChatMessage, ChatRequest, LlmGateway

T = TypeVar("T")

_FENCE = re.compile(r"^```[a-zA-Z0-9_-]*\s*\n(.*?)\n?```\s*$", re.DOTALL)


class StructuredOutputError(RuntimeError):
    """Model output could not be turned into the demanded object."""

    def __init__(self, message: str, raw: str = ""):
        super().__init__(message)
        self.raw = raw


def strip_fences(text: str) -> str:
    match = _FENCE.match(text.strip())
    return match.group(1) if match else text


def try_parse_json_object(text: str) -> dict[str, Any] | None:
    """Strict parse, then fence-stripped parse; None when neither yields
    a JSON object."""
    for candidate in (text.strip(), strip_fences(text)):
        try:
            obj = json.loads(candidate)
        except (ValueError, TypeError):
            continue
        if isinstance(obj, dict):
            return obj
    return None


def require_key(obj: Mapping[str, Any], key: str, error_cls: type) -> Any:
    if key not in obj:
        raise error_cls(f"missing field {key!r}")
    return obj[key]


def require_int_in(
    obj: Mapping[str, Any], key: str, lo: int, hi: int, error_cls: type
) -> int:
    value = require_key(obj, key, error_cls)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise error_cls(f"field {key!r} must be a number, got {value!r}")
    if isinstance(value, float) and not value.is_integer():
        raise error_cls(f"field {key!r} must be a whole number, got {value!r}")
    value = int(value)
    if not lo <= value <= hi:
        raise error_cls(f"field {key!r} value {value} outside [{lo}, {hi}]")
    return value


def require_number_in(
    obj: Mapping[str, Any], key: str, lo: float, hi: float, error_cls: type
) -> float:
    value = require_key(obj, key, error_cls)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise error_cls(f"field {key!r} must be a number, got {value!r}")
    value = float(value)
    if not lo <= value <= hi:
        raise error_cls(f"field {key!r} value {value} outside [{lo}, {hi}]")
    return value


def require_str(obj: Mapping[str, Any], key: str, error_cls: type) -> str:
    value = require_key(obj, key, error_cls)
    if not isinstance(value, str) or not value.strip():
        raise error_cls(f"field {key!r} must be a non-empty string")
    return value


def complete_structured(
    gw: LlmGateway,
    messages: Sequence[ChatMessage],
    *,
    model_id: str,
    schema: str,
    validate: Callable[[Mapping[str, Any]], T],
    error_cls: type,
    temperature: float = 0.0,
    max_tokens: int = 512,
    seed: int | None = None,
) -> tuple[T, str]:
    """Issue a json_object completion, repairing unparseable output once.

    Returns the validated value and the raw text of the first completion
    (persisted alongside parsed artifacts for diagnosis).
    """
    from agora.prompts import repair_prompt

    req = ChatRequest(
        model_id=model_id,
        messages=tuple(messages),
        temperature=temperature,
        max_tokens=max_tokens,
        seed=seed,
        response_format="json_object",
    )
    raw = gw.complete(req).text
    obj = try_parse_json_object(raw)
    if obj is None:
        repair_req = ChatRequest(
            model_id=model_id,
            messages=tuple(repair_prompt(schema, raw)),
            temperature=temperature,
            max_tokens=max_tokens,
            seed=seed,
            response_format="json_object",
        )
        obj = try_parse_json_object(gw.complete(repair_req).text)
        if obj is None:
            raise error_cls("output not parseable as JSON after repair", raw=raw)
    try:
        return validate(obj), raw
    except error_cls as exc:
        if isinstance(exc, StructuredOutputError) and not exc.raw:
            exc.raw = raw
        raise
