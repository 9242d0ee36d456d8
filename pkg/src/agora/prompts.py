"""Template engine producing every prompt in the pipeline.

Template texts live as versioned asset files under ``assets/prompts`` so
wordings can be swapped without touching code; this module loads them,
validates slot coverage against the manifest, and assembles the message
lists for the debate, persona-creation, generation, judge, and scorer
calls. Rendering is single-pass: bound values are never re-scanned for
placeholders.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Iterable, Mapping, Sequence

from agora.domain import (
    AttributeKind,
    CANONICAL_ATTRIBUTES,
    ConfigurationError,
    CounselorPersona,
    DebateTranscript,
    UserCase,
    canonical_agent_order,
)
from agora.gateway import ChatMessage, system, user

_PLACEHOLDER = re.compile(r"\{([a-z][a-z0-9_]*)\}")

EMPTY_HISTORY_MARKER = "(no prior discussion)"


class TemplateError(ValueError):
    def __init__(self, message: str, missing: Sequence[str] = ()):
        super().__init__(message)
        self.missing = list(missing)


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    text: str
    required_slots: frozenset[str]

    def __post_init__(self) -> None:
        found = set(_PLACEHOLDER.findall(self.text))
        if found != set(self.required_slots):
            raise TemplateError(
                f"template {self.name!r}: placeholders {sorted(found)} do not "
                f"match manifest slots {sorted(self.required_slots)}"
            )


@dataclass(frozen=True)
class AgentRole:
    attribute: AttributeKind
    role_text: str

    def __post_init__(self) -> None:
        if not self.role_text.strip():
            raise TemplateError(f"empty role text for {self.attribute.value}")


def render(tpl: PromptTemplate, bindings: Mapping[str, str]) -> str:
    """Substitute all placeholders in one pass; bound values pass through
    verbatim even if they contain brace characters."""
    missing = sorted(set(tpl.required_slots) - set(bindings))
    if missing:
        raise TemplateError(
            f"template {tpl.name!r} missing slots: {', '.join(missing)}",
            missing=missing,
        )
    return _PLACEHOLDER.sub(lambda m: str(bindings[m.group(1)]), tpl.text)


def _asset_root():
    return resources.files("agora") / "assets" / "prompts"


@lru_cache(maxsize=1)
def load_templates() -> dict[str, PromptTemplate]:
    root = _asset_root()
    manifest = json.loads((root / "manifest.json").read_text(encoding="utf-8"))
    templates = {}
    for name, entry in manifest.items():
        text = (root / entry["file"]).read_text(encoding="utf-8")
        templates[name] = PromptTemplate(
            name=name, text=text, required_slots=frozenset(entry["required_slots"])
        )
    return templates


@lru_cache(maxsize=1)
def assets_version() -> str:
    """Digest over all template assets, recorded in run manifests."""
    root = _asset_root()
    manifest = json.loads((root / "manifest.json").read_text(encoding="utf-8"))
    digest = hashlib.sha256()
    digest.update((root / "manifest.json").read_bytes())
    for entry in sorted(e["file"] for e in manifest.values()):
        digest.update((root / entry).read_bytes())
    return digest.hexdigest()[:16]


def template(name: str) -> PromptTemplate:
    try:
        return load_templates()[name]
    except KeyError:
        raise TemplateError(f"unknown template {name!r}") from None


def role_for(attr: AttributeKind) -> AgentRole:
    return AgentRole(
        attribute=attr,
        role_text=template(f"agent_role_{attr.value}").text.strip(),
    )


def serialize_posts(case: UserCase) -> str:
    """``Post k:`` blocks in dataset order; single-post cases use the same form."""
    return "\n\n".join(
        f"Post {k}:\n{text}" for k, text in enumerate(case.posts, start=1)
    )


def serialize_history(transcript: DebateTranscript) -> str:
    if not transcript.turns:
        return EMPTY_HISTORY_MARKER
    return "\n".join(
        f"[Round {t.round_index}] [{t.agent.label} Counselor]: {t.text}"
        for t in transcript.turns
    )


def render_influence(persona: CounselorPersona) -> str:
    return "\n".join(
        f"{attr.label}: {int(value)}" for attr, value in persona.influence.items()
    )


def _distinct(attrs: Iterable[AttributeKind]) -> tuple[AttributeKind, ...]:
    seen: list[AttributeKind] = []
    for attr in canonical_agent_order(attrs):
        if attr not in seen:
            seen.append(attr)
    return tuple(seen)


def stage2_schema(attrs: Iterable[AttributeKind]) -> str:
    fields = ", ".join(
        f'"{a.value}": <whole number, 1 to 3>' for a in _distinct(attrs)
    )
    return "{" + fields + ', "persona_text": "<one short paragraph>"}'


def scorer_schema() -> str:
    fields = ", ".join(
        f'"{a.value}": <number, 1 to 3>' for a in CANONICAL_ATTRIBUTES
    )
    return "{" + fields + "}"


JUDGE_CRITERIA = (
    "customization",
    "satisfaction",
    "professionalism",
    "relevance",
    "understanding",
)


def judge_schema() -> str:
    fields = ", ".join(f'"{c}": <whole number, 1 to 5>' for c in JUDGE_CRITERIA)
    return "{" + fields + "}"


def agent_turn_prompt(
    role: AgentRole, case: UserCase, history: DebateTranscript
) -> list[ChatMessage]:
    body = render(
        template("debate_turn"),
        {
            "user_posts": serialize_posts(case),
            "debate_history": serialize_history(history),
        },
    )
    return [system(role.role_text), user(body)]


def counselor_creation_prompt(
    case: UserCase,
    history: DebateTranscript,
    attrs: Iterable[AttributeKind] = CANONICAL_ATTRIBUTES,
) -> list[ChatMessage]:
    if not case.posts:
        raise ConfigurationError("case has no posts")
    active = _distinct(attrs)
    body = render(
        template("counselor_creation"),
        {
            "user_posts": serialize_posts(case),
            "debate_history": serialize_history(history),
            "attribute_names": ", ".join(a.label for a in active),
            "schema": stage2_schema(active),
        },
    )
    return [system(template("counselor_creation_system").text.strip()), user(body)]


def response_generation_prompt(
    persona: CounselorPersona, case: UserCase, history: DebateTranscript
) -> list[ChatMessage]:
    head = render(
        template("response_generation_system"),
        {
            "persona_text": persona.persona_text,
            "influence_scores": render_influence(persona),
        },
    )
    body = render(
        template("generation_user"),
        {
            "user_posts": serialize_posts(case),
            "debate_history": serialize_history(history),
        },
    )
    return [system(head), user(body)]


def sa_prompt(case: UserCase) -> list[ChatMessage]:
    body = render(template("plain_user"), {"user_posts": serialize_posts(case)})
    return [system(template("sa_system").text.strip()), user(body)]


def saa_prompt(case: UserCase, attrs: Iterable[AttributeKind]) -> list[ChatMessage]:
    descriptions = "\n\n".join(
        f"{a.label}: {role_for(a).role_text}" for a in _distinct(attrs)
    )
    head = render(template("saa_system"), {"attribute_descriptions": descriptions})
    body = render(template("plain_user"), {"user_posts": serialize_posts(case)})
    return [system(head), user(body)]


def judge_likert_prompt(
    case: UserCase, response_text: str, expert_response: str | None = None
) -> list[ChatMessage]:
    """Judging is reference-free by default; passing the expert response
    switches to the calibration variant of the prompt."""
    bindings = {
        "user_posts": serialize_posts(case),
        "response_text": response_text,
        "schema": judge_schema(),
    }
    name = "judge_likert"
    if expert_response is not None:
        name = "judge_likert_with_reference"
        bindings["expert_response"] = expert_response
    body = render(template(name), bindings)
    return [system(template("judge_system").text.strip()), user(body)]


def judge_ranking_prompt(
    case: UserCase, labeled_responses: Sequence[tuple[str, str]]
) -> list[ChatMessage]:
    blocks = "\n\n".join(
        f"Response {label}:\n{text}" for label, text in labeled_responses
    )
    body = render(
        template("judge_ranking"),
        {"user_posts": serialize_posts(case), "labeled_responses": blocks},
    )
    return [system(template("judge_system").text.strip()), user(body)]


def scorer_prompt(response_text: str) -> list[ChatMessage]:
    body = render(
        template("scorer_attributes"),
        {"response_text": response_text, "schema": scorer_schema()},
    )
    return [system(template("judge_system").text.strip()), user(body)]


def repair_prompt(schema: str, raw_output: str) -> list[ChatMessage]:
    body = render(
        template("json_repair"), {"schema": schema, "raw_output": raw_output}
    )
    return [system(template("counselor_creation_system").text.strip()), user(body)]
