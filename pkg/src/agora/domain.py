"""Core vocabulary shared by every other module.

All types here are immutable values: they validate on construction, are
hashable where practical, and round-trip losslessly through their JSON
dict forms. Nothing in this module talks to the network or the disk.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Mapping


class ConfigurationError(ValueError):
    """Raised when a config value or combination of values is invalid."""


class AnalysisError(ValueError):
    """Raised when an analysis input is malformed (length/coverage mismatch)."""


class AttributeKind(Enum):
    """The three counseling strategies an agent can embody.

    The member order here is the canonical agent order used everywhere
    agents are iterated, so debate turn order is deterministic.
    """

    REFRAMING = "reframing"
    REGARD = "regard"
    SOLUTION = "solution"

    @property
    def label(self) -> str:
        return _LABELS[self]

    @property
    def order(self) -> int:
        return _CANONICAL.index(self)

    @classmethod
    def parse(cls, name: str) -> "AttributeKind":
        try:
            return cls(name.strip().lower())
        except ValueError:
            raise ConfigurationError(
                f"unknown attribute {name!r}; expected one of "
                f"{[a.value for a in _CANONICAL]}"
            ) from None


_CANONICAL = (AttributeKind.REFRAMING, AttributeKind.REGARD, AttributeKind.SOLUTION)
_LABELS = {
    AttributeKind.REFRAMING: "Reframing",
    AttributeKind.REGARD: "Regard",
    AttributeKind.SOLUTION: "Solution",
}

CANONICAL_ATTRIBUTES: tuple[AttributeKind, ...] = _CANONICAL


def canonical_agent_order(attrs: Iterable[AttributeKind]) -> tuple[AttributeKind, ...]:
    """Sort attributes into canonical order, keeping multiset duplicates adjacent.

    Uniform-attribute setups pass three identical members; removal setups
    pass a 2-element subset. Empty input is a configuration error.
    """
    items = tuple(attrs)
    if not items:
        raise ConfigurationError("agent set must not be empty")
    return tuple(sorted(items, key=lambda a: a.order))


@dataclass(frozen=True)
class AttributeScoreVector:
    """Per-attribute scores, each in [1.0, 3.0] when present.

    Components are optional so that ablation personas (which elicit scores
    only for their active attributes) share this type with full three-score
    vectors from dataset labels and predictive scorers.
    """

    reframing: float | None = None
    regard: float | None = None
    solution: float | None = None

    def __post_init__(self) -> None:
        present = self.items()
        if not present:
            raise ConfigurationError("score vector needs at least one component")
        for attr, value in present:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigurationError(f"{attr.value} score must be a number")
            if not 1.0 <= float(value) <= 3.0:
                raise ConfigurationError(
                    f"{attr.value} score {value} outside [1, 3]"
                )

    def get(self, attr: AttributeKind) -> float | None:
        return getattr(self, attr.value)

    def items(self) -> list[tuple[AttributeKind, float]]:
        """Present components in canonical attribute order."""
        return [
            (attr, float(v))
            for attr in CANONICAL_ATTRIBUTES
            if (v := getattr(self, attr.value)) is not None
        ]

    @property
    def is_complete(self) -> bool:
        return len(self.items()) == 3

    @property
    def is_integral(self) -> bool:
        return all(float(v).is_integer() for _, v in self.items())

    def to_json_dict(self) -> dict[str, float]:
        return {attr.value: v for attr, v in self.items()}

    @classmethod
    def from_json_dict(cls, data: Mapping[str, Any]) -> "AttributeScoreVector":
        return cls(
            reframing=data.get("reframing"),
            regard=data.get("regard"),
            solution=data.get("solution"),
        )


def _frozen_extra(extra: Mapping[str, Any] | None) -> tuple[tuple[str, Any], ...]:
    if not extra:
        return ()
    return tuple(sorted(extra.items()))


@dataclass(frozen=True)
class UserCase:
    """One evaluation unit: 1-3 user posts plus optional expert reference.

    ``extra`` carries unknown fields read from dataset files so they are
    preserved on write-through.
    """

    id: str
    posts: tuple[str, ...]
    expert_response: str | None = None
    attribute_labels: AttributeScoreVector | None = None
    source: str = ""
    extra: tuple[tuple[str, Any], ...] = ()

    def __post_init__(self) -> None:
        if not self.id:
            raise ConfigurationError("case id must be non-empty")
        object.__setattr__(self, "posts", tuple(self.posts))
        if not 1 <= len(self.posts) <= 3:
            raise ConfigurationError(
                f"case {self.id}: needs 1-3 posts, got {len(self.posts)}"
            )
        if any(not p.strip() for p in self.posts):
            raise ConfigurationError(f"case {self.id}: posts must be non-empty")
        if self.attribute_labels is not None and self.expert_response is None:
            raise ConfigurationError(
                f"case {self.id}: attribute labels require an expert response"
            )
        if not isinstance(self.extra, tuple):
            object.__setattr__(self, "extra", _frozen_extra(self.extra))

    def to_json_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"id": self.id, "posts": list(self.posts)}
        if self.expert_response is not None:
            out["expert_response"] = self.expert_response
        if self.attribute_labels is not None:
            out["attribute_labels"] = self.attribute_labels.to_json_dict()
        if self.source:
            out["source"] = self.source
        out.update(dict(self.extra))
        return out

    @classmethod
    def from_json_dict(cls, data: Mapping[str, Any]) -> "UserCase":
        known = {"id", "posts", "expert_response", "attribute_labels", "source"}
        labels = data.get("attribute_labels")
        return cls(
            id=str(data["id"]),
            posts=tuple(data["posts"]),
            expert_response=data.get("expert_response"),
            attribute_labels=(
                AttributeScoreVector.from_json_dict(labels) if labels else None
            ),
            source=data.get("source", ""),
            extra=_frozen_extra({k: v for k, v in data.items() if k not in known}),
        )


@dataclass(frozen=True)
class DebateTurn:
    round_index: int
    agent: AttributeKind
    text: str

    def __post_init__(self) -> None:
        if self.round_index < 1:
            raise ConfigurationError("round_index must be >= 1")
        if not self.text.strip():
            raise ConfigurationError("debate turn text must be non-empty")

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "round": self.round_index,
            "agent": self.agent.value,
            "text": self.text,
        }

    @classmethod
    def from_json_dict(cls, data: Mapping[str, Any]) -> "DebateTurn":
        return cls(
            round_index=int(data["round"]),
            agent=AttributeKind.parse(data["agent"]),
            text=data["text"],
        )


@dataclass(frozen=True)
class DebateTranscript:
    """Ordered turn records accumulated by the debating loop.

    ``turn_count`` is the configured number of rounds; a completed debate
    over k agents has exactly ``turn_count * k`` turns.
    """

    turns: tuple[DebateTurn, ...] = ()
    turn_count: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "turns", tuple(self.turns))
        if self.turn_count < 0:
            raise ConfigurationError("turn_count must be >= 0")
        last = 0
        for turn in self.turns:
            if turn.round_index < last:
                raise ConfigurationError("turns must be in round order")
            if self.turn_count and turn.round_index > self.turn_count:
                raise ConfigurationError(
                    f"turn round {turn.round_index} exceeds turn_count {self.turn_count}"
                )
            last = turn.round_index

    def rounds(self) -> list[tuple[DebateTurn, ...]]:
        grouped: dict[int, list[DebateTurn]] = {}
        for turn in self.turns:
            grouped.setdefault(turn.round_index, []).append(turn)
        return [tuple(grouped[i]) for i in sorted(grouped)]

    def is_complete_for(self, agents: Iterable[AttributeKind]) -> bool:
        """True when every round holds exactly the given agents, in order."""
        expected = canonical_agent_order(agents)
        rounds = self.rounds()
        if len(self.turns) != self.turn_count * len(expected):
            return False
        if len(rounds) != self.turn_count:
            return False
        return all(
            tuple(t.agent for t in round_turns) == expected for round_turns in rounds
        )

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "turn_count": self.turn_count,
            "turns": [t.to_json_dict() for t in self.turns],
        }

    @classmethod
    def from_json_dict(cls, data: Mapping[str, Any]) -> "DebateTranscript":
        return cls(
            turns=tuple(DebateTurn.from_json_dict(t) for t in data["turns"]),
            turn_count=int(data["turn_count"]),
        )


@dataclass(frozen=True)
class CounselorPersona:
    """Stage-2 output: persona prompt text plus integer influence scores."""

    persona_text: str
    influence: AttributeScoreVector

    def __post_init__(self) -> None:
        if not self.persona_text.strip():
            raise ConfigurationError("persona_text must be non-empty")
        for attr, value in self.influence.items():
            if value not in (1.0, 2.0, 3.0):
                raise ConfigurationError(
                    f"influence {attr.value}={value} must be one of 1, 2, 3"
                )

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "persona_text": self.persona_text,
            "influence": self.influence.to_json_dict(),
        }

    @classmethod
    def from_json_dict(cls, data: Mapping[str, Any]) -> "CounselorPersona":
        return cls(
            persona_text=data["persona_text"],
            influence=AttributeScoreVector.from_json_dict(data["influence"]),
        )


class Method(Enum):
    SA = "sa"
    SAA = "saa"
    MAA = "maa"
    MENTALAGORA = "mentalagora"

    @classmethod
    def parse(cls, name: str) -> "Method":
        try:
            return cls(name.strip().lower())
        except ValueError:
            raise ConfigurationError(
                f"unknown method {name!r}; expected one of "
                f"{[m.value for m in cls]}"
            ) from None


@dataclass(frozen=True)
class SamplingParams:
    temperature: float = 0.7
    max_tokens: int = 512
    seed: int | None = None

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ConfigurationError("temperature must be >= 0")
        if self.max_tokens < 1:
            raise ConfigurationError("max_tokens must be >= 1")

    def to_json_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
        }
        if self.seed is not None:
            out["seed"] = self.seed
        return out

    @classmethod
    def from_json_dict(cls, data: Mapping[str, Any]) -> "SamplingParams":
        return cls(
            temperature=float(data.get("temperature", 0.7)),
            max_tokens=int(data.get("max_tokens", 512)),
            seed=data.get("seed"),
        )


@dataclass(frozen=True)
class MethodConfig:
    """Which pipeline variant to run, plus model parameters.

    Removal ablations are 2-element attribute subsets; the uniform ablation
    is a multiset of three identical attributes. SA ignores attributes.
    """

    method: Method
    active_attributes: tuple[AttributeKind, ...] = CANONICAL_ATTRIBUTES
    debate_turns: int = 2
    model_id: str = "gpt-3.5-turbo"
    sampling: SamplingParams = field(default_factory=SamplingParams)

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "active_attributes", tuple(self.active_attributes)
        )
        if self.method is not Method.SA:
            if not self.active_attributes:
                raise ConfigurationError(
                    f"{self.method.value} requires at least one active attribute"
                )
            object.__setattr__(
                self,
                "active_attributes",
                canonical_agent_order(self.active_attributes),
            )
        if self.method is Method.MENTALAGORA and self.debate_turns < 1:
            raise ConfigurationError("debate turns must be >= 1")
        if not self.model_id:
            raise ConfigurationError("model_id must be non-empty")

    @property
    def distinct_attributes(self) -> tuple[AttributeKind, ...]:
        seen: list[AttributeKind] = []
        for attr in self.active_attributes:
            if attr not in seen:
                seen.append(attr)
        return tuple(seen)

    def config_hash(self) -> str:
        payload = json.dumps(self.to_json_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "method": self.method.value,
            "active_attributes": [a.value for a in self.active_attributes],
            "debate_turns": self.debate_turns,
            "model_id": self.model_id,
            "sampling": self.sampling.to_json_dict(),
        }

    @classmethod
    def from_json_dict(cls, data: Mapping[str, Any]) -> "MethodConfig":
        raw_attrs = data.get("active_attributes")
        return cls(
            method=Method.parse(data["method"]),
            active_attributes=(
                tuple(AttributeKind.parse(a) for a in raw_attrs)
                if raw_attrs is not None
                else CANONICAL_ATTRIBUTES
            ),
            debate_turns=int(data.get("debate_turns", 2)),
            model_id=data.get("model_id", "gpt-3.5-turbo"),
            sampling=SamplingParams.from_json_dict(data.get("sampling", {})),
        )


@dataclass(frozen=True)
class Provenance:
    timestamp: str
    config_hash: str
    model_fingerprint: str

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "timestamp": self.timestamp,
            "config_hash": self.config_hash,
            "model_fingerprint": self.model_fingerprint,
        }

    @classmethod
    def from_json_dict(cls, data: Mapping[str, Any]) -> "Provenance":
        return cls(
            timestamp=data["timestamp"],
            config_hash=data["config_hash"],
            model_fingerprint=data["model_fingerprint"],
        )


_STAGED_METHODS = (Method.MAA, Method.MENTALAGORA)


@dataclass(frozen=True)
class GeneratedResponse:
    """Final support response, with the artifacts that produced it.

    Persona and transcript are present exactly for the staged methods
    (maa, mentalagora); maa carries an independently generated
    turn_count=1 transcript.
    """

    case_id: str
    text: str
    method: MethodConfig
    persona: CounselorPersona | None = None
    transcript: DebateTranscript | None = None
    provenance: Provenance | None = None

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ConfigurationError("response text must be non-empty")
        staged = self.method.method in _STAGED_METHODS
        if staged and (self.persona is None or self.transcript is None):
            raise ConfigurationError(
                f"{self.method.method.value} responses need persona and transcript"
            )
        if not staged and (self.persona is not None or self.transcript is not None):
            raise ConfigurationError(
                f"{self.method.method.value} responses carry no persona/transcript"
            )

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "case_id": self.case_id,
            "text": self.text,
            "method": self.method.to_json_dict(),
            "persona": self.persona.to_json_dict() if self.persona else None,
            "transcript": self.transcript.to_json_dict() if self.transcript else None,
            "provenance": self.provenance.to_json_dict() if self.provenance else None,
        }

    @classmethod
    def from_json_dict(cls, data: Mapping[str, Any]) -> "GeneratedResponse":
        return cls(
            case_id=data["case_id"],
            text=data["text"],
            method=MethodConfig.from_json_dict(data["method"]),
            persona=(
                CounselorPersona.from_json_dict(data["persona"])
                if data.get("persona")
                else None
            ),
            transcript=(
                DebateTranscript.from_json_dict(data["transcript"])
                if data.get("transcript")
                else None
            ),
            provenance=(
                Provenance.from_json_dict(data["provenance"])
                if data.get("provenance")
                else None
            ),
        )
