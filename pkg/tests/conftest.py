from __future__ import annotations

import os
from pathlib import Path

import pytest

from agora.domain import (
    AttributeKind,
    AttributeScoreVector,
    DebateTranscript,
    DebateTurn,
    UserCase,
)
from agora.gateway import LlmGateway, MockBackend, MockScript

REPO_ROOT = Path(__file__).resolve().parent.parent
GOLDEN_DIR = Path(__file__).resolve().parent / "golden"


@pytest.fixture(scope="session")
def fixture_dataset() -> Path:
    return REPO_ROOT / "data" / "cases.jsonl"


@pytest.fixture(scope="session")
def counselchat_csv() -> Path:
    return REPO_ROOT / "data" / "counselchat_sample.csv"


@pytest.fixture
def frozen_case() -> UserCase:
    """A stable case used by golden-snapshot tests; never edit in place."""
    return UserCase(
        id="golden-001",
        posts=(
            "I keep putting off a phone call I have to make and the dread grows every day.",
            "Yesterday I wrote a script for the call, then cleaned the kitchen instead.",
        ),
        expert_response="Dread shrinks when the task does: dial, say the first line, done.",
        attribute_labels=AttributeScoreVector(2, 2, 3),
        source="fixture",
    )


@pytest.fixture
def frozen_transcript() -> DebateTranscript:
    return DebateTranscript(
        turns=(
            DebateTurn(1, AttributeKind.REFRAMING, "The dread is a story, not a fact."),
            DebateTurn(1, AttributeKind.REGARD, "Avoiding a hard call is human, not weak."),
            DebateTurn(1, AttributeKind.SOLUTION, "Script the first sentence and dial."),
        ),
        turn_count=1,
    )


@pytest.fixture
def seeded_gateway() -> LlmGateway:
    return LlmGateway(MockBackend.seeded(42))


@pytest.fixture
def gateway_factory():
    def make(
        seed: int = 42, script: MockScript | None = None, **kwargs
    ) -> LlmGateway:
        backend = MockBackend(script) if script is not None else MockBackend.seeded(seed)
        return LlmGateway(backend, **kwargs)

    return make


def golden_check(name: str, content: str) -> None:
    """Compare against a committed snapshot, or regenerate it when
    AGORA_REGEN_GOLDEN=1."""
    path = GOLDEN_DIR / name
    if os.environ.get("AGORA_REGEN_GOLDEN") == "1":
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(content, encoding="utf-8")
        return
    assert path.exists(), f"golden file {name} missing; regenerate with AGORA_REGEN_GOLDEN=1"
    assert content == path.read_text(encoding="utf-8"), (
        f"rendered output diverged from golden {name}; "
        "regenerate with AGORA_REGEN_GOLDEN=1 if the change is intended"
    )
