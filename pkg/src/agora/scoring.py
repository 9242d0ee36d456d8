"""Attribute-level scoring of responses and the controllability analyses.

Two scorer backends share one contract: an LLM rater (one temperature-0
structured call per response) and an external predictions file, so scores
from any externally trained classifier can be plugged in. Analyses compare
predicted attribute scores against targets either as mean absolute error
(controllability) or as signed mean deltas (expert alignment).
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from agora import prompts
from agora.domain import (
    AnalysisError,
    AttributeScoreVector,
    CANONICAL_ATTRIBUTES,
    ConfigurationError,
)
from agora.gateway import LlmGateway
from agora.structured import StructuredOutputError, complete_structured, require_number_in


class ScoreError(StructuredOutputError):
    pass


class LlmAttributeScorer:
    """Rates all three attributes in one structured call per response."""

    kind = "llm_rater"

    def __init__(
        self,
        gw: LlmGateway,
        model_id: str,
        max_tokens: int = 256,
        seed: int | None = None,
    ):
        self.gw = gw
        self.model_id = model_id
        self.max_tokens = max_tokens
        self.seed = seed

    def score(self, response_text: str, case_id: str | None = None) -> AttributeScoreVector:
        def validate(obj: Mapping) -> AttributeScoreVector:
            return AttributeScoreVector(
                **{
                    attr.value: require_number_in(obj, attr.value, 1.0, 3.0, ScoreError)
                    for attr in CANONICAL_ATTRIBUTES
                }
            )

        vector, _ = complete_structured(
            self.gw,
            prompts.scorer_prompt(response_text),
            model_id=self.model_id,
            schema=prompts.scorer_schema(),
            validate=validate,
            error_cls=ScoreError,
            temperature=0.0,
            max_tokens=self.max_tokens,
            seed=self.seed,
        )
        return vector


class FileAttributeScorer:
    """Looks scores up by case id in a JSONL predictions file."""

    kind = "external_file"

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._scores: dict[str, AttributeScoreVector] = {}
        if not self.path.exists():
            raise ScoreError(f"predictions file not found: {self.path}")
        with self.path.open(encoding="utf-8") as handle:
            for lineno, line in enumerate(handle, start=1):
                if not line.strip():
                    continue
                try:
                    data = json.loads(line)
                    case_id = str(data["case_id"])
                    vector = AttributeScoreVector(
                        reframing=float(data["reframing"]),
                        regard=float(data["regard"]),
                        solution=float(data["solution"]),
                    )
                except (ValueError, KeyError, TypeError, ConfigurationError) as exc:
                    raise ScoreError(f"{self.path}:{lineno}: bad prediction: {exc}") from exc
                self._scores[case_id] = vector

    def score(self, response_text: str, case_id: str | None = None) -> AttributeScoreVector:
        if case_id is None or case_id not in self._scores:
            raise ScoreError(f"no prediction for case {case_id!r} in {self.path}")
        return self._scores[case_id]


def score_attributes(
    response_text: str, backend, case_id: str | None = None
) -> AttributeScoreVector:
    """Score a response through whichever backend is configured; results
    are always inside [1, 3] or an error, never silently clamped."""
    return backend.score(response_text, case_id)


@dataclass(frozen=True)
class ControlReport:
    """Per-attribute and overall mean absolute error between predicted and
    target score vectors."""

    reframing_mae: float | None
    regard_mae: float | None
    solution_mae: float | None
    overall_mae: float
    n_cases: int

    def to_json_dict(self) -> dict:
        return {
            "reframing_mae": self.reframing_mae,
            "regard_mae": self.regard_mae,
            "solution_mae": self.solution_mae,
            "overall_mae": self.overall_mae,
            "n_cases": self.n_cases,
        }

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer)
        writer.writerow(["reframing_mae", "regard_mae", "solution_mae", "overall_mae", "n_cases"])
        writer.writerow(
            [self.reframing_mae, self.regard_mae, self.solution_mae, self.overall_mae, self.n_cases]
        )
        return buffer.getvalue()


@dataclass(frozen=True)
class DeltaReport:
    """Signed mean deltas (generated - expert) per attribute; the total
    difference is the sum of their absolute values."""

    reframing_delta: float | None
    solution_delta: float | None
    regard_delta: float | None
    total_diff: float
    n_cases: int

    def to_json_dict(self) -> dict:
        return {
            "reframing_delta": self.reframing_delta,
            "solution_delta": self.solution_delta,
            "regard_delta": self.regard_delta,
            "total_diff": self.total_diff,
            "n_cases": self.n_cases,
        }


def _paired_errors(
    predicted: Sequence[AttributeScoreVector],
    targets: Sequence[AttributeScoreVector],
) -> dict[str, list[float]]:
    if len(predicted) != len(targets):
        raise AnalysisError(
            f"length mismatch: {len(predicted)} predictions vs {len(targets)} targets"
        )
    if not predicted:
        raise AnalysisError("need at least one prediction/target pair")
    diffs: dict[str, list[float]] = {a.value: [] for a in CANONICAL_ATTRIBUTES}
    for pred, target in zip(predicted, targets):
        for attr in CANONICAL_ATTRIBUTES:
            p, t = pred.get(attr), target.get(attr)
            if p is not None and t is not None:
                diffs[attr.value].append(p - t)
    if not any(diffs.values()):
        raise AnalysisError("no attribute is present on both sides of any pair")
    return diffs


def mae_vs_targets(
    predicted: Sequence[AttributeScoreVector],
    targets: Sequence[AttributeScoreVector],
) -> ControlReport:
    """Index-aligned MAE: per-attribute means plus the overall mean over
    every error term (errors never cancel)."""
    diffs = _paired_errors(predicted, targets)
    per_attr = {
        name: (sum(abs(d) for d in values) / len(values) if values else None)
        for name, values in diffs.items()
    }
    all_errors = [abs(d) for values in diffs.values() for d in values]
    return ControlReport(
        reframing_mae=per_attr["reframing"],
        regard_mae=per_attr["regard"],
        solution_mae=per_attr["solution"],
        overall_mae=sum(all_errors) / len(all_errors),
        n_cases=len(predicted),
    )


def delta_vs_experts(
    generated_scores: Sequence[AttributeScoreVector],
    expert_scores: Sequence[AttributeScoreVector],
) -> DeltaReport:
    diffs = _paired_errors(generated_scores, expert_scores)
    per_attr = {
        name: (sum(values) / len(values) if values else None)
        for name, values in diffs.items()
    }
    total = sum(abs(v) for v in per_attr.values() if v is not None)
    return DeltaReport(
        reframing_delta=per_attr["reframing"],
        solution_delta=per_attr["solution"],
        regard_delta=per_attr["regard"],
        total_diff=total,
        n_cases=len(generated_scores),
    )
