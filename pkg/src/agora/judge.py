"""LLM-as-judge evaluation: 5-point scores on five criteria, plus blinded
preference ranking across methods.

Judge prompts never contain method names or configuration details; the
ranking task shows responses under shuffled single-letter labels with the
shuffle seed recorded so a rerun reproduces the exact presentation order.
"""

from __future__ import annotations

import csv
import io
import random
import re
from dataclasses import dataclass
from typing import Any, Mapping

from agora import prompts
from agora.domain import AnalysisError, ConfigurationError, UserCase
from agora.gateway import LlmGateway
from agora.structured import StructuredOutputError, complete_structured, require_int_in

CRITERIA = prompts.JUDGE_CRITERIA  # customization, satisfaction, professionalism, relevance, understanding


class JudgeParseError(StructuredOutputError):
    pass


@dataclass(frozen=True)
class JudgeScores:
    customization: int
    satisfaction: int
    professionalism: int
    relevance: int
    understanding: int

    def __post_init__(self) -> None:
        for criterion in CRITERIA:
            value = getattr(self, criterion)
            if not isinstance(value, int) or not 1 <= value <= 5:
                raise ConfigurationError(
                    f"{criterion} score {value!r} must be an integer in 1..5"
                )

    def to_json_dict(self) -> dict[str, int]:
        return {c: getattr(self, c) for c in CRITERIA}

    @classmethod
    def from_json_dict(cls, data: Mapping[str, int]) -> "JudgeScores":
        return cls(**{c: int(data[c]) for c in CRITERIA})


def judge_response(
    case: UserCase,
    response_text: str,
    gw: LlmGateway,
    model_id: str,
    seed: int | None = None,
    expert_response: str | None = None,
) -> JudgeScores:
    """One temperature-0 structured call scoring all five criteria.

    Reference-free unless ``expert_response`` is supplied explicitly.
    """

    def validate(obj: Mapping[str, Any]) -> JudgeScores:
        return JudgeScores(
            **{c: require_int_in(obj, c, 1, 5, JudgeParseError) for c in CRITERIA}
        )

    scores, _ = complete_structured(
        gw,
        prompts.judge_likert_prompt(case, response_text, expert_response),
        model_id=model_id,
        schema=prompts.judge_schema(),
        validate=validate,
        error_cls=JudgeParseError,
        temperature=0.0,
        seed=seed,
    )
    return scores


@dataclass(frozen=True)
class RankingResult:
    case_id: str
    ordering: tuple[str, ...]  # method names, best first
    ranks: Mapping[str, int]  # method name -> 1-based rank
    shuffle_seed: int
    label_assignment: Mapping[str, str]  # blinded label -> method name

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "case_id": self.case_id,
            "ordering": list(self.ordering),
            "ranks": dict(self.ranks),
            "shuffle_seed": self.shuffle_seed,
            "label_assignment": dict(self.label_assignment),
        }


def assign_blinded_labels(
    responses: Mapping[str, str], shuffle_seed: int
) -> list[tuple[str, str, str]]:
    """Deterministically shuffle presentation order and label positions
    A, B, C, ... Returns (label, method, text) triples in presentation order."""
    methods = sorted(responses)
    rng = random.Random(shuffle_seed)
    rng.shuffle(methods)
    return [
        (chr(ord("A") + position), method, responses[method])
        for position, method in enumerate(methods)
    ]


def judge_ranking(
    case: UserCase,
    responses: Mapping[str, str],
    gw: LlmGateway,
    model_id: str,
    shuffle_seed: int = 0,
    seed: int | None = None,
) -> RankingResult:
    """Rank blinded responses best-first and map labels back to methods."""
    if len(responses) < 2:
        raise ConfigurationError("ranking needs at least two responses")
    presented = assign_blinded_labels(responses, shuffle_seed)
    label_to_method = {label: method for label, method, _ in presented}

    messages = prompts.judge_ranking_prompt(
        case, [(label, text) for label, _, text in presented]
    )
    from agora.gateway import ChatRequest

    reply = gw.complete(
        ChatRequest(
            model_id=model_id,
            messages=tuple(messages),
            temperature=0.0,
            max_tokens=64,
            seed=seed,
        )
    ).text

    expected = set(label_to_method)
    # match only the assigned labels, so stray capitals in prose don't count
    label_pattern = re.compile(r"\b(" + "|".join(sorted(expected)) + r")\b")
    found = label_pattern.findall(reply)
    if sorted(found) != sorted(expected):
        raise JudgeParseError(
            f"ranking output is not a permutation of {sorted(expected)}: {reply!r}",
            raw=reply,
        )
    ordering = tuple(label_to_method[label] for label in found)
    ranks = {method: position + 1 for position, method in enumerate(ordering)}
    return RankingResult(
        case_id=case.id,
        ordering=ordering,
        ranks=ranks,
        shuffle_seed=shuffle_seed,
        label_assignment=label_to_method,
    )


@dataclass(frozen=True)
class JudgeSummaryRow:
    method: str
    customization: float
    satisfaction: float
    professionalism: float
    relevance: float
    understanding: float
    rank: float | None

    def to_json_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"method": self.method}
        out.update({c: getattr(self, c) for c in CRITERIA})
        out["rank"] = self.rank
        return out


def aggregate_judgements(
    scores: Mapping[str, Mapping[str, JudgeScores]],
    ranks: Mapping[str, Mapping[str, int]] | None = None,
) -> list[JudgeSummaryRow]:
    """Per-method criterion means and mean rank.

    Every method must be judged on every case; gaps are an error listing
    the missing case ids.
    """
    if not scores:
        raise AnalysisError("no judgements to aggregate")
    all_cases = sorted({cid for per_case in scores.values() for cid in per_case})
    gaps = [
        f"{method}: missing {sorted(set(all_cases) - set(per_case))}"
        for method, per_case in scores.items()
        if set(per_case) != set(all_cases)
    ]
    if gaps:
        raise AnalysisError("incomplete judge coverage; " + "; ".join(gaps))

    rows = []
    for method, per_case in scores.items():
        means = {
            c: sum(getattr(s, c) for s in per_case.values()) / len(per_case)
            for c in CRITERIA
        }
        rank: float | None = None
        if ranks is not None and method in ranks:
            method_ranks = ranks[method]
            if set(method_ranks) != set(all_cases):
                raise AnalysisError(
                    f"{method}: rank coverage {sorted(method_ranks)} does not "
                    f"match case set"
                )
            rank = sum(method_ranks.values()) / len(method_ranks)
        rows.append(JudgeSummaryRow(method=method, rank=rank, **means))
    return rows


SUMMARY_COLUMNS = ("Method", "Cus.", "Sat.", "Pro.", "Rel.", "Und.", "Rank")


def summary_csv(rows: list[JudgeSummaryRow]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer)
    writer.writerow(SUMMARY_COLUMNS)
    for row in rows:
        writer.writerow(
            [
                row.method,
                f"{row.customization:.2f}",
                f"{row.satisfaction:.2f}",
                f"{row.professionalism:.2f}",
                f"{row.relevance:.2f}",
                f"{row.understanding:.2f}",
                f"{row.rank:.2f}" if row.rank is not None else "",
            ]
        )
    return buffer.getvalue()
