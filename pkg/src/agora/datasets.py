"""Loaders, validators, and converters for the evaluation corpora.

The native format is JSON Lines, one case per line, UTF-8. Unknown fields
are kept on the case and written back out unchanged. Question/answer CSV
exports (Counsel Chat style) are converted into the native format through
a configurable column mapping, since column names vary across
distributions of that dataset.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from agora.domain import ConfigurationError, UserCase

logger = logging.getLogger(__name__)


class LoadError(ValueError):
    pass


def load_native(path: str | Path) -> list[UserCase]:
    """Parse a native JSONL dataset, failing loudly on any malformed line."""
    path = Path(path)
    if not path.exists():
        raise LoadError(f"dataset not found: {path}")
    cases: list[UserCase] = []
    seen: set[str] = set()
    with path.open(encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
            except ValueError as exc:
                raise LoadError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            try:
                case = UserCase.from_json_dict(data)
            except (KeyError, TypeError, ConfigurationError) as exc:
                raise LoadError(f"{path}:{lineno}: invalid case: {exc}") from exc
            if case.id in seen:
                raise LoadError(f"{path}:{lineno}: duplicate case id {case.id!r}")
            seen.add(case.id)
            cases.append(case)
    if not cases:
        logger.warning("dataset %s contained no cases", path)
    return cases


def save_native(cases: Iterable[UserCase], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        for case in cases:
            handle.write(json.dumps(case.to_json_dict(), ensure_ascii=False) + "\n")


DEFAULT_COUNSELCHAT_MAPPING = {
    "id": "questionID",
    "question": "questionText",
    "answer": "answerText",
}


@dataclass(frozen=True)
class ConversionReport:
    n_cases: int
    n_missing_answer: int
    n_skipped_empty_question: int
    n_deduplicated: int
    out_path: str


def convert_counselchat(
    csv_path: str | Path,
    out_path: str | Path,
    mapping: Mapping[str, str] | None = None,
) -> ConversionReport:
    """Convert a question/answer CSV into native JSONL, one single-post case
    per row. Rows without an answer still become cases (no expert response)
    and are counted in the report; duplicate ids get a numeric suffix."""
    columns = dict(DEFAULT_COUNSELCHAT_MAPPING)
    columns.update(mapping or {})
    csv_path = Path(csv_path)
    if not csv_path.exists():
        raise LoadError(f"csv not found: {csv_path}")

    with csv_path.open(encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        fieldnames = reader.fieldnames or []
        missing = [col for col in columns.values() if col not in fieldnames]
        if missing:
            raise LoadError(
                f"{csv_path}: missing required column(s) {missing}; "
                f"present: {fieldnames}"
            )
        cases: list[UserCase] = []
        seen: dict[str, int] = {}
        n_missing_answer = 0
        n_skipped = 0
        n_dedup = 0
        for idx, row in enumerate(reader, start=1):
            question = (row.get(columns["question"]) or "").strip()
            if not question:
                n_skipped += 1
                continue
            raw_id = (row.get(columns["id"]) or "").strip() or f"row-{idx}"
            if raw_id in seen:
                seen[raw_id] += 1
                case_id = f"{raw_id}-{seen[raw_id]}"
                n_dedup += 1
                logger.warning(
                    "duplicate id %r at row %d, renamed to %r", raw_id, idx, case_id
                )
            else:
                seen[raw_id] = 1
                case_id = raw_id
            answer = (row.get(columns["answer"]) or "").strip() or None
            if answer is None:
                n_missing_answer += 1
            cases.append(
                UserCase(
                    id=case_id,
                    posts=(question,),
                    expert_response=answer,
                    source="counselchat",
                )
            )

    save_native(cases, out_path)
    return ConversionReport(
        n_cases=len(cases),
        n_missing_answer=n_missing_answer,
        n_skipped_empty_question=n_skipped,
        n_deduplicated=n_dedup,
        out_path=str(out_path),
    )


@dataclass(frozen=True)
class ValidationReport:
    n_cases: int
    n_with_reference: int
    n_with_labels: int
    n_posts: int
    post_chars_min: int
    post_chars_mean: float
    post_chars_max: int
    n_posts_outside_length_band: int  # outside 500-2000 chars, reported only

    @property
    def label_coverage(self) -> float:
        return self.n_with_labels / self.n_cases if self.n_cases else 0.0

    @property
    def reference_coverage(self) -> float:
        return self.n_with_reference / self.n_cases if self.n_cases else 0.0

    def render_text(self) -> str:
        lines = [
            f"cases: {self.n_cases}",
            f"with expert reference: {self.n_with_reference}"
            f" ({self.reference_coverage:.0%})",
            f"with attribute labels: {self.n_with_labels}"
            f" ({self.label_coverage:.0%})",
            f"posts: {self.n_posts} (chars min/mean/max:"
            f" {self.post_chars_min}/{self.post_chars_mean:.0f}/{self.post_chars_max})",
            f"posts outside the 500-2000 char band: {self.n_posts_outside_length_band}",
        ]
        return "\n".join(lines)


def validate(dataset: str | Path | Sequence[UserCase]) -> ValidationReport:
    """Report-only dataset checks; nothing here rejects a case."""
    cases = load_native(dataset) if isinstance(dataset, (str, Path)) else list(dataset)
    lengths = [len(post) for case in cases for post in case.posts]
    return ValidationReport(
        n_cases=len(cases),
        n_with_reference=sum(1 for c in cases if c.expert_response is not None),
        n_with_labels=sum(1 for c in cases if c.attribute_labels is not None),
        n_posts=len(lengths),
        post_chars_min=min(lengths) if lengths else 0,
        post_chars_mean=sum(lengths) / len(lengths) if lengths else 0.0,
        post_chars_max=max(lengths) if lengths else 0,
        n_posts_outside_length_band=sum(1 for n in lengths if not 500 <= n <= 2000),
    )


@dataclass(frozen=True)
class DatasetDescriptor:
    name: str
    path: str
    format: str  # jsonl_native | counselchat_csv
    case_count: int


def describe(path: str | Path, format: str | None = None) -> DatasetDescriptor:
    path = Path(path)
    fmt = format or ("counselchat_csv" if path.suffix == ".csv" else "jsonl_native")
    if fmt == "jsonl_native":
        count = len(load_native(path))
    elif fmt == "counselchat_csv":
        with path.open(encoding="utf-8", newline="") as handle:
            count = sum(1 for _ in csv.DictReader(handle))
    else:
        raise LoadError(f"unknown dataset format {fmt!r}")
    return DatasetDescriptor(
        name=path.stem, path=str(path), format=fmt, case_count=count
    )
