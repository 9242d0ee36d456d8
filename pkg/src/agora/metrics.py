"""Reference-based metrics and their aggregate statistics.

Scores are on a 0-100 scale throughout:

* ``unigram_bleu``: 100 * BP * p1, where p1 is clipped unigram precision
  and BP = min(1, exp(1 - r/c)) is the standard brevity penalty.
* ``rouge_l``: 100 * F1 of the longest common subsequence
  (P = LCS/|cand|, R = LCS/|ref|).
* ``bert_score_f1``: greedy-matching token-embedding similarity. For every
  reference token take its best cosine over candidate tokens (recall side)
  and vice versa (precision side); F1 of the two means, times 100, with no
  baseline rescaling.

Corpus reports average the per-pair metrics arithmetically and then take
the geometric and harmonic means of the three corpus-level averages.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Protocol, Sequence

import numpy as np

_TOKEN = re.compile(r"\w+|[^\w\s]", re.UNICODE)


class MetricError(ValueError):
    def __init__(self, message: str, kind: str = "input"):
        super().__init__(message)
        self.kind = kind


def tokenize(text: str) -> list[str]:
    """Lowercased word tokens with punctuation split off separately."""
    return _TOKEN.findall(text.lower())


def unigram_bleu(candidate: str, reference: str) -> float:
    ref_tokens = tokenize(reference)
    if not ref_tokens:
        raise MetricError("reference must be non-empty")
    cand_tokens = tokenize(candidate)
    if not cand_tokens:
        return 0.0
    ref_counts: dict[str, int] = {}
    for token in ref_tokens:
        ref_counts[token] = ref_counts.get(token, 0) + 1
    clipped = 0
    cand_counts: dict[str, int] = {}
    for token in cand_tokens:
        cand_counts[token] = cand_counts.get(token, 0) + 1
    for token, count in cand_counts.items():
        clipped += min(count, ref_counts.get(token, 0))
    precision = clipped / len(cand_tokens)
    brevity = min(1.0, math.exp(1.0 - len(ref_tokens) / len(cand_tokens)))
    return 100.0 * brevity * precision


def _lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if not a or not b:
        return 0
    previous = [0] * (len(b) + 1)
    for x in a:
        current = [0]
        for j, y in enumerate(b, start=1):
            if x == y:
                current.append(previous[j - 1] + 1)
            else:
                current.append(max(previous[j], current[j - 1]))
        previous = current
    return previous[-1]


def rouge_l(candidate: str, reference: str) -> float:
    ref_tokens = tokenize(reference)
    if not ref_tokens:
        raise MetricError("reference must be non-empty")
    cand_tokens = tokenize(candidate)
    lcs = _lcs_length(cand_tokens, ref_tokens)
    if lcs == 0:
        return 0.0
    precision = lcs / len(cand_tokens)
    recall = lcs / len(ref_tokens)
    return 100.0 * 2.0 * precision * recall / (precision + recall)


@dataclass(frozen=True, eq=False)
class TokenEmbeddingMatrix:
    tokens: tuple[str, ...]
    vectors: Any  # (n_tokens, dim) array-like
    unit_vectors: Any = field(init=False, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "tokens", tuple(self.tokens))
        array = np.asarray(self.vectors, dtype=float)
        if array.ndim != 2:
            raise MetricError("vectors must be a 2-d matrix")
        if array.shape[0] != len(self.tokens):
            raise MetricError(
                f"{len(self.tokens)} tokens but {array.shape[0]} vectors"
            )
        if len(self.tokens) and array.shape[1] < 1:
            raise MetricError("embedding dimension must be >= 1")
        object.__setattr__(self, "vectors", array)
        # cosine is the only consumer, so unit rows are precomputed once
        norms = np.sqrt(np.einsum("ij,ij->i", array, array))
        norms[norms == 0.0] = 1.0
        object.__setattr__(self, "unit_vectors", array / norms[:, None])


class TokenEmbedder(Protocol):
    def embed(self, text: str) -> TokenEmbeddingMatrix: ...


def bert_score_f1(candidate: str, reference: str, embedder: TokenEmbedder) -> float:
    ref = embedder.embed(reference)
    if not ref.tokens:
        raise MetricError("reference must be non-empty")
    cand = embedder.embed(candidate)
    if not cand.tokens:
        return 0.0
    sim = cand.unit_vectors @ ref.unit_vectors.T
    precision = float(sim.max(axis=1).mean())
    recall = float(sim.max(axis=0).mean())
    if precision + recall <= 0.0:
        return 0.0
    return 100.0 * 2.0 * precision * recall / (precision + recall)


def geometric_mean(values: Iterable[float]) -> float:
    items = [float(v) for v in values]
    if not items:
        raise MetricError("geometric mean needs at least one value")
    if any(v <= 0 for v in items):
        raise MetricError("geometric mean requires all values > 0")
    return math.exp(sum(math.log(v) for v in items) / len(items))


def harmonic_mean(values: Iterable[float]) -> float:
    items = [float(v) for v in values]
    if not items:
        raise MetricError("harmonic mean needs at least one value")
    if any(v <= 0 for v in items):
        raise MetricError("harmonic mean requires all values > 0")
    return len(items) / sum(1.0 / v for v in items)


@dataclass(frozen=True)
class MetricReport:
    bleu: float
    rouge_l: float
    bert_score: float
    gm: float
    hm: float

    def to_json_dict(self) -> dict[str, float]:
        return {
            "bleu": self.bleu,
            "rouge_l": self.rouge_l,
            "bert_score": self.bert_score,
            "gm": self.gm,
            "hm": self.hm,
        }

    @classmethod
    def from_json_dict(cls, data: Mapping[str, float]) -> "MetricReport":
        return cls(
            bleu=data["bleu"],
            rouge_l=data["rouge_l"],
            bert_score=data["bert_score"],
            gm=data["gm"],
            hm=data["hm"],
        )


def pair_report(candidate: str, reference: str, embedder: TokenEmbedder) -> MetricReport:
    bleu = unigram_bleu(candidate, reference)
    rouge = rouge_l(candidate, reference)
    bert = bert_score_f1(candidate, reference, embedder)
    return MetricReport(
        bleu=bleu,
        rouge_l=rouge,
        bert_score=bert,
        gm=geometric_mean([bleu, rouge, bert]) if min(bleu, rouge, bert) > 0 else 0.0,
        hm=harmonic_mean([bleu, rouge, bert]) if min(bleu, rouge, bert) > 0 else 0.0,
    )


def corpus_report(
    pairs: Sequence[tuple[str, str]], embedder: TokenEmbedder
) -> MetricReport:
    """Corpus scores: arithmetic means per metric, then GM/HM of the three
    corpus-level averages (not of per-pair aggregates)."""
    if not pairs:
        raise MetricError("corpus must contain at least one pair")
    bleus, rouges, berts = [], [], []
    for candidate, reference in pairs:
        bleus.append(unigram_bleu(candidate, reference))
        rouges.append(rouge_l(candidate, reference))
        berts.append(bert_score_f1(candidate, reference, embedder))
    bleu = sum(bleus) / len(bleus)
    rouge = sum(rouges) / len(rouges)
    bert = sum(berts) / len(berts)
    return MetricReport(
        bleu=bleu,
        rouge_l=rouge,
        bert_score=bert,
        gm=geometric_mean([bleu, rouge, bert]),
        hm=harmonic_mean([bleu, rouge, bert]),
    )
