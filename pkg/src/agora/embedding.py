"""Token embedders behind the similarity metric.

A neural encoder never runs in-process: production deployments point the
HTTP embedder at any serving endpoint that returns per-token vectors,
while tests and --mock runs use the deterministic local embedders.
"""

from __future__ import annotations

import hashlib
import threading

import numpy as np
import requests

from agora.metrics import MetricError, TokenEmbeddingMatrix, tokenize


class HashEmbedder:
    """Deterministic dense vectors seeded from a hash of each token.

    Any two runs (on any machine) embed the same token identically, which
    is all the mock needs; the vectors carry no semantics.
    """

    def __init__(self, dim: int = 32, seed: int = 0):
        self.dim = dim
        self.seed = seed
        self._cache: dict[str, np.ndarray] = {}
        self._lock = threading.Lock()

    def _vector(self, token: str) -> np.ndarray:
        with self._lock:
            vec = self._cache.get(token)
            if vec is None:
                digest = hashlib.sha256(f"{self.seed}:{token}".encode()).digest()
                rng = np.random.default_rng(int.from_bytes(digest[:8], "big"))
                vec = rng.standard_normal(self.dim)
                self._cache[token] = vec
        return vec

    def embed(self, text: str) -> TokenEmbeddingMatrix:
        tokens = tokenize(text)
        vectors = (
            np.stack([self._vector(t) for t in tokens])
            if tokens
            else np.zeros((0, self.dim))
        )
        return TokenEmbeddingMatrix(tokens=tuple(tokens), vectors=vectors)


class IdentityEmbedder:
    """One-hot vectors: cosine is 1 for equal tokens and 0 otherwise.

    Under this embedder the similarity metric reduces to a token-overlap
    statistic, which makes it brute-forceable in tests.
    """

    def __init__(self, dim: int = 256):
        self.dim = dim
        self._index: dict[str, int] = {}
        self._lock = threading.Lock()

    def _slot(self, token: str) -> int:
        with self._lock:
            slot = self._index.get(token)
            if slot is None:
                slot = len(self._index)
                if slot >= self.dim:
                    raise MetricError(
                        f"identity embedder vocabulary exceeded dim={self.dim}"
                    )
                self._index[token] = slot
        return slot

    def embed(self, text: str) -> TokenEmbeddingMatrix:
        tokens = tokenize(text)
        vectors = np.zeros((len(tokens), self.dim))
        for row, token in enumerate(tokens):
            vectors[row, self._slot(token)] = 1.0
        return TokenEmbeddingMatrix(tokens=tuple(tokens), vectors=vectors)


class ConstantEmbedder:
    """Every token maps to the same unit vector (degenerate edge case)."""

    def __init__(self, dim: int = 8):
        self.dim = dim

    def embed(self, text: str) -> TokenEmbeddingMatrix:
        tokens = tokenize(text)
        vectors = np.zeros((len(tokens), self.dim))
        vectors[:, 0] = 1.0
        return TokenEmbeddingMatrix(tokens=tuple(tokens), vectors=vectors)


class HttpEmbedder:
    """POST ``{"text": ...}`` to a serving endpoint and read back
    ``{"tokens": [...], "vectors": [[...]]}``; dimension consistency is
    enforced client-side."""

    def __init__(self, url: str, timeout_ms: int = 30_000):
        self.url = url
        self.timeout = timeout_ms / 1000.0
        self._dim: int | None = None
        self._lock = threading.Lock()

    def embed(self, text: str) -> TokenEmbeddingMatrix:
        try:
            http = requests.post(self.url, json={"text": text}, timeout=self.timeout)
            http.raise_for_status()
            body = http.json()
            tokens = tuple(body["tokens"])
            vectors = np.asarray(body["vectors"], dtype=float)
        except (requests.RequestException, ValueError, KeyError, TypeError) as exc:
            raise MetricError(f"embedder backend failed: {exc}", kind="backend") from exc
        matrix = TokenEmbeddingMatrix(tokens=tokens, vectors=vectors)
        if len(tokens):
            with self._lock:
                dim = matrix.vectors.shape[1]
                if self._dim is None:
                    self._dim = dim
                elif dim != self._dim:
                    raise MetricError(
                        f"embedder dimension changed: {self._dim} -> {dim}",
                        kind="backend",
                    )
        return matrix
