"""Token embedding providers for the greedy-matching similarity metrics."""

from __future__ import annotations

import hashlib
from functools import lru_cache
from typing import Mapping, Protocol, runtime_checkable

import numpy as np

from .text import tokenize


@runtime_checkable
class EmbeddingProvider(Protocol):
    def embed(self, text: str) -> np.ndarray:
        """One unit-norm row per whitespace token of ``text``."""


def check_unit(vectors: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.ndim != 2:
        raise ValueError("bad embedding: expected a 2-d array")
    if vectors.size and not np.allclose(np.linalg.norm(vectors, axis=1), 1.0, atol=tol, rtol=0):
        raise ValueError("bad embedding: vectors are not unit norm")
    return vectors


class TrigramEmbedder:
    """Hashed character-trigram bag per token, L2-normalized.

    Tokens are wrapped as ``#token#`` and every trigram bumps one of ``dim``
    buckets chosen by a stable hash, so related spellings get a nonzero
    cosine.  Entries are nonnegative, so cosines fall in [0, 1].
    """

    def __init__(self, dim: int = 256):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.dim = dim
        self._token = lru_cache(maxsize=65536)(self._token_vector)

    def _token_vector(self, token: str) -> np.ndarray:
        padded = f"#{token}#"
        vec = np.zeros(self.dim)
        for i in range(len(padded) - 2):
            digest = hashlib.blake2b(padded[i:i + 3].encode("utf-8"), digest_size=8).digest()
            vec[int.from_bytes(digest, "little") % self.dim] += 1.0
        vec /= np.linalg.norm(vec)
        vec.setflags(write=False)
        return vec

    def embed(self, text: str) -> np.ndarray:
        tokens = tokenize(text)
        if not tokens:
            return np.zeros((0, self.dim))
        return np.stack([self._token(t) for t in tokens])

    def __repr__(self):
        return f"TrigramEmbedder(dim={self.dim})"


class StaticEmbedder:
    """Fixed token-to-vector table; rows are normalized on construction."""

    def __init__(self, table: Mapping[str, np.ndarray]):
        if not table:
            raise ValueError("empty embedding table")
        self.table = {}
        for tok, vec in table.items():
            vec = np.asarray(vec, dtype=np.float64)
            norm = np.linalg.norm(vec)
            if norm == 0:
                raise ValueError(f"zero vector for {tok!r}")
            self.table[tok] = vec / norm
        self.dim = len(next(iter(self.table.values())))

    @classmethod
    def orthogonal(cls, tokens) -> "StaticEmbedder":
        tokens = list(dict.fromkeys(tokens))
        eye = np.eye(len(tokens))
        return cls({t: eye[i] for i, t in enumerate(tokens)})

    def embed(self, text: str) -> np.ndarray:
        tokens = tokenize(text)
        if not tokens:
            return np.zeros((0, self.dim))
        try:
            return np.stack([self.table[t] for t in tokens])
        except KeyError as exc:
            raise KeyError(f"no embedding for token {exc.args[0]!r}") from None


def get_provider(name: str) -> EmbeddingProvider:
    if name == "trigram":
        return TrigramEmbedder()
    raise ValueError(f"unknown embedding provider {name!r}")
