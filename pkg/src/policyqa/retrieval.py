"""Deterministic local embedding and exact top-k retrieval.

The embedder needs no model weights and no network: it hashes character
3-grams of the lowercased tokens into a fixed number of signed buckets and
L2-normalizes.  Cosine ranking then reduces to a dot product.  Retrieval is
an exact linear scan; nothing approximate, so results are reproducible
across runs and machines.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, DuplicateChunkId, EmptyIndex, EmptyText

log = logging.getLogger(__name__)

EMBED_DIM = 256
DEFAULT_K = 3

# FNV-1a, 64 bit. The embedder runs it from a fixed non-standard seed so
# embedding buckets are decoupled from anything else that hashes text.
FNV_OFFSET = 14695981039346656037
FNV_PRIME = 1099511628211
EMBED_SEED = 0x9E3779B97F4A7C15
_MASK64 = (1 << 64) - 1

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def fnv1a64(data: bytes, seed: int = FNV_OFFSET) -> int:
    h = seed
    for b in data:
        h ^= b
        h = (h * FNV_PRIME) & _MASK64
    return h


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def _char_trigrams(token: str) -> list[str]:
    padded = f"^{token}$"
    if len(padded) <= 3:
        return [padded]
    return [padded[i : i + 3] for i in range(len(padded) - 2)]


def embed_text(text: str, dim: int = EMBED_DIM) -> np.ndarray:
    """Embed text into a unit-norm vector of ``dim`` signed hash buckets.

    Each occurrence of a token 3-gram adds +-1 to one bucket, so repeated
    terms weigh in proportion to their frequency before normalization.
    """
    tokens = tokenize(text)
    if not tokens:
        raise EmptyText("no tokens to embed")
    vec = np.zeros(dim, dtype=np.float64)
    for token in tokens:
        for gram in _char_trigrams(token):
            h = fnv1a64(gram.encode("utf-8"), seed=EMBED_SEED)
            sign = 1.0 if (h >> 63) == 0 else -1.0
            vec[h % dim] += sign
    norm = float(np.linalg.norm(vec))
    if norm < 1e-12:
        # signs cancelled exactly; treat like untokenizable input
        raise EmptyText("text has no usable embedding signal")
    return vec / norm


@dataclass
class Hit:
    chunk_id: str
    score: float


class VectorIndex:
    """Exact dense index: all vectors in one matrix, search is a full scan."""

    def __init__(self, dim: int = EMBED_DIM) -> None:
        self.dim = dim
        self.chunk_ids: list[str] = []
        self._rows: list[np.ndarray] = []
        self._matrix: np.ndarray | None = None
        self._id_set: set[str] = set()

    def __len__(self) -> int:
        return len(self.chunk_ids)

    def add(self, chunk_id: str, vector: np.ndarray) -> None:
        if chunk_id in self._id_set:
            raise DuplicateChunkId(chunk_id)
        if vector.shape != (self.dim,):
            raise DimensionMismatch(f"expected ({self.dim},), got {vector.shape}")
        self.chunk_ids.append(chunk_id)
        self._rows.append(np.asarray(vector, dtype=np.float64))
        self._id_set.add(chunk_id)
        self._matrix = None

    def _materialize(self) -> np.ndarray:
        if self._matrix is None:
            self._matrix = np.vstack(self._rows)
        return self._matrix

    def search(self, query: np.ndarray, k: int = DEFAULT_K) -> list[Hit]:
        """Top-k by cosine score, descending; ties broken by chunk_id ascending."""
        if not self.chunk_ids:
            raise EmptyIndex("search on an empty index")
        if query.shape != (self.dim,):
            raise DimensionMismatch(f"expected ({self.dim},), got {query.shape}")
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        scores = self._materialize() @ np.asarray(query, dtype=np.float64)
        order = np.lexsort((np.array(self.chunk_ids, dtype=object), -scores))
        return [Hit(chunk_id=self.chunk_ids[i], score=float(scores[i])) for i in order[:k]]

    def save(self, path: str | Path) -> None:
        """One line per vector: ``chunk_id<TAB>v1,v2,...,vD`` (full precision)."""
        with open(path, "w", encoding="utf-8") as fh:
            for chunk_id, row in zip(self.chunk_ids, self._rows):
                fh.write(chunk_id + "\t" + ",".join(repr(float(v)) for v in row) + "\n")

    @classmethod
    def load(cls, path: str | Path, dim: int = EMBED_DIM) -> "VectorIndex":
        index = cls(dim=dim)
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.rstrip("\n")
                if not line:
                    continue
                chunk_id, _, packed = line.partition("\t")
                values = np.array([float(v) for v in packed.split(",")], dtype=np.float64)
                index.add(chunk_id, values)
        return index


def build_index(chunks, dim: int = EMBED_DIM) -> VectorIndex:
    """Embed and index chunk texts; chunks with no tokens are skipped."""
    index = VectorIndex(dim=dim)
    for chunk in chunks:
        try:
            index.add(chunk.chunk_id, embed_text(chunk.text, dim=dim))
        except EmptyText:
            log.warning("chunk %s has no tokens, not indexed", chunk.chunk_id)
    return index
