"""Frozen word embeddings: word2vec-format readers and a random fallback.

Embeddings are lookup-only during training (no gradient flows into them), so
the table stores a plain numpy matrix.  Unknown tokens share one reserved
vector.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

UNK = "<unk>"


class EmbeddingTable:
    """Token -> d-vector lookup with a shared unknown row."""

    def __init__(self, vocab: list[str], matrix: np.ndarray):
        if len(vocab) != matrix.shape[0]:
            raise ValueError(f"{len(vocab)} tokens vs {matrix.shape[0]} rows")
        if not np.all(np.isfinite(matrix)):
            raise ValueError("embedding matrix contains non-finite values")
        self.vocab = list(vocab)
        self.matrix = np.asarray(matrix, dtype=np.float64)
        self.index = {w: i for i, w in enumerate(self.vocab)}
        if UNK not in self.index:
            self.vocab.append(UNK)
            self.index[UNK] = len(self.vocab) - 1
            rng = np.random.default_rng(0)
            self.matrix = np.vstack([self.matrix, rng.uniform(-0.05, 0.05, self.dim)])

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def row(self, token: str) -> np.ndarray:
        return self.matrix[self.index.get(token, self.index[UNK])]

    def lookup(self, tokens: list[str]) -> np.ndarray:
        """(len(tokens), dim) matrix; unknown tokens share the UNK row."""
        idx = [self.index.get(t, self.index[UNK]) for t in tokens]
        return self.matrix[idx]

    @classmethod
    def random(cls, vocab: list[str], dim: int, seed: int = 0) -> "EmbeddingTable":
        rng = np.random.default_rng(seed)
        words = sorted(set(vocab))
        return cls(words, rng.uniform(-0.05, 0.05, size=(len(words), dim)))


def load_word2vec_text(path: str | Path) -> EmbeddingTable:
    """Read 'token v1 ... vd' lines; an optional 'count dim' header is skipped."""
    words: list[str] = []
    rows: list[list[float]] = []
    with open(path, encoding="utf-8") as fh:
        first = fh.readline().split()
        if len(first) != 2 or not (first[0].isdigit() and first[1].isdigit()):
            words.append(first[0])
            rows.append([float(v) for v in first[1:]])
        for line in fh:
            parts = line.rstrip("\n").split(" ")
            if not parts or parts == [""]:
                continue
            words.append(parts[0])
            rows.append([float(v) for v in parts[1:] if v])
    matrix = np.asarray(rows, dtype=np.float64)
    if matrix.ndim != 2:
        raise ValueError(f"{path}: inconsistent vector widths")
    return EmbeddingTable(words, matrix)


def load_word2vec_binary(path: str | Path) -> EmbeddingTable:
    """Read the word2vec .bin layout: text header, then word + float32 block."""
    words: list[str] = []
    with open(path, "rb") as fh:
        header = fh.readline().split()
        count, dim = int(header[0]), int(header[1])
        matrix = np.empty((count, dim), dtype=np.float64)
        for r in range(count):
            chars = []
            while True:
                ch = fh.read(1)
                if ch in (b" ", b""):
                    break
                if ch != b"\n":
                    chars.append(ch)
            words.append(b"".join(chars).decode("utf-8"))
            matrix[r] = np.asarray(struct.unpack(f"{dim}f", fh.read(4 * dim)), dtype=np.float64)
    return EmbeddingTable(words, matrix)


def load_embeddings(path: str | Path) -> EmbeddingTable:
    path = Path(path)
    if path.suffix == ".bin":
        return load_word2vec_binary(path)
    return load_word2vec_text(path)
