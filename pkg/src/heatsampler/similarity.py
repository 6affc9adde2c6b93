"""Sliding-window cosine similarity and rolling block means.

For each pushed frame j the window records w_j, the mean of the square block of
the similarity matrix spanning frames max(0, j-T+1)..j (inclusive, diagonal
included). Frames are addressed by absolute stream index.
"""

from __future__ import annotations

import csv
from collections import deque
from pathlib import Path

import numpy as np

from .embeddings import Embedding

DEFAULT_EPSILON = 1e-8


def cosine(a: Embedding | np.ndarray, b: Embedding | np.ndarray) -> float:
    va = a.values if isinstance(a, Embedding) else np.asarray(a, dtype=np.float64)
    vb = b.values if isinstance(b, Embedding) else np.asarray(b, dtype=np.float64)
    if va.shape != vb.shape:
        raise ValueError(f"dimension mismatch: {va.shape} vs {vb.shape}")
    return float(min(1.0, max(-1.0, float(va @ vb))))


class SimilarityWindow:
    """The last ``capacity`` embeddings, their similarity matrix and w history."""

    def __init__(self, capacity: int) -> None:
        if capacity < 1:
            raise ValueError("window capacity must be >= 1")
        self.capacity = capacity
        self._vectors: np.ndarray | None = None
        self._sim = np.empty((capacity, capacity))
        self.frame_ids: deque[int] = deque(maxlen=capacity)
        self._w: deque[float] = deque(maxlen=capacity)
        self.count = 0  # frames pushed so far; the next frame gets this index

    def __len__(self) -> int:
        return len(self.frame_ids)

    @property
    def latest(self) -> int:
        if self.count == 0:
            raise IndexError("window is empty")
        return self.count - 1

    @property
    def oldest(self) -> int:
        return self.count - len(self)

    @property
    def matrix(self) -> np.ndarray:
        n = len(self)
        return self._sim[:n, :n].copy()

    def push(self, embedding: Embedding | np.ndarray, frame_id: int | None = None) -> "SimilarityWindow":
        v = embedding.values if isinstance(embedding, Embedding) else np.asarray(embedding, dtype=np.float64)
        if frame_id is None:
            frame_id = embedding.frame_id if isinstance(embedding, Embedding) else self.count
        if self._vectors is None:
            self._vectors = np.empty((self.capacity, v.shape[0]))
        elif v.shape[0] != self._vectors.shape[1]:
            raise ValueError("embedding dimension changed mid-stream")
        n = len(self)
        if n == self.capacity:
            # evict the oldest entry: shift vectors and matrix up-left by one
            self._vectors[:-1] = self._vectors[1:]
            self._sim[:-1, :-1] = self._sim[1:, 1:]
            n -= 1
        self._vectors[n] = v
        row = np.clip(self._vectors[: n + 1] @ v, -1.0, 1.0)
        row[n] = 1.0
        self._sim[n, : n + 1] = row
        self._sim[: n + 1, n] = row
        self.frame_ids.append(frame_id)
        self._w.append(float(self._sim[: n + 1, : n + 1].mean()))
        self.count += 1
        return self

    def rolling_mean(self, j: int) -> float:
        """w_j for an absolute index j still held in the window."""
        if not self.oldest <= j <= self.latest:
            raise IndexError(f"index {j} is outside the window [{self.oldest}, {self.latest}]")
        return self._w[j - self.oldest]

    def rolling_means(self, i: int | None = None) -> np.ndarray:
        """w_j for j in max(0, i-T+1)..i; ``i`` defaults to the latest frame."""
        i = self.latest if i is None else i
        start = max(0, i - self.capacity + 1)
        if i > self.latest or start < self.oldest:
            raise IndexError(f"window for index {i} is not fully held")
        w = np.fromiter(self._w, dtype=np.float64, count=len(self._w))
        return w[start - self.oldest : i - self.oldest + 1]

    def normalized_score(self, i: int | None = None, epsilon: float = DEFAULT_EPSILON) -> float:
        """Min-max normalized position of w_i among the in-window w values."""
        w = self.rolling_means(i)
        lo, hi = w.min(), w.max()
        return float((w[-1] - lo) / (hi - lo + epsilon))

    def dump_csv(self, path: str | Path) -> None:
        ids = list(self.frame_ids)
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["frame_id", *ids])
            for fid, row in zip(ids, self.matrix):
                writer.writerow([fid, *(f"{x:.9f}" for x in row)])


def push(window: SimilarityWindow, embedding: Embedding) -> SimilarityWindow:
    return window.push(embedding)


def rolling_mean(window: SimilarityWindow, j: int) -> float:
    return window.rolling_mean(j)


def normalized_score(window: SimilarityWindow, i: int | None = None, epsilon: float = DEFAULT_EPSILON) -> float:
    return window.normalized_score(i, epsilon)
