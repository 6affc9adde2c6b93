"""Thermal frame embeddings and clustering-based validation.

The block-mean embedder is a fixed, training-free stand-in for a learned
encoder; any 64-d embedding loaded from CSV is handled identically downstream.
"""

from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Hashable, Mapping, Sequence

import numpy as np

from .frames import ThermalFrame

EMBED_DIM = 64
GRID = 8  # 8x8 blocks -> 64 components


class DegenerateEmbeddingError(ValueError):
    """The vector has zero norm and cannot be unit-normalized."""


@dataclass(frozen=True, eq=False)
class Embedding:
    frame_id: int
    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (EMBED_DIM,):
            raise ValueError(f"embedding must have {EMBED_DIM} components, got {v.shape}")
        if abs(np.linalg.norm(v) - 1.0) > 1e-6:
            raise ValueError("embedding must be unit-normalized")
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class ClusterAssignment:
    labels: dict[int, int]  # frame_id -> cluster index
    k: int
    objective_history: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if any(not 0 <= c < self.k for c in self.labels.values()):
            raise ValueError("cluster index outside [0, k)")


def unit_normalize(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    norm = float(np.linalg.norm(v))
    if not math.isfinite(norm):
        raise ValueError("non-finite embedding component")
    if norm == 0.0:
        raise DegenerateEmbeddingError("zero vector cannot be normalized")
    return v / norm


def block_means(temps: np.ndarray) -> np.ndarray:
    """Means over an 8x8 grid of equal blocks; accepts (h, w) or (n, h, w)."""
    temps = np.asarray(temps, dtype=np.float64)
    h, w = temps.shape[-2:]
    if h % GRID or w % GRID:
        raise ValueError(f"{w}x{h} frame cannot be tiled into {GRID}x{GRID} blocks")
    bh, bw = h // GRID, w // GRID
    blocks = temps.reshape(*temps.shape[:-2], GRID, bh, GRID, bw)
    return blocks.mean(axis=(-3, -1)).reshape(*temps.shape[:-2], GRID * GRID)


def embed_array(temps: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Vectorized block-mean embedding of a (n, h, w) stack; returns (n, 64)."""
    means = block_means(temps)
    centered = means - means.mean(axis=-1, keepdims=True)
    norms = np.linalg.norm(centered, axis=-1, keepdims=True)
    if np.any(norms <= tol):
        raise DegenerateEmbeddingError("zero-variance frame has no embedding")
    return centered / norms


def embed_blockmean(frame: ThermalFrame, frame_id: int = 0) -> Embedding:
    return Embedding(frame_id, embed_array(frame.temps))


def load_embeddings(path: str | Path) -> dict[int, Embedding]:
    out: dict[int, Embedding] = {}
    with Path(path).open(newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].strip() == "frame_id":
                continue
            if len(row) != EMBED_DIM + 1:
                raise ValueError(
                    f"line {lineno}: expected {EMBED_DIM + 1} columns, got {len(row)}"
                )
            values = np.array([float(x) for x in row[1:]])
            if not np.all(np.isfinite(values)):
                raise ValueError(f"line {lineno}: non-finite value")
            fid = int(row[0])
            out[fid] = Embedding(fid, unit_normalize(values))
    return out


def save_embeddings(embeddings: Mapping[int, Embedding], path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["frame_id", *(f"v{i}" for i in range(EMBED_DIM))])
        for fid in sorted(embeddings):
            writer.writerow([fid, *(repr(float(x)) for x in embeddings[fid].values)])


def save_assignment(assignment: ClusterAssignment, path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["frame_id", "cluster"])
        for fid in sorted(assignment.labels):
            writer.writerow([fid, assignment.labels[fid]])


# --- k-means -----------------------------------------------------------------


def _sq_dists(x: np.ndarray, centers: np.ndarray) -> np.ndarray:
    return ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=-1)


def _kmeanspp(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(x)
    idx = [int(rng.integers(n))]
    d2 = ((x - x[idx[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            # all remaining points coincide with a center; pick unused ones in order
            unused = [i for i in range(n) if i not in set(idx)]
            idx.append(unused[0])
        else:
            idx.append(int(rng.choice(n, p=d2 / total)))
        d2 = np.minimum(d2, ((x - x[idx[-1]]) ** 2).sum(axis=1))
    return x[idx].copy()


def kmeans(
    embeddings: Mapping[int, Embedding] | Sequence[Embedding],
    k: int,
    seed: int = 0,
    max_iter: int = 100,
) -> ClusterAssignment:
    """Lloyd's algorithm with k-means++ seeding.

    Stops when assignments no longer change or after ``max_iter`` rounds. The
    per-iteration objective (sum of squared distances) is kept in
    ``objective_history``.
    """
    items = list(embeddings.values()) if isinstance(embeddings, Mapping) else list(embeddings)
    n = len(items)
    if k < 1 or k > n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    ids = [e.frame_id for e in items]
    x = np.stack([e.values for e in items])
    rng = np.random.default_rng(seed)
    centers = _kmeanspp(x, k, rng)

    assign = np.full(n, -1)
    history: list[float] = []
    for _ in range(max_iter):
        d2 = _sq_dists(x, centers)
        new_assign = d2.argmin(axis=1)
        history.append(float(d2[np.arange(n), new_assign].sum()))
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for c in range(k):
            members = x[assign == c]
            if len(members):
                centers[c] = members.mean(axis=0)
    return ClusterAssignment(dict(zip(ids, map(int, assign))), k, tuple(history))


# --- NMI ---------------------------------------------------------------------


def _entropy(counts: Sequence[int], n: int) -> float:
    # sorted so the float sum does not depend on class order
    return -math.fsum(c / n * math.log(c / n) for c in sorted(counts) if c)


def nmi(
    clusters: ClusterAssignment | Mapping[Hashable, Hashable],
    labels: Mapping[Hashable, Hashable],
) -> float:
    """Normalized mutual information, I(C;L) / sqrt(H(C) H(L)), natural log.

    Returns 0 when either partition has zero entropy.
    """
    a = clusters.labels if isinstance(clusters, ClusterAssignment) else clusters
    b = labels.labels if isinstance(labels, ClusterAssignment) else labels
    if not a or not b:
        raise ValueError("NMI needs non-empty inputs")
    if set(a) != set(b):
        raise ValueError("cluster assignment and labels cover different frames")
    n = len(a)
    keys = list(a)
    h_a = _entropy(list(Counter(a[key] for key in keys).values()), n)
    h_b = _entropy(list(Counter(b[key] for key in keys).values()), n)
    if h_a == 0.0 or h_b == 0.0:
        return 0.0
    h_ab = _entropy(list(Counter((a[key], b[key]) for key in keys).values()), n)
    mi = h_a + h_b - h_ab
    return min(1.0, max(0.0, mi / math.sqrt(h_a * h_b)))
