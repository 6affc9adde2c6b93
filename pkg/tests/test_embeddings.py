from __future__ import annotations

import math

import numpy as np
import pytest

from heatsampler.embeddings import (
    ClusterAssignment,
    DegenerateEmbeddingError,
    Embedding,
    embed_array,
    embed_blockmean,
    kmeans,
    load_embeddings,
    nmi,
    save_assignment,
    save_embeddings,
)
from heatsampler.frames import ThermalFrame
from oracles import nmi_oracle


def _frame(temps):
    return ThermalFrame(0, np.asarray(temps, dtype=float))


def test_single_hot_block():
    temps = np.full((24, 32), 20.0)
    temps[0:3, 0:4] = 50.0  # one 4x3 block
    v = embed_blockmean(_frame(temps)).values
    assert (v > 0).sum() == 1
    neg = v[v < 0]
    assert len(neg) == 63 and np.ptp(neg) == 0
    assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-12)


def test_constant_frame_is_degenerate():
    with pytest.raises(DegenerateEmbeddingError):
        embed_blockmean(_frame(np.full((24, 32), 25.0)))


def test_untileable_frame():
    with pytest.raises(ValueError):
        embed_blockmean(_frame(np.arange(30 * 20, dtype=float).reshape(20, 30)))


def test_offset_and_scale_invariance(rng):
    temps = rng.normal(25, 3, size=(24, 32))
    base = embed_blockmean(_frame(temps)).values
    assert np.allclose(embed_blockmean(_frame(temps + 5.0)).values, base, atol=1e-12)
    mean = temps.mean()
    assert np.allclose(embed_blockmean(_frame(mean + 2.5 * (temps - mean))).values, base, atol=1e-12)


def test_vectorized_matches_per_frame(rng):
    stack = rng.normal(25, 3, size=(5, 24, 32))
    batch = embed_array(stack)
    for k in range(5):
        assert np.allclose(batch[k], embed_blockmean(_frame(stack[k])).values)


def test_embedding_requires_unit_norm():
    with pytest.raises(ValueError):
        Embedding(0, np.full(64, 1.0))


# --- csv ingestion ----------------------------------------------------------


def _write(path, rows):
    path.write_text("".join(",".join(str(x) for x in r) + "\n" for r in rows))


def test_load_normalizes(tmp_path):
    unit = [1.0] + [0.0] * 63
    three_four = [3.0, 4.0] + [0.0] * 62
    _write(tmp_path / "e.csv", [[7, *unit], [8, *three_four]])
    out = load_embeddings(tmp_path / "e.csv")
    assert np.array_equal(out[7].values, unit)
    assert out[8].values[:2].tolist() == pytest.approx([0.6, 0.8])


def test_load_zero_row(tmp_path):
    _write(tmp_path / "e.csv", [[1, *([0.0] * 64)]])
    with pytest.raises(DegenerateEmbeddingError):
        load_embeddings(tmp_path / "e.csv")


@pytest.mark.parametrize("row", [[1, *([1.0] * 10)], [1, "nan", *([1.0] * 63)]])
def test_load_bad_rows(tmp_path, row):
    _write(tmp_path / "e.csv", [row])
    with pytest.raises(ValueError):
        load_embeddings(tmp_path / "e.csv")


def test_save_load_round_trip(tmp_path, rng):
    vecs = embed_array(rng.normal(25, 3, size=(4, 24, 32)))
    embs = {i: Embedding(i, v) for i, v in enumerate(vecs)}
    save_embeddings(embs, tmp_path / "e.csv")
    back = load_embeddings(tmp_path / "e.csv")
    assert all(np.allclose(back[i].values, embs[i].values, atol=1e-15) for i in embs)


# --- k-means ----------------------------------------------------------------


def _embs(points):
    out = []
    for i, p in enumerate(points):
        v = np.zeros(64)
        v[: len(p)] = p
        out.append(Embedding(i, v / np.linalg.norm(v)))
    return out


def _blobs(rng, n=10):
    a = rng.normal([1, 0, 0], 0.02, size=(n, 3))
    b = rng.normal([0, 1, 0], 0.02, size=(n, 3))
    return _embs(np.vstack([a, b]))


def test_k_equals_n(rng):
    embs = _blobs(rng, 3)
    res = kmeans(embs, len(embs), seed=0)
    assert len(set(res.labels.values())) == len(embs)
    assert res.objective_history[-1] == pytest.approx(0.0, abs=1e-20)


def test_k_one(rng):
    res = kmeans(_blobs(rng), 1, seed=0)
    assert set(res.labels.values()) == {0}


def test_k_larger_than_n(rng):
    with pytest.raises(ValueError):
        kmeans(_blobs(rng, 2), 5)


def test_two_blobs_match_brute_force_partition(rng):
    embs = _blobs(rng)
    x = np.stack([e.values for e in embs])[:, :3]  # remaining components are zero
    n = len(x)
    res = kmeans(embs, 2, seed=3)

    # every 2-partition with the last point fixed on side 0
    bits = ((np.arange(1, 2 ** (n - 1))[:, None] >> np.arange(n - 1)) & 1).astype(np.float64)
    bits = np.hstack([bits, np.zeros((len(bits), 1))])
    sq = (x**2).sum(axis=1)
    n1 = bits.sum(axis=1)
    s1 = bits @ x
    s0 = x.sum(axis=0) - s1
    obj = sq.sum() - (s1**2).sum(axis=1) / n1 - (s0**2).sum(axis=1) / (n - n1)
    best = bits[obj.argmin()].astype(bool)

    got = np.array([res.labels[e.frame_id] != res.labels[embs[-1].frame_id] for e in embs])
    assert np.array_equal(got, best)
    assert len({res.labels[i] for i in range(10)}) == 1
    assert res.labels[0] != res.labels[10]


def test_kmeans_deterministic_and_monotone(rng):
    embs = _embs(rng.normal(size=(60, 8)))
    a, b = kmeans(embs, 4, seed=9), kmeans(embs, 4, seed=9)
    assert a == b
    hist = a.objective_history
    assert all(y <= x + 1e-12 for x, y in zip(hist, hist[1:]))


def test_save_assignment(tmp_path):
    save_assignment(ClusterAssignment({2: 1, 1: 0}, 2), tmp_path / "a.csv")
    assert (tmp_path / "a.csv").read_text() == "frame_id,cluster\n1,0\n2,1\n"


# --- NMI --------------------------------------------------------------------


def test_nmi_identical_is_one():
    labels = {i: "abc"[i % 3] for i in range(30)}
    assert nmi(labels, labels) == 1.0


def test_nmi_single_cluster_is_zero():
    labels = {i: "ab"[i % 2] for i in range(10)}
    assert nmi({i: 0 for i in range(10)}, labels) == 0.0


def test_nmi_2x2_table():
    clusters = dict(enumerate([0, 0, 1, 1]))
    labels = dict(enumerate("aaab"))
    h_c = math.log(2)
    h_l = -(0.75 * math.log(0.75) + 0.25 * math.log(0.25))
    # joint: (0,a)=2, (1,a)=1, (1,b)=1
    h_j = -(0.5 * math.log(0.5) + 2 * 0.25 * math.log(0.25))
    expected = (h_c + h_l - h_j) / math.sqrt(h_c * h_l)
    assert nmi(clusters, labels) == pytest.approx(expected, abs=1e-12)
    assert nmi(clusters, labels) == pytest.approx(nmi_oracle(clusters, labels), abs=1e-12)


def test_nmi_errors():
    with pytest.raises(ValueError):
        nmi({}, {})
    with pytest.raises(ValueError):
        nmi({0: 1}, {1: 1})


def test_nmi_accepts_assignment():
    a = ClusterAssignment({0: 0, 1: 1, 2: 1}, 2)
    assert nmi(a, {0: "x", 1: "y", 2: "y"}) == 1.0
