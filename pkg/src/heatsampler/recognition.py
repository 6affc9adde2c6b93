"""Keyword-bag caption matching and recognition metrics.

Captions come from an external captioning model and are matched against a
bag of keyword phrases per activity. A caption may match several activities;
it counts as correct when the ground-truth activity is among them.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import unicodedata
from collections import Counter
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

KeywordMap = dict[str, list[str]]


class ConfigurationError(ValueError):
    """A caption's ground truth is not an activity of the keyword map."""


class MissingEmbeddingError(KeyError):
    """External caption vectors have no entry for a text."""


@dataclass(frozen=True)
class CaptionRecord:
    segment_id: int
    participant_id: str
    caption: str
    ground_truth: str


@dataclass(frozen=True)
class Scores:
    precision: float
    recall: float
    f1: float
    accuracy: float

    def to_json(self) -> dict:
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1, "accuracy": self.accuracy}


@dataclass
class PrfReport:
    per_class: dict[str, dict]
    macro_classes: Scores
    macro_participants: Scores
    per_participant: dict[str, Scores]
    n_records: int

    def to_json(self) -> dict:
        return {
            "n_records": self.n_records,
            "macro_over_classes": self.macro_classes.to_json(),
            "macro_over_participants": self.macro_participants.to_json(),
            "per_participant": {p: s.to_json() for p, s in sorted(self.per_participant.items())},
            "per_class": {c: self.per_class[c] for c in sorted(self.per_class)},
        }


# --- text normalization and matching ----------------------------------------


def normalize_tokens(text: str) -> list[str]:
    """Lowercase, delete punctuation, split on whitespace."""
    cleaned = "".join(
        ch for ch in text.lower() if not unicodedata.category(ch).startswith(("P", "S"))
    )
    return cleaned.split()


def load_keyword_map(path: str | Path | None = None) -> KeywordMap:
    """Read ``activity,keyword`` rows; the bundled table is used by default."""
    if path is None:
        text = resources.files("heatsampler.data").joinpath("keywords.csv").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    kmap: KeywordMap = {}
    for row in csv.DictReader(text.splitlines()):
        phrase = " ".join(normalize_tokens(row["keyword"]))
        if not phrase:
            continue
        phrases = kmap.setdefault(row["activity"].strip(), [])
        if phrase not in phrases:
            phrases.append(phrase)
    return kmap


def _contains(tokens: Sequence[str], phrase: Sequence[str]) -> bool:
    n = len(phrase)
    return any(list(tokens[i : i + n]) == list(phrase) for i in range(len(tokens) - n + 1))


def match_caption(caption: str, kmap: Mapping[str, Iterable[str]]) -> set[str]:
    tokens = normalize_tokens(caption)
    return {
        activity
        for activity, phrases in kmap.items()
        if any(_contains(tokens, phrase.split()) for phrase in phrases)
    }


# --- metrics -----------------------------------------------------------------


def _safe_div(a: float, b: float) -> float:
    return a / b if b else 0.0


def _f1(p: float, r: float) -> float:
    return _safe_div(2 * p * r, p + r)


def _class_counts(
    records: Sequence[CaptionRecord], matches: Sequence[set[str]]
) -> tuple[Counter, Counter, Counter, Counter]:
    tp, fp, fn, support = Counter(), Counter(), Counter(), Counter()
    for rec, matched in zip(records, matches):
        support[rec.ground_truth] += 1
        if rec.ground_truth in matched:
            tp[rec.ground_truth] += 1
        else:
            fn[rec.ground_truth] += 1
            for other in matched:
                fp[other] += 1
    return tp, fp, fn, support


def _macro(records: Sequence[CaptionRecord], matches: Sequence[set[str]]) -> tuple[Scores, dict[str, dict]]:
    tp, fp, fn, support = _class_counts(records, matches)
    classes = sorted(set(support) | set(fp))
    per_class = {}
    for c in classes:
        p = _safe_div(tp[c], tp[c] + fp[c])
        r = _safe_div(tp[c], tp[c] + fn[c])
        per_class[c] = {
            "precision": p,
            "recall": r,
            "f1": _f1(p, r),
            "accuracy": _safe_div(tp[c], support[c]),
            "support": support[c],
            "tp": tp[c],
            "fp": fp[c],
            "fn": fn[c],
        }
    n = len(classes)
    macro = Scores(
        sum(v["precision"] for v in per_class.values()) / n,
        sum(v["recall"] for v in per_class.values()) / n,
        sum(v["f1"] for v in per_class.values()) / n,
        # accuracy is averaged over classes that actually occur
        sum(v["accuracy"] for c, v in per_class.items() if support[c]) / len(support),
    )
    return macro, per_class


def evaluate(records: Sequence[CaptionRecord], kmap: Mapping[str, Iterable[str]]) -> PrfReport:
    """Precision, recall, F1 and accuracy, macro-averaged two ways.

    Over classes: one-vs-rest counts pooled across all records. Over
    participants: the class macro computed per participant, then averaged.
    A caption with no match is a false negative for its ground truth and no
    false positive; a caption missing its ground truth charges a false
    positive to every class it did match.
    """
    if not records:
        raise ValueError("no caption records")
    for rec in records:
        if rec.ground_truth not in kmap:
            raise ConfigurationError(f"ground truth {rec.ground_truth!r} has no keyword entry")
    matches = [match_caption(rec.caption, kmap) for rec in records]
    macro_classes, per_class = _macro(records, matches)
    per_participant: dict[str, Scores] = {}
    for pid in sorted({r.participant_id for r in records}):
        idx = [i for i, r in enumerate(records) if r.participant_id == pid]
        per_participant[pid], _ = _macro([records[i] for i in idx], [matches[i] for i in idx])
    k = len(per_participant)
    macro_participants = Scores(
        sum(s.precision for s in per_participant.values()) / k,
        sum(s.recall for s in per_participant.values()) / k,
        sum(s.f1 for s in per_participant.values()) / k,
        sum(s.accuracy for s in per_participant.values()) / k,
    )
    return PrfReport(per_class, macro_classes, macro_participants, per_participant, len(records))


def load_captions(path: str | Path) -> list[CaptionRecord]:
    out = []
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                out.append(
                    CaptionRecord(int(obj["segment"]), str(obj["participant"]), str(obj["caption"]), str(obj["truth"]))
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{Path(path).name} line {lineno}: {exc}") from None
    return out


def save_captions(records: Iterable[CaptionRecord], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        for r in records:
            row = {"segment": r.segment_id, "participant": r.participant_id, "caption": r.caption, "truth": r.ground_truth}
            fh.write(json.dumps(row) + "\n")


# --- caption similarity ------------------------------------------------------

Vectorizer = Callable[[str], np.ndarray]


def text_hash(text: str) -> str:
    """Key used by external caption-vector files: sha256 of the normalized text."""
    return hashlib.sha256(" ".join(normalize_tokens(text)).encode("utf-8")).hexdigest()


def tf_vectors(a: str, b: str) -> tuple[np.ndarray, np.ndarray]:
    ca, cb = Counter(normalize_tokens(a)), Counter(normalize_tokens(b))
    vocab = sorted(set(ca) | set(cb))
    return (
        np.array([ca[t] for t in vocab], dtype=np.float64),
        np.array([cb[t] for t in vocab], dtype=np.float64),
    )


class ExternalVectors:
    """Caption vectors read from a ``text_hash,v0..vN`` CSV."""

    def __init__(self, path: str | Path) -> None:
        self.vectors: dict[str, np.ndarray] = {}
        with Path(path).open(newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0] == "text_hash":
                    continue
                self.vectors[row[0]] = np.array([float(x) for x in row[1:]])

    def __call__(self, text: str) -> np.ndarray:
        key = text_hash(text)
        try:
            return self.vectors[key]
        except KeyError:
            raise MissingEmbeddingError(f"no vector for text {text!r} ({key[:12]})") from None


def caption_similarity(a: str, b: str, vectorizer: Vectorizer | None = None) -> float:
    """Cosine similarity of two captions.

    The default representation is unigram term frequency over normalized
    tokens, which is non-negative, so the result lies in [0, 1]. With an
    external vectorizer the cosine is clamped to [-1, 1].
    """
    if not normalize_tokens(a) or not normalize_tokens(b):
        raise ValueError("caption is empty after normalization")
    if vectorizer is None:
        va, vb = tf_vectors(a, b)
        lo = 0.0
    else:
        va, vb = np.asarray(vectorizer(a), float), np.asarray(vectorizer(b), float)
        lo = -1.0
    # one sqrt of the product keeps integer TF cases exact (identical texts -> 1.0)
    norm = math.sqrt(float(va @ va) * float(vb @ vb))
    if norm == 0:
        raise ValueError("zero caption vector")
    cos = float(va @ vb) / norm
    return min(1.0, max(lo, cos)) if math.isfinite(cos) else 0.0
