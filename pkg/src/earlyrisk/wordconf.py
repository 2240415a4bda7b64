"""Word-confidence model: per-class token counts with smoothed log-odds scoring.

The confidence of a token toward the positive class is::

    sigmoid( log((c_pos + s) / (T_pos + s * V)) - log((c_neg + s) / (T_neg + s * V)) )

where ``c`` is the token's count in a class, ``T`` the class token total,
``V`` the combined vocabulary size, and ``s`` the additive smoothing. A text
scores the mean of its tokens' log-odds pushed back through the sigmoid, so
a one-token text scores exactly that token's confidence. A text with no
tokens scores 0.5.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import Label, LabeledSample

DEFAULT_SMOOTHING = 1.0
DEFAULT_TOP_WORDS = 25

_POS_KEY = "pos"
_NEG_KEY = "neg"


def sigmoid(x: float) -> float:
    """Numerically stable logistic function."""
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


@dataclass
class WordConfModel:
    positive_counts: dict[str, int]
    negative_counts: dict[str, int]
    smoothing: float = DEFAULT_SMOOTHING
    positive_total: int = field(init=False)
    negative_total: int = field(init=False)
    vocabulary: list[str] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.smoothing <= 0:
            raise ValueError(f"smoothing must be positive, got {self.smoothing}")
        for counts in (self.positive_counts, self.negative_counts):
            for token, count in counts.items():
                if type(count) is not int or count < 0:
                    raise ValueError(f"count for token {token!r} must be a non-negative integer, got {count!r}")
        self.positive_total = sum(self.positive_counts.values())
        self.negative_total = sum(self.negative_counts.values())
        self.vocabulary = sorted(set(self.positive_counts) | set(self.negative_counts))
        if not self.vocabulary:
            raise ValueError("model vocabulary is empty")


@dataclass(frozen=True)
class WordScore:
    token: str
    confidence: float


def fit(samples: list[LabeledSample], smoothing: float = DEFAULT_SMOOTHING) -> WordConfModel:
    """Count whitespace tokens per class over already-normalized samples."""
    positive: dict[str, int] = {}
    negative: dict[str, int] = {}
    for sample in samples:
        if sample.label is Label.POSITIVE:
            counts = positive
        elif sample.label is Label.NEGATIVE:
            counts = negative
        else:
            raise ValueError(f"sample from user {sample.origin_user!r} has no usable label")
        for token in sample.text.split():
            counts[token] = counts.get(token, 0) + 1
    if not positive or not negative:
        raise ValueError("training needs at least one sample with tokens per class")
    return WordConfModel(positive, negative, smoothing)


def _log_odds(model: WordConfModel, token: str) -> float:
    s = model.smoothing
    v = len(model.vocabulary)
    p = (model.positive_counts.get(token, 0) + s) / (model.positive_total + s * v)
    q = (model.negative_counts.get(token, 0) + s) / (model.negative_total + s * v)
    return math.log(p) - math.log(q)


def confidence(model: WordConfModel, token: str) -> float:
    """Confidence in (0, 1) that ``token`` signals the positive class."""
    return sigmoid(_log_odds(model, token))


def score_text(model: WordConfModel, text: str) -> float:
    """Positive-class probability for a normalized text; 0.5 when empty."""
    tokens = text.split()
    if not tokens:
        return 0.5
    return sigmoid(sum(_log_odds(model, t) for t in tokens) / len(tokens))


def extract_vocabulary(model: WordConfModel, k: int = DEFAULT_TOP_WORDS) -> list[WordScore]:
    """The k highest-confidence tokens, ties broken lexicographically."""
    v = len(model.vocabulary)
    if not 1 <= k <= v:
        raise ValueError(f"k must be between 1 and the vocabulary size {v}, got {k}")
    scored = [WordScore(t, confidence(model, t)) for t in model.vocabulary]
    scored.sort(key=lambda ws: (-ws.confidence, ws.token))
    return scored[:k]


def validation_f1_positive(model: WordConfModel, samples: list[LabeledSample], threshold: float = 0.5) -> float | None:
    """Positive-class F1 of thresholded scores over held-out samples.

    Returns None for an empty sample list. Zero denominators score 0.
    """
    if not samples:
        return None
    tp = fp = fn = 0
    for sample in samples:
        predicted = score_text(model, sample.text) > threshold
        actual = sample.label is Label.POSITIVE
        if predicted and actual:
            tp += 1
        elif predicted and not actual:
            fp += 1
        elif actual:
            fn += 1
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    return 2 * precision * recall / (precision + recall) if precision + recall else 0.0


def save_model(model: WordConfModel, path: str | Path) -> None:
    payload = {
        "smoothing": model.smoothing,
        "classes": {_POS_KEY: model.positive_counts, _NEG_KEY: model.negative_counts},
    }
    Path(path).write_text(json.dumps(payload, ensure_ascii=False, sort_keys=True), encoding="utf-8")


def load_model(path: str | Path) -> WordConfModel:
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ValueError(f"model file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ValueError(f"model file {path} is not valid JSON: {exc}") from exc
    try:
        smoothing = payload["smoothing"]
        classes = payload["classes"]
        positive = classes[_POS_KEY]
        negative = classes[_NEG_KEY]
    except (TypeError, KeyError) as exc:
        raise ValueError(f"model file {path} is missing field {exc}") from exc
    if not isinstance(positive, dict) or not isinstance(negative, dict):
        raise ValueError(f"model file {path} class counts must be JSON objects")
    if not isinstance(smoothing, (int, float)) or isinstance(smoothing, bool):
        raise ValueError(f"model file {path} smoothing must be a number")
    return WordConfModel(positive, negative, float(smoothing))
