"""Scoring backends.

Every scorer turns a batch of texts into one positive-class probability per
text, order preserved. The constant and lexicon scorers have no dependencies
beyond the standard library so the contract can be exercised anywhere; real
model hosting lives in TransformerScorer and needs the ``transformer`` extra.
"""

from __future__ import annotations

import json
from pathlib import Path


class AdapterError(Exception):
    """Configuration or model loading failure."""


class ConstantScorer:
    """Returns the same probability for every text. Conformance stub."""

    def __init__(self, probability: float):
        if not isinstance(probability, (int, float)) or isinstance(probability, bool):
            raise AdapterError(f"constant probability must be a number, got {probability!r}")
        p = float(probability)
        if not 0.0 <= p <= 1.0:
            raise AdapterError(f"constant probability must be in [0, 1], got {p}")
        self.probability = p

    def describe(self) -> dict:
        return {"scorer": "constant", "probability": self.probability}

    def score_batch(self, texts: list[str]) -> list[float]:
        return [self.probability] * len(texts)


class LexiconScorer:
    """Averages per-token confidences from a JSON lexicon.

    The lexicon maps lowercase tokens to positive-class confidences in
    [0, 1]. A text scores the mean confidence of its known tokens; texts
    with no known token score 0.5.
    """

    def __init__(self, lexicon: dict[str, float]):
        if not isinstance(lexicon, dict) or not lexicon:
            raise AdapterError("lexicon must be a non-empty object of token -> confidence")
        for token, value in lexicon.items():
            if not isinstance(token, str):
                raise AdapterError(f"lexicon token {token!r} is not a string")
            if isinstance(value, bool) or not isinstance(value, (int, float)) or not 0.0 <= value <= 1.0:
                raise AdapterError(f"confidence for {token!r} must be a number in [0, 1], got {value!r}")
        self.lexicon = {token.lower(): float(value) for token, value in lexicon.items()}

    @classmethod
    def from_file(cls, path: str | Path) -> "LexiconScorer":
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError as exc:
            raise AdapterError(f"lexicon file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise AdapterError(f"lexicon file {path} is not valid JSON: {exc}") from exc
        return cls(data)

    def describe(self) -> dict:
        return {"scorer": "lexicon", "n_tokens": len(self.lexicon)}

    def score_one(self, text: str) -> float:
        known = [self.lexicon[t] for t in text.lower().split() if t in self.lexicon]
        if not known:
            return 0.5
        return sum(known) / len(known)

    def score_batch(self, texts: list[str]) -> list[float]:
        return [self.score_one(text) for text in texts]


class TransformerScorer:
    """Hosts a fine-tuned binary sequence classifier. Optional extra."""

    def __init__(self, model: str, device: str = "cpu"):
        try:
            from transformers import pipeline
        except ImportError as exc:
            raise AdapterError(
                "transformers is not installed; install the 'transformer' extra to host real models"
            ) from exc
        try:
            self._pipe = pipeline(
                "text-classification", model=model, device=device, top_k=None, truncation=True
            )
        except Exception as exc:
            raise AdapterError(f"cannot load model {model!r}: {exc}") from exc
        self.model = model
        self.device = device

    def describe(self) -> dict:
        return {"scorer": "transformer", "model": self.model, "device": self.device}

    def score_batch(self, texts: list[str]) -> list[float]:
        results = self._pipe(list(texts))
        out = []
        for scores in results:
            # one positive-class probability per text; last label wins the
            # tie when names are unrecognizable
            by_label = {entry["label"].lower(): float(entry["score"]) for entry in scores}
            for key in ("positive", "label_1", "1", "pos"):
                if key in by_label:
                    out.append(by_label[key])
                    break
            else:
                out.append(float(scores[-1]["score"]))
        return out
