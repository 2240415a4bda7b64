"""Probability estimators behind one batch-prediction contract.

Every classifier maps a batch of normalized texts to one positive-class
probability per text, order preserved. The builtin kind scores with the
word-confidence model; the external kind bridges to a model server over
HTTP POST ``/predict`` with the body ``{"texts": [...]}`` and the response
``{"probabilities": [...]}``.
"""

from __future__ import annotations

import json
import math
import threading
from dataclasses import dataclass

import requests

from . import wordconf

DEFAULT_TIMEOUT_MS = 30000
DEFAULT_MAX_BATCH = 200
DEFAULT_MAX_ATTEMPTS = 3

KINDS = ("builtin", "external")


class ClassifierError(RuntimeError):
    """A classifier call failed or returned an invalid response."""


@dataclass(frozen=True)
class ClassifierSpec:
    kind: str
    model_path: str | None = None
    endpoint: str | None = None
    timeout_ms: int = DEFAULT_TIMEOUT_MS
    max_batch: int = DEFAULT_MAX_BATCH

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.kind == "builtin":
            if not self.model_path:
                raise ValueError("builtin classifier requires model_path")
            if self.endpoint is not None:
                raise ValueError("builtin classifier takes no endpoint")
        else:
            if not self.endpoint:
                raise ValueError("external classifier requires endpoint")
            if self.model_path is not None:
                raise ValueError("external classifier takes no model_path")
        if self.timeout_ms <= 0:
            raise ValueError(f"timeout_ms must be positive, got {self.timeout_ms}")
        if self.max_batch < 1:
            raise ValueError(f"max_batch must be >= 1, got {self.max_batch}")

    def to_dict(self) -> dict:
        out: dict = {"kind": self.kind}
        if self.kind == "builtin":
            out["model_path"] = self.model_path
        else:
            out.update(endpoint=self.endpoint, timeout_ms=self.timeout_ms, max_batch=self.max_batch)
        return out


class BuiltinClassifier:
    """Deterministic scorer backed by a word-confidence model file."""

    def __init__(self, model: wordconf.WordConfModel, model_path: str | None = None):
        self._model = model
        self._model_path = model_path

    @classmethod
    def from_path(cls, path: str) -> "BuiltinClassifier":
        return cls(wordconf.load_model(path), model_path=str(path))

    def describe(self) -> dict:
        return {"kind": "builtin", "model_path": self._model_path}

    def predict_batch(self, texts: list[str], user_ids: list[str] | None = None) -> list[float]:
        return [wordconf.score_text(self._model, t) for t in texts]


class OracleClassifier:
    """Emits the gold label as a probability; for harness validation runs."""

    def __init__(self, gold: dict[str, int]):
        self._gold = gold

    def describe(self) -> dict:
        return {"kind": "oracle"}

    def predict_batch(self, texts: list[str], user_ids: list[str] | None = None) -> list[float]:
        if user_ids is None or len(user_ids) != len(texts):
            raise ClassifierError("oracle classifier needs one user id per text")
        missing = [u for u in user_ids if u not in self._gold]
        if missing:
            raise ClassifierError(f"oracle classifier has no gold label for {missing[0]!r}")
        return [1.0 if self._gold[u] == 1 else 0.0 for u in user_ids]


_endpoint_locks: dict[str, threading.Lock] = {}
_endpoint_locks_guard = threading.Lock()


def _lock_for(endpoint: str) -> threading.Lock:
    with _endpoint_locks_guard:
        return _endpoint_locks.setdefault(endpoint, threading.Lock())


class ExternalClassifier:
    """HTTP bridge to a model server speaking the /predict contract.

    Timeouts and connection failures are retried up to ``max_attempts``
    times; any other failure (bad status, wrong response length, probability
    out of range) is fatal and nothing partial is ever returned. At most one
    request per endpoint is in flight at a time unless ``serialize`` is
    turned off.
    """

    def __init__(
        self,
        endpoint: str,
        timeout_ms: int = DEFAULT_TIMEOUT_MS,
        max_batch: int = DEFAULT_MAX_BATCH,
        max_attempts: int = DEFAULT_MAX_ATTEMPTS,
        serialize: bool = True,
    ):
        base = endpoint.rstrip("/")
        self._url = base if base.endswith("/predict") else base + "/predict"
        self._endpoint = endpoint
        self._timeout_s = timeout_ms / 1000.0
        self._timeout_ms = timeout_ms
        self._max_batch = max_batch
        self._max_attempts = max_attempts
        self._lock = _lock_for(self._url) if serialize else None
        self._http = requests.Session()

    def describe(self) -> dict:
        return {
            "kind": "external",
            "endpoint": self._endpoint,
            "timeout_ms": self._timeout_ms,
            "max_batch": self._max_batch,
        }

    def predict_batch(self, texts: list[str], user_ids: list[str] | None = None) -> list[float]:
        out: list[float] = []
        for start in range(0, len(texts), self._max_batch):
            out.extend(self._predict_chunk(texts[start : start + self._max_batch]))
        return out

    def _predict_chunk(self, texts: list[str]) -> list[float]:
        if self._lock is not None:
            with self._lock:
                response = self._post_with_retries(texts)
        else:
            response = self._post_with_retries(texts)
        return self._validated(response, len(texts))

    def _post_with_retries(self, texts: list[str]) -> requests.Response:
        last_error: Exception | None = None
        for _ in range(self._max_attempts):
            try:
                return self._http.post(self._url, json={"texts": texts}, timeout=self._timeout_s)
            except (requests.Timeout, requests.ConnectionError) as exc:
                last_error = exc
        raise ClassifierError(
            f"external classifier at {self._url} unreachable after {self._max_attempts} attempts: {last_error}"
        )

    def _validated(self, response: requests.Response, expected: int) -> list[float]:
        if response.status_code != 200:
            raise ClassifierError(f"external classifier returned HTTP {response.status_code}: {response.text[:200]}")
        try:
            payload = response.json()
        except (json.JSONDecodeError, ValueError) as exc:
            raise ClassifierError(f"external classifier returned invalid JSON: {exc}") from exc
        probabilities = payload.get("probabilities") if isinstance(payload, dict) else None
        if not isinstance(probabilities, list):
            raise ClassifierError("external classifier response is missing the probabilities array")
        if len(probabilities) != expected:
            raise ClassifierError(f"external classifier returned {len(probabilities)} probabilities for {expected} texts")
        values: list[float] = []
        for p in probabilities:
            if isinstance(p, bool) or not isinstance(p, (int, float)) or math.isnan(p) or not 0.0 <= p <= 1.0:
                # Out-of-range values are rejected, never clamped.
                raise ClassifierError(f"external classifier returned an invalid probability: {p!r}")
            values.append(float(p))
        return values


def make_classifier(spec: ClassifierSpec) -> BuiltinClassifier | ExternalClassifier:
    if spec.kind == "builtin":
        return BuiltinClassifier.from_path(spec.model_path)
    return ExternalClassifier(spec.endpoint, timeout_ms=spec.timeout_ms, max_batch=spec.max_batch)


def predict_batch(spec: ClassifierSpec, inputs: list[str]) -> list[float]:
    """One-shot convenience wrapper around make_classifier."""
    return make_classifier(spec).predict_batch(inputs)
