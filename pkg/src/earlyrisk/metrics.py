"""Classification and latency scoring for finalized early-detection runs.

Each user contributes one final decision (0 or 1) and a delay, the number of
posts seen when the decision became final. Beyond the usual accuracy and
macro-averaged precision/recall/F1, two latency-aware scores are reported:

* ``erde(o)``: the mean per-user cost where a true negative costs 0, a false
  positive costs ``c_fp`` (defaulting to the positive prevalence in gold), a
  false negative costs 1, and a true positive costs
  ``1 - 1 / (1 + exp(delay - o))``, so alarms after ``o`` posts approach the
  cost of a miss.
* latency-weighted F1: the positive-class F1 multiplied by the median true
  positive speed ``1 - penalty(delay)`` with
  ``penalty(k) = -1 + 2 / (1 + exp(-p * (k - 1)))``, so a delay of one post
  has no penalty.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass

DEFAULT_ERDE_O = (5, 30, 50)
DEFAULT_SPEED_PENALTY = 0.0078


@dataclass(frozen=True)
class FinalDecision:
    user_id: str
    decision: int
    delay: int

    def __post_init__(self) -> None:
        if self.decision not in (0, 1):
            raise ValueError(f"decision for {self.user_id!r} must be 0 or 1, got {self.decision!r}")
        if type(self.delay) is not int or self.delay < 1:
            raise ValueError(f"delay for {self.user_id!r} must be a positive integer, got {self.delay!r}")


@dataclass(frozen=True)
class ClassificationScores:
    accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    f1_positive: float


@dataclass(frozen=True)
class LatencyScores:
    latency_tp: float | None
    speed: float | None
    latency_weighted_f1: float


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    f1_positive: float
    erde: dict[int, float]
    latency_tp: float | None
    speed: float | None
    latency_weighted_f1: float

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "macro_f1": self.macro_f1,
            "f1_positive": self.f1_positive,
            "erde": {str(o): v for o, v in self.erde.items()},
            "latency_tp": self.latency_tp,
            "speed": self.speed,
            "latency_weighted_f1": self.latency_weighted_f1,
        }


def _logistic(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def _validate(decisions: list[FinalDecision], gold: dict[str, int]) -> None:
    ids = [d.user_id for d in decisions]
    if len(set(ids)) != len(ids):
        duplicates = sorted({u for u in ids if ids.count(u) > 1})
        raise ValueError(f"duplicate decisions for users: {duplicates}")
    for user_id, label in gold.items():
        if label not in (0, 1):
            raise ValueError(f"gold label for {user_id!r} must be 0 or 1, got {label!r}")
    if set(ids) != set(gold):
        missing = sorted(set(gold) - set(ids))
        extra = sorted(set(ids) - set(gold))
        raise ValueError(f"decisions and gold cover different users (missing={missing}, extra={extra})")
    if not decisions:
        raise ValueError("no decisions to score")


def _counts(decisions: list[FinalDecision], gold: dict[str, int]) -> tuple[int, int, int, int]:
    tp = fp = fn = tn = 0
    for d in decisions:
        actual = gold[d.user_id]
        if d.decision == 1 and actual == 1:
            tp += 1
        elif d.decision == 1:
            fp += 1
        elif actual == 1:
            fn += 1
        else:
            tn += 1
    return tp, fp, fn, tn


def _prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    # Zero denominators score 0 rather than raising.
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def classification_report(decisions: list[FinalDecision], gold: dict[str, int]) -> ClassificationScores:
    """Accuracy plus macro precision/recall/F1 over the two classes."""
    _validate(decisions, gold)
    tp, fp, fn, tn = _counts(decisions, gold)
    p_pos, r_pos, f1_pos = _prf(tp, fp, fn)
    p_neg, r_neg, f1_neg = _prf(tn, fn, fp)
    return ClassificationScores(
        accuracy=(tp + tn) / len(decisions),
        macro_precision=(p_pos + p_neg) / 2,
        macro_recall=(r_pos + r_neg) / 2,
        macro_f1=(f1_pos + f1_neg) / 2,
        f1_positive=f1_pos,
    )


def erde(decisions: list[FinalDecision], gold: dict[str, int], o: int, c_fp: float | None = None) -> float:
    """Early risk detection error with deadline ``o``: mean per-user cost."""
    _validate(decisions, gold)
    if type(o) is not int or o < 1:
        raise ValueError(f"o must be a positive integer, got {o!r}")
    if c_fp is None:
        positives = sum(gold.values())
        if positives == 0:
            raise ValueError("gold has no positive users, pass c_fp explicitly")
        c_fp = positives / len(gold)
    elif not 0.0 < c_fp <= 1.0:
        raise ValueError(f"c_fp must be in (0, 1], got {c_fp!r}")
    total = 0.0
    for d in decisions:
        actual = gold[d.user_id]
        if d.decision == 1 and actual == 1:
            total += _logistic(d.delay - o)
        elif d.decision == 1:
            total += c_fp
        elif actual == 1:
            total += 1.0
    return total / len(decisions)


def latency_weighted_f1(
    decisions: list[FinalDecision],
    gold: dict[str, int],
    p_penalty: float = DEFAULT_SPEED_PENALTY,
) -> LatencyScores:
    """Median true-positive latency and speed, and speed-discounted F1.

    With no true positives the latency and speed are absent and the score
    is 0. Medians interpolate (mean of the two middle values).
    """
    _validate(decisions, gold)
    if not p_penalty > 0:
        raise ValueError(f"p_penalty must be positive, got {p_penalty!r}")
    f1_pos = classification_report(decisions, gold).f1_positive
    tp_delays = [d.delay for d in decisions if d.decision == 1 and gold[d.user_id] == 1]
    if not tp_delays:
        return LatencyScores(latency_tp=None, speed=None, latency_weighted_f1=0.0)
    speeds = [1.0 - (-1.0 + 2.0 / (1.0 + math.exp(-p_penalty * (k - 1)))) for k in tp_delays]
    speed = statistics.median(speeds)
    return LatencyScores(
        latency_tp=float(statistics.median(tp_delays)),
        speed=speed,
        latency_weighted_f1=f1_pos * speed,
    )


def full_report(
    decisions: list[FinalDecision],
    gold: dict[str, int],
    erde_o: tuple[int, ...] = DEFAULT_ERDE_O,
    c_fp: float | None = None,
    p_penalty: float = DEFAULT_SPEED_PENALTY,
) -> MetricsReport:
    """All classification and latency scores in one report."""
    scores = classification_report(decisions, gold)
    latency = latency_weighted_f1(decisions, gold, p_penalty)
    return MetricsReport(
        accuracy=scores.accuracy,
        macro_precision=scores.macro_precision,
        macro_recall=scores.macro_recall,
        macro_f1=scores.macro_f1,
        f1_positive=scores.f1_positive,
        erde={o: erde(decisions, gold, o, c_fp) for o in erde_o},
        latency_tp=latency.latency_tp,
        speed=latency.speed,
        latency_weighted_f1=latency.latency_weighted_f1,
    )
