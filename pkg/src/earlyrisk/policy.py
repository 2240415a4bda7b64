"""Historic decision rule: turn a per-user probability stream into one alarm.

At round r with current probability p, the rule fires when all three hold:

* more than ``min_delay`` predictions have been made (the current one counts),
* p is strictly above ``threshold``,
* at least ``tolerance_t`` of the predictions in the window are strictly
  above ``threshold``, where the window is the whole history when
  ``m_window`` is "all" and the last m predictions (current included)
  otherwise.

Once fired the decision is final; feeding further predictions is an error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

WINDOW_ALL = "all"


class Action(Enum):
    CONTINUE = "continue"
    ALARM = "alarm"


@dataclass(frozen=True)
class PolicyConfig:
    m_window: int | str = WINDOW_ALL
    tolerance_t: int = 1
    threshold: float = 0.5
    min_delay: int = 0

    def __post_init__(self) -> None:
        if self.m_window != WINDOW_ALL and (type(self.m_window) is not int or self.m_window < 1):
            raise ValueError(f"m_window must be 'all' or a positive integer, got {self.m_window!r}")
        if type(self.tolerance_t) is not int or self.tolerance_t < 1:
            raise ValueError(f"tolerance_t must be an integer >= 1, got {self.tolerance_t!r}")
        if not 0.0 < self.threshold < 1.0:
            raise ValueError(f"threshold must be in (0, 1), got {self.threshold!r}")
        if type(self.min_delay) is not int or self.min_delay < 0:
            raise ValueError(f"min_delay must be an integer >= 0, got {self.min_delay!r}")

    def to_dict(self) -> dict:
        return {
            "m_window": self.m_window,
            "tolerance_t": self.tolerance_t,
            "threshold": self.threshold,
            "min_delay": self.min_delay,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PolicyConfig":
        if not isinstance(data, dict):
            raise ValueError("policy config must be a JSON object")
        unknown = set(data) - {"m_window", "tolerance_t", "threshold", "min_delay"}
        if unknown:
            raise ValueError(f"unknown policy config fields: {sorted(unknown)}")
        return cls(**data)


PRESETS = {
    "historic_rule_t1": PolicyConfig(m_window=WINDOW_ALL, tolerance_t=5, threshold=0.7, min_delay=5),
    "historic_rule_t2": PolicyConfig(m_window=WINDOW_ALL, tolerance_t=10, threshold=0.7, min_delay=10),
}


@dataclass
class PolicyState:
    history: list[float] = field(default_factory=list)
    decided: bool = False
    decision_round: int | None = None


def _fires(window: list[float], current: float, n_predictions: int, config: PolicyConfig) -> bool:
    # Pure firing condition: depends only on the exceedance count in the
    # window, the current value, and how many predictions exist, so it is
    # invariant under permutations of the earlier window entries.
    if n_predictions <= config.min_delay:
        return False
    if not current > config.threshold:
        return False
    above = sum(1 for v in window if v > config.threshold)
    return above >= config.tolerance_t


def policy_step(state: PolicyState, config: PolicyConfig, p: float, round_number: int) -> Action:
    """Consume one probability and decide whether to alarm at this round."""
    if state.decided:
        raise RuntimeError(f"policy already decided at round {state.decision_round}, no further predictions accepted")
    if round_number != len(state.history) + 1:
        raise ValueError(f"round {round_number} out of sequence, expected {len(state.history) + 1}")
    if isinstance(p, bool) or not isinstance(p, (int, float)) or math.isnan(p) or not 0.0 <= p <= 1.0:
        raise ValueError(f"probability must be in [0, 1], got {p!r}")
    state.history.append(float(p))
    window = state.history if config.m_window == WINDOW_ALL else state.history[-config.m_window :]
    if _fires(window, float(p), len(state.history), config):
        state.decided = True
        state.decision_round = round_number
        return Action.ALARM
    return Action.CONTINUE


def finalize(state: PolicyState, total_rounds: int) -> tuple[int, int]:
    """Final (decision, delay) once a user's stream is exhausted.

    An alarmed user is positive with delay = the alarm round; anyone else is
    negative with delay = the number of predictions made.
    """
    if state.decided:
        return 1, state.decision_round
    if not state.history:
        raise ValueError("cannot finalize a user with no predictions")
    if len(state.history) > total_rounds:
        raise ValueError(f"{len(state.history)} predictions exceed the {total_rounds}-round stream")
    return 0, len(state.history)
