"""Participant-side round loop.

Each round the client fetches the active users' new posts, appends the
normalized text to each user's history, scores a sliding window of the last
``n_window`` posts for every still-undecided user, steps the decision policy,
and submits one decision per active user (decided users keep their sticky 1
without another classifier call unless ``predict_after_alarm`` is on). The
whole run is captured in a RunRecord that is re-persisted after every round,
so an interrupted run still leaves a scoreable partial record.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import requests

from . import server as mock_server
from .corpus import Corpus
from .metrics import FinalDecision, MetricsReport, full_report
from .policy import Action, PolicyConfig, PolicyState, finalize, policy_step
from .preprocess import normalize

DEFAULT_POSTS_WINDOW = 10


class ProtocolError(RuntimeError):
    """The server interaction failed or broke the round protocol."""


def build_input(history: list[str], n_window: int = DEFAULT_POSTS_WINDOW) -> str:
    """Join the last ``n_window`` normalized posts, oldest first."""
    if type(n_window) is not int or n_window < 1:
        raise ValueError(f"n_window must be a positive integer, got {n_window!r}")
    if not history:
        raise ValueError("cannot build classifier input from an empty history")
    return " ".join(history[-n_window:])


@dataclass
class TrajectoryPoint:
    round: int
    p_positive: float | None
    emitted_decision: int


@dataclass
class UserRun:
    trajectory: list[TrajectoryPoint] = field(default_factory=list)
    decision: int | None = None
    delay: int | None = None


@dataclass
class RunRecord:
    task: str
    token: str
    n_window: int
    policy: dict
    classifier: dict
    users: dict[str, UserRun] = field(default_factory=dict)
    round_durations_s: list[float] = field(default_factory=list)
    completed: bool = False

    def final_decisions(self) -> list[FinalDecision]:
        """One FinalDecision per user; partial runs score their provisional state."""
        out = []
        for user_id, user in self.users.items():
            if user.decision is not None and user.delay is not None:
                out.append(FinalDecision(user_id, user.decision, user.delay))
                continue
            flagged = [pt.round for pt in user.trajectory if pt.emitted_decision == 1]
            if flagged:
                out.append(FinalDecision(user_id, 1, flagged[0]))
            else:
                out.append(FinalDecision(user_id, 0, len(user.trajectory)))
        return out

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "token": self.token,
            "n_window": self.n_window,
            "policy": self.policy,
            "classifier": self.classifier,
            "completed": self.completed,
            "round_durations_s": self.round_durations_s,
            "users": {
                user_id: {
                    "trajectory": [
                        {"round": pt.round, "p_positive": pt.p_positive, "emitted_decision": pt.emitted_decision}
                        for pt in user.trajectory
                    ],
                    "decision": user.decision,
                    "delay": user.delay,
                }
                for user_id, user in self.users.items()
            },
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RunRecord":
        record = cls(
            task=data["task"],
            token=data["token"],
            n_window=data["n_window"],
            policy=data["policy"],
            classifier=data["classifier"],
            completed=data.get("completed", False),
            round_durations_s=list(data.get("round_durations_s", [])),
        )
        for user_id, raw in data.get("users", {}).items():
            record.users[user_id] = UserRun(
                trajectory=[
                    TrajectoryPoint(pt["round"], pt["p_positive"], pt["emitted_decision"])
                    for pt in raw.get("trajectory", [])
                ],
                decision=raw.get("decision"),
                delay=raw.get("delay"),
            )
        return record

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), ensure_ascii=False, indent=2), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "RunRecord":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _describe(classifier: object) -> dict:
    describe = getattr(classifier, "describe", None)
    if callable(describe):
        return describe()
    return {"kind": type(classifier).__name__}


def _get_json(http: requests.Session, url: str) -> dict:
    try:
        response = http.get(url)
    except requests.RequestException as exc:
        raise ProtocolError(f"GET {url} failed: {exc}") from exc
    if response.status_code != 200:
        raise ProtocolError(f"GET {url} returned HTTP {response.status_code}: {response.text[:200]}")
    try:
        data = response.json()
    except ValueError as exc:
        raise ProtocolError(f"GET {url} returned invalid JSON") from exc
    if not isinstance(data, dict):
        raise ProtocolError(f"GET {url} returned a non-object payload")
    return data


def _post_submission(http: requests.Session, url: str, payload: dict) -> None:
    try:
        response = http.post(url, json=payload)
    except requests.RequestException as exc:
        raise ProtocolError(f"POST {url} failed: {exc}") from exc
    if response.status_code != 200:
        raise ProtocolError(f"submission rejected with HTTP {response.status_code}: {response.text[:200]}")
    try:
        data = response.json()
    except ValueError as exc:
        raise ProtocolError("submission response is not valid JSON") from exc
    if data.get("status") != "ok":
        raise ProtocolError(f"submission not acknowledged: {data!r}")


def run(
    server_url: str,
    token: str,
    task: str,
    classifier: object,
    policy_config: PolicyConfig,
    n_window: int = DEFAULT_POSTS_WINDOW,
    out_path: str | Path | None = None,
    predict_after_alarm: bool = False,
) -> RunRecord:
    """Drive one full evaluation session against a round server.

    ``classifier`` is any object with ``predict_batch(texts, user_ids=None)``.
    Every served post yields exactly one trajectory entry; after a user's
    alarm the probability is absent unless ``predict_after_alarm`` is set.
    """
    record = RunRecord(
        task=task,
        token=token,
        n_window=n_window,
        policy=policy_config.to_dict(),
        classifier=_describe(classifier),
    )
    states: dict[str, PolicyState] = {}
    histories: dict[str, list[str]] = {}
    base = server_url.rstrip("/")
    http = requests.Session()
    try:
        while True:
            data = _get_json(http, f"{base}/{task}/getmessages/{token}")
            if data.get("terminal"):
                break
            round_number = data.get("round")
            if type(round_number) is not int or round_number != len(record.round_durations_s) + 1:
                raise ProtocolError(f"server sent round {round_number!r}, expected {len(record.round_durations_s) + 1}")
            messages = data.get("messages")
            if not isinstance(messages, list) or not messages:
                raise ProtocolError(f"round {round_number} has no messages but is not terminal")
            started = time.monotonic()

            round_users: list[str] = []
            for item in messages:
                if not isinstance(item, dict) or not isinstance(item.get("nick"), str) or not isinstance(item.get("message"), str):
                    raise ProtocolError(f"round {round_number} has a malformed message item: {item!r}")
                nick = item["nick"]
                if nick in round_users:
                    raise ProtocolError(f"round {round_number} lists user {nick!r} twice")
                round_users.append(nick)
                histories.setdefault(nick, []).append(normalize(item["message"]))
                states.setdefault(nick, PolicyState())

            to_score = [u for u in round_users if predict_after_alarm or not states[u].decided]
            probabilities: dict[str, float] = {}
            if to_score:
                texts = [build_input(histories[u], n_window) for u in to_score]
                values = classifier.predict_batch(texts, user_ids=list(to_score))
                probabilities = dict(zip(to_score, values))

            decisions = []
            for nick in round_users:
                state = states[nick]
                if state.decided:
                    emitted = 1
                    p = probabilities.get(nick)
                else:
                    p = probabilities[nick]
                    # The policy counts per-user predictions; with one post per
                    # active user per round this equals the round number.
                    action = policy_step(state, policy_config, p, len(histories[nick]))
                    emitted = 1 if action is Action.ALARM else 0
                record.users.setdefault(nick, UserRun()).trajectory.append(TrajectoryPoint(round_number, p, emitted))
                decisions.append({"nick": nick, "decision": emitted})

            _post_submission(http, f"{base}/{task}/submit/{token}", {"round": round_number, "decisions": decisions})
            record.round_durations_s.append(time.monotonic() - started)
            if out_path is not None:
                record.save(out_path)

        total_rounds = len(record.round_durations_s)
        for nick, state in states.items():
            decision, delay = finalize(state, total_rounds)
            record.users[nick].decision = decision
            record.users[nick].delay = delay
        record.completed = True
        if out_path is not None:
            record.save(out_path)
        return record
    except Exception:
        # Keep whatever was recorded so the partial run can be inspected.
        if out_path is not None:
            record.save(out_path)
        raise
    finally:
        http.close()


def simulate(
    corpus: Corpus,
    classifier: object,
    policy_config: PolicyConfig,
    n_window: int = DEFAULT_POSTS_WINDOW,
    out_dir: str | Path | None = None,
    gold: dict[str, int] | None = None,
    token: str = "simulation",
    predict_after_alarm: bool = False,
) -> tuple[RunRecord, MetricsReport | None]:
    """Run server and client over loopback in one process, then score.

    Gold labels default to the corpus labels; with unlabeled users and no
    explicit gold the metrics are skipped and the report is None. With
    ``out_dir`` set, the run record, metrics, and per-round server snapshots
    are written beneath it.
    """
    out_dir = Path(out_dir) if out_dir is not None else None
    run_path = None
    runs_dir = None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        run_path = out_dir / "run.json"
        runs_dir = out_dir / "server_runs"
    handle = mock_server.serve(corpus, runs_dir=runs_dir)
    try:
        record = run(
            handle.base_url,
            token,
            corpus.task_id,
            classifier,
            policy_config,
            n_window=n_window,
            out_path=run_path,
            predict_after_alarm=predict_after_alarm,
        )
    finally:
        handle.stop()
    if gold is None:
        labels = corpus.gold_labels()
        gold = labels if len(labels) == len(corpus.users) else None
    report = full_report(record.final_decisions(), gold) if gold else None
    if out_dir is not None and report is not None:
        (out_dir / "metrics.json").write_text(
            json.dumps(report.to_dict(), ensure_ascii=False, indent=2), encoding="utf-8"
        )
    return record, report
