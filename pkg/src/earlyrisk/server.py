"""Mock round-based evaluation server.

The server replays a corpus one post per user per round over two endpoints:

* ``GET /{task}/getmessages/{token}``: the current round's batch, one
  ``{"nick", "message"}`` item per still-active user. Idempotent until the
  round is submitted. After the final round it returns an empty batch with
  ``"terminal": true``.
* ``POST /{task}/submit/{token}``: ``{"round": r, "decisions": [{"nick",
  "decision"}, ...]}`` with one 0/1 decision per active user. A valid
  submission advances the session to the next round.

Decisions are sticky: a user submitted as 1 must stay 1 for the rest of the
run. Total rounds equal the maximum post count over users; users with fewer
posts drop out of later batches. Every accepted submission is also written
to ``runs_dir/{token}/round_{r}.json`` so an interrupted run can be scored
from disk.
"""

from __future__ import annotations

import json
import logging
import re
import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from .corpus import Corpus
from .metrics import FinalDecision

log = logging.getLogger(__name__)

_TOKEN_RE = re.compile(r"^[A-Za-z0-9._-]+$")


@dataclass
class Session:
    token: str
    current_round: int = 1
    awaiting_submission: bool = False
    submissions: dict[int, dict[str, int]] = field(default_factory=dict)
    first_flagged: dict[str, int] = field(default_factory=dict)
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)


class MockServer:
    """Protocol state machine, independent of the HTTP transport."""

    def __init__(self, corpus: Corpus, runs_dir: str | Path | None = None):
        self.task = corpus.task_id
        self.total_rounds = max(len(u.posts) for u in corpus.users)
        self.rounds: list[list[tuple[str, str]]] = [
            [(u.user_id, u.posts[r].text) for u in corpus.users if len(u.posts) > r]
            for r in range(self.total_rounds)
        ]
        self.runs_dir = Path(runs_dir) if runs_dir is not None else None
        self.sessions: dict[str, Session] = {}
        self._registry_lock = threading.Lock()

    def session(self, token: str) -> Session:
        with self._registry_lock:
            if token not in self.sessions:
                self.sessions[token] = Session(token=token)
            return self.sessions[token]

    def get_messages(self, token: str) -> dict:
        session = self.session(token)
        with session.lock:
            if session.current_round > self.total_rounds:
                return {"round": session.current_round, "terminal": True, "messages": []}
            session.awaiting_submission = True
            batch = self.rounds[session.current_round - 1]
            return {
                "round": session.current_round,
                "terminal": False,
                "messages": [{"nick": nick, "message": text} for nick, text in batch],
            }

    def submit(self, token: str, payload: object) -> tuple[int, dict]:
        """Validate one submission; returns (http_status, response_body)."""
        session = self.session(token)
        with session.lock:
            problem = self._parse_submission(payload)
            if isinstance(problem, str):
                return 400, {"error": problem}
            round_number, decisions = problem
            if session.current_round > self.total_rounds:
                return 409, {"error": "evaluation finished, no rounds left to submit"}
            if round_number < session.current_round:
                return 409, {"error": f"round {round_number} already submitted"}
            if round_number > session.current_round:
                return 409, {"error": f"wrong round: expected {session.current_round}, got {round_number}"}
            expected = {nick for nick, _ in self.rounds[round_number - 1]}
            missing = sorted(expected - set(decisions))
            if missing:
                return 422, {"error": f"missing decision for user: {missing[0]}"}
            extra = sorted(set(decisions) - expected)
            if extra:
                return 422, {"error": f"unknown user: {extra[0]}"}
            sticky = sorted(u for u, d in decisions.items() if d == 0 and u in session.first_flagged)
            if sticky:
                return 422, {"error": f"sticky decision violated for user: {sticky[0]}"}
            session.submissions[round_number] = decisions
            for user, decision in decisions.items():
                if decision == 1 and user not in session.first_flagged:
                    session.first_flagged[user] = round_number
            self._write_snapshot(session, round_number, decisions)
            session.current_round += 1
            session.awaiting_submission = False
            return 200, {"status": "ok"}

    @staticmethod
    def _parse_submission(payload: object) -> str | tuple[int, dict[str, int]]:
        if not isinstance(payload, dict):
            return "submission body must be a JSON object"
        round_number = payload.get("round")
        if type(round_number) is not int or round_number < 1:
            return f"round must be a positive integer, got {round_number!r}"
        raw = payload.get("decisions")
        if not isinstance(raw, list):
            return "decisions must be an array"
        decisions: dict[str, int] = {}
        for item in raw:
            if not isinstance(item, dict):
                return "each decision must be an object with nick and decision"
            nick = item.get("nick")
            value = item.get("decision")
            if not isinstance(nick, str) or not nick:
                return f"decision nick must be a non-empty string, got {nick!r}"
            if type(value) is not int or value not in (0, 1):
                return f"decision for user {nick} must be 0 or 1, got {value!r}"
            if nick in decisions:
                return f"duplicate decision for user: {nick}"
            decisions[nick] = value
        return round_number, decisions

    def _write_snapshot(self, session: Session, round_number: int, decisions: dict[str, int]) -> None:
        if self.runs_dir is None:
            return
        target = self.runs_dir / session.token
        target.mkdir(parents=True, exist_ok=True)
        snapshot = {"task": self.task, "round": round_number, "decisions": decisions}
        (target / f"round_{round_number}.json").write_text(
            json.dumps(snapshot, ensure_ascii=False, sort_keys=True), encoding="utf-8"
        )


def decisions_from_submissions(submissions: dict[int, dict[str, int]]) -> list[FinalDecision]:
    """Fold per-round submissions into one final decision per user.

    A user flagged 1 in any round is positive with delay = the first flagged
    round; otherwise negative with delay = the number of rounds the user
    appeared in.
    """
    first_flag: dict[str, int] = {}
    appearances: dict[str, int] = {}
    for round_number in sorted(submissions):
        for user, decision in submissions[round_number].items():
            appearances[user] = appearances.get(user, 0) + 1
            if decision == 1 and user not in first_flag:
                first_flag[user] = round_number
    return [
        FinalDecision(user, 1, first_flag[user]) if user in first_flag else FinalDecision(user, 0, appearances[user])
        for user in sorted(appearances)
    ]


def load_submission_snapshots(token_dir: str | Path) -> dict[int, dict[str, int]]:
    """Rebuild a session's submissions from its on-disk snapshots."""
    token_dir = Path(token_dir)
    submissions: dict[int, dict[str, int]] = {}
    for path in sorted(token_dir.glob("round_*.json")):
        snapshot = json.loads(path.read_text(encoding="utf-8"))
        submissions[int(snapshot["round"])] = dict(snapshot["decisions"])
    return submissions


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    # loopback round trips stall on Nagle + delayed ACK otherwise
    disable_nagle_algorithm = True

    def log_message(self, fmt: str, *args) -> None:
        log.debug("%s %s", self.address_string(), fmt % args)

    def _respond(self, status: int, body: dict) -> None:
        data = json.dumps(body, ensure_ascii=False).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def _route(self, action: str) -> str | None:
        """Token when the path is /{task}/{action}/{token}; responds and
        returns None otherwise."""
        parts = self.path.strip("/").split("/")
        if len(parts) != 3 or parts[1] != action:
            self._respond(404, {"error": "not found"})
            return None
        task, _, token = parts
        if task != self.server.mock.task:
            self._respond(404, {"error": f"unknown task: {task}"})
            return None
        if not _TOKEN_RE.match(token):
            self._respond(400, {"error": "invalid token"})
            return None
        return token

    def do_GET(self) -> None:
        token = self._route("getmessages")
        if token is None:
            return
        self._respond(200, self.server.mock.get_messages(token))

    def do_POST(self) -> None:
        token = self._route("submit")
        if token is None:
            return
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length) if length else b""
        try:
            payload = json.loads(raw.decode("utf-8"))
        except (json.JSONDecodeError, UnicodeDecodeError):
            self._respond(400, {"error": "submission body must be valid JSON"})
            return
        status, body = self.server.mock.submit(token, payload)
        self._respond(status, body)


def build_httpd(
    corpus: Corpus,
    host: str = "127.0.0.1",
    port: int = 0,
    runs_dir: str | Path | None = None,
) -> ThreadingHTTPServer:
    """A ready-to-run HTTP server; port 0 picks a free port."""
    httpd = ThreadingHTTPServer((host, port), _Handler)
    httpd.daemon_threads = True
    httpd.mock = MockServer(corpus, runs_dir)
    return httpd


class ServerHandle:
    """A mock server running on a background thread."""

    def __init__(self, httpd: ThreadingHTTPServer):
        self.httpd = httpd
        # small poll interval so stop() returns promptly
        self.thread = threading.Thread(target=lambda: httpd.serve_forever(poll_interval=0.05), daemon=True)
        self.thread.start()

    @property
    def mock(self) -> MockServer:
        return self.httpd.mock

    @property
    def base_url(self) -> str:
        host, port = self.httpd.server_address[:2]
        return f"http://{host}:{port}"

    def stop(self) -> None:
        self.httpd.shutdown()
        self.thread.join(timeout=5)
        self.httpd.server_close()


def serve(
    corpus: Corpus,
    host: str = "127.0.0.1",
    port: int = 0,
    runs_dir: str | Path | None = None,
) -> ServerHandle:
    """Start the mock server on a background thread and return its handle."""
    return ServerHandle(build_httpd(corpus, host, port, runs_dir))
