"""Shared fixtures: corpus builders, the hand-tallied stats fixture, the
hand-labeled normalization table, and a scriptable /predict stub."""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from earlyrisk.corpus import Corpus, Label, Post, UserHistory

_LABELS = {1: Label.POSITIVE, 0: Label.NEGATIVE, None: Label.UNKNOWN}


def user_record(user_id: str, label: int | None, texts: list[str]) -> dict:
    return {
        "user_id": user_id,
        "label": label,
        "posts": [{"order": i, "text": t, "date": None} for i, t in enumerate(texts)],
    }


def write_corpus(path: Path, records: list[dict]) -> Path:
    path.write_text(json.dumps(records, ensure_ascii=False), encoding="utf-8")
    return path


def make_user(user_id: str, label: int | None, texts: list[str]) -> UserHistory:
    return UserHistory(user_id, _LABELS[label], [Post(i, t) for i, t in enumerate(texts)])


def make_corpus(specs: list[tuple[str, int | None, list[str]]], task_id: str = "task1", split: str = "train") -> Corpus:
    return Corpus(task_id, split, [make_user(*spec) for spec in specs])


# ---------------------------------------------------------------------------
# Hand-tallied statistics fixture: 10 users, 50 posts. Both medians fall
# between two middle values on purpose (4.5 posts per user, 3.5 words per
# post). The expected report below was tallied independently of corpus_stats
# and is frozen.

STATS_WORD_COUNTS: dict[str, list[int]] = {
    "u01": [3],
    "u02": [1, 7],
    "u03": [2, 2, 5],
    "u04": [4, 6, 1, 9],
    "u05": [5, 5, 2, 8],
    "u06": [3, 1, 4, 2, 6],
    "u07": [7, 2, 3, 3, 1],
    "u08": [2, 4, 8, 1, 5, 3],
    "u09": [6, 2, 9, 4, 1, 2, 42],
    "u10": [3, 5, 2, 7, 1, 4, 6, 2, 8, 3, 5, 2, 4],
}
STATS_LABELS: dict[str, int] = {
    "u01": 1, "u02": 0, "u03": 1, "u04": 0, "u05": 1,
    "u06": 0, "u07": 1, "u08": 1, "u09": 0, "u10": 1,
}
STATS_EXPECTED = {
    "n_users": 10,
    "n_pos": 6,
    "n_neg": 4,
    "n_posts": 50,
    "posts_per_user": {"median": 4.5, "min": 1, "max": 13},
    "words_per_post": {"median": 3.5, "min": 1, "max": 42},
}


def stats_fixture_records() -> list[dict]:
    records = []
    for user_id, counts in STATS_WORD_COUNTS.items():
        texts = [" ".join(f"w{j}" for j in range(c)) for c in counts]
        records.append(user_record(user_id, STATS_LABELS[user_id], texts))
    return records


# ---------------------------------------------------------------------------
# Hand-labeled normalization table: 20 raw/expected pairs worked out from the
# pipeline rules (decode, lowercase, weblink, number, dedupe, whitespace).

NORMALIZE_CASES: list[tuple[str, str]] = [
    ("Hola HOLA hola", "hola"),
    ("mira https://a.b/c tiene 250 kcal", "mira weblink tiene number kcal"),
    ("caf&eacute;", "café"),
    ("Visita www.ejemplo.com ahora", "visita weblink ahora"),
    ("pes\\u00e9 45,5 kg hoy", "pesé number kg hoy"),
    ("No no NO pares", "no pares"),
    ("   espacios    múltiples   ", "espacios múltiples"),
    ("&lt;div&gt; html &amp; m&aacute;s", "<div> html & más"),
    ("1.000,50 euros", "number euros"),
    ("tel: 555-1234", "tel: number-number"),
    ("HTTP://MAYUS.COM y http://minus.com", "weblink y weblink"),
    ("https://a.com https://b.com", "weblink"),
    ("covid19 vacuna", "covidnumber vacuna"),
    ("&#72;&#111;&#76;&#65;", "hola"),
    ("me siento ... \U0001f614 \U0001f614", "me siento ... \U0001f614"),
    ("", ""),
    ("42", "number"),
    ("3.5.7 versión", "number versión"),
    ("palabra  palabra", "palabra"),
    ("&amp;amp; raro", "& raro"),
]


# ---------------------------------------------------------------------------
# Scriptable /predict stub for exercising the external classifier bridge.


class ScriptedEndpoint:
    """HTTP stub whose POST /predict behavior is a plugged-in callable.

    ``behavior(texts)`` returns ``(status, body_dict)``; raising is allowed.
    Use as a context manager; ``url`` is the base endpoint.
    """

    def __init__(self, behavior):
        self.behavior = behavior
        self.request_count = 0
        stub = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, fmt, *args):
                pass

            def do_POST(self):
                stub.request_count += 1
                length = int(self.headers.get("Content-Length") or 0)
                payload = json.loads(self.rfile.read(length).decode("utf-8")) if length else {}
                status, body = stub.behavior(payload.get("texts", []))
                data = json.dumps(body).encode("utf-8")
                try:
                    self.send_response(status)
                    self.send_header("Content-Type", "application/json")
                    self.send_header("Content-Length", str(len(data)))
                    self.end_headers()
                    self.wfile.write(data)
                except (BrokenPipeError, ConnectionResetError):
                    pass

        self._httpd = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._httpd.daemon_threads = True
        self._thread = threading.Thread(
            target=lambda: self._httpd.serve_forever(poll_interval=0.02), daemon=True
        )

    def __enter__(self):
        self._thread.start()
        return self

    @property
    def url(self) -> str:
        host, port = self._httpd.server_address[:2]
        return f"http://{host}:{port}"

    def __exit__(self, *exc):
        self._httpd.shutdown()
        self._thread.join(timeout=5)
        self._httpd.server_close()
        return False


class ConstantClassifier:
    """Test double emitting the same probability for every text."""

    def __init__(self, p: float):
        self.p = p

    def describe(self) -> dict:
        return {"kind": "constant", "p": self.p}

    def predict_batch(self, texts, user_ids=None):
        return [self.p] * len(texts)
