"""Corpus loading, validation, statistics, and training-set construction.

A corpus file is a UTF-8 JSON array of user records::

    [{"user_id": "u1", "label": 1, "posts": [{"order": 0, "text": "...", "date": null}, ...]}, ...]

``label`` is 1 (positive), 0 (negative), or null (unknown, allowed only in
the test split). Posts are stored oldest first with ``order`` consecutive
from 0. Malformed records are rejected, never repaired.
"""

from __future__ import annotations

import json
import random
import statistics
import warnings
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

SPLITS = ("train", "trial", "test")
DEFAULT_TASK_ID = "task1"
DEFAULT_PARTS = 3
DEFAULT_VALID_FRACTION = 0.15


class CorpusError(ValueError):
    """A corpus file, record, or sidecar violates the corpus contract."""


class Label(Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    UNKNOWN = "unknown"


_LABEL_FROM_JSON = {1: Label.POSITIVE, 0: Label.NEGATIVE, None: Label.UNKNOWN}


@dataclass(frozen=True)
class Post:
    order: int
    text: str
    date: str | None = None


@dataclass
class UserHistory:
    user_id: str
    label: Label
    posts: list[Post]


@dataclass
class Corpus:
    task_id: str
    split: str
    users: list[UserHistory]

    def gold_labels(self) -> dict[str, int]:
        """0/1 label per user, unknown-label users omitted."""
        out: dict[str, int] = {}
        for u in self.users:
            if u.label is Label.POSITIVE:
                out[u.user_id] = 1
            elif u.label is Label.NEGATIVE:
                out[u.user_id] = 0
        return out


@dataclass(frozen=True)
class LabeledSample:
    """One training text: a contiguous slice of a user's history.

    ``part_index`` is the 0-based chunk number, or -1 for the sample that
    covers the user's whole history.
    """

    text: str
    label: Label
    origin_user: str
    part_index: int


@dataclass(frozen=True)
class DistributionSummary:
    median: float
    min: int
    max: int

    def to_dict(self) -> dict:
        return {"median": self.median, "min": self.min, "max": self.max}


@dataclass(frozen=True)
class StatsReport:
    n_users: int
    n_pos: int
    n_neg: int
    n_posts: int
    posts_per_user: DistributionSummary
    words_per_post: DistributionSummary

    def to_dict(self) -> dict:
        return {
            "n_users": self.n_users,
            "n_pos": self.n_pos,
            "n_neg": self.n_neg,
            "n_posts": self.n_posts,
            "posts_per_user": self.posts_per_user.to_dict(),
            "words_per_post": self.words_per_post.to_dict(),
        }


def load_corpus(path: str | Path, split: str, task_id: str = DEFAULT_TASK_ID) -> Corpus:
    """Load and validate a corpus file.

    Raises CorpusError naming the offending record index and user_id when a
    record is malformed.
    """
    if split not in SPLITS:
        raise CorpusError(f"unknown split {split!r}, expected one of {SPLITS}")
    path = Path(path)
    if not path.exists():
        raise CorpusError(f"corpus file not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CorpusError(f"corpus file {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, list):
        raise CorpusError("corpus file must contain a JSON array of user records")
    if not data:
        raise CorpusError("corpus is empty")
    users: list[UserHistory] = []
    seen: set[str] = set()
    for index, record in enumerate(data):
        users.append(_parse_user(record, index, split, seen))
    return Corpus(task_id=task_id, split=split, users=users)


def _reject(index: int, user_id: object, reason: str) -> CorpusError:
    who = f" (user_id={user_id!r})" if isinstance(user_id, str) else ""
    return CorpusError(f"malformed record {index}{who}: {reason}")


def _parse_user(record: object, index: int, split: str, seen: set[str]) -> UserHistory:
    if not isinstance(record, dict):
        raise _reject(index, None, "expected a JSON object")
    user_id = record.get("user_id")
    if not isinstance(user_id, str) or not user_id:
        raise _reject(index, user_id, "user_id must be a non-empty string")
    if user_id in seen:
        raise _reject(index, user_id, "duplicate user_id")
    seen.add(user_id)
    raw_label = record.get("label")
    if isinstance(raw_label, bool) or raw_label not in _LABEL_FROM_JSON:
        raise _reject(index, user_id, f"label must be 1, 0, or null, got {raw_label!r}")
    label = _LABEL_FROM_JSON[raw_label]
    if label is Label.UNKNOWN and split != "test":
        raise _reject(index, user_id, f"unlabeled user in {split!r} split")
    raw_posts = record.get("posts")
    if not isinstance(raw_posts, list) or not raw_posts:
        raise _reject(index, user_id, "posts must be a non-empty array")
    posts: list[Post] = []
    for i, raw in enumerate(raw_posts):
        if not isinstance(raw, dict):
            raise _reject(index, user_id, f"post {i} must be a JSON object")
        if raw.get("order") != i:
            raise _reject(index, user_id, f"post {i} has order {raw.get('order')!r}, orders must run 0..{len(raw_posts) - 1} in file order")
        text = raw.get("text")
        if not isinstance(text, str) or not text.strip():
            raise _reject(index, user_id, f"post {i} text must be a non-empty string")
        date = raw.get("date")
        if date is not None and not isinstance(date, str):
            raise _reject(index, user_id, f"post {i} date must be a string or null")
        posts.append(Post(order=i, text=text, date=date))
    return UserHistory(user_id=user_id, label=label, posts=posts)


def load_gold(path: str | Path) -> dict[str, int]:
    """Load a gold-label sidecar: a JSON object of user_id to 0/1."""
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise CorpusError(f"gold file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise CorpusError(f"gold file {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict) or not data:
        raise CorpusError("gold file must be a non-empty JSON object of user_id to 0/1")
    for user_id, value in data.items():
        if type(value) is not int or value not in (0, 1):
            raise CorpusError(f"gold label for {user_id!r} must be 0 or 1, got {value!r}")
    return data


def _summarize(values: list[int]) -> DistributionSummary:
    # statistics.median interpolates even-length samples (mean of the two
    # middle values), which is the convention reported here.
    return DistributionSummary(median=float(statistics.median(values)), min=min(values), max=max(values))


def corpus_stats(corpus: Corpus) -> StatsReport:
    """Users, labels, posts, and per-post word counts, summarized.

    Word counts split the raw text on whitespace; normalization never runs
    here.
    """
    posts_per_user = [len(u.posts) for u in corpus.users]
    word_counts = [len(p.text.split()) for u in corpus.users for p in u.posts]
    return StatsReport(
        n_users=len(corpus.users),
        n_pos=sum(1 for u in corpus.users if u.label is Label.POSITIVE),
        n_neg=sum(1 for u in corpus.users if u.label is Label.NEGATIVE),
        n_posts=sum(posts_per_user),
        posts_per_user=_summarize(posts_per_user),
        words_per_post=_summarize(word_counts),
    )


def augment_split(user: UserHistory, parts: int = DEFAULT_PARTS) -> list[LabeledSample]:
    """Cut a user's timeline into ``parts`` contiguous chunks, one sample each.

    Chunk sizes differ by at most one and earlier chunks take the remainder
    (11 posts split 3 ways gives sizes 4, 4, 3). A history shorter than
    ``parts`` yields one single-post sample per post. Concatenating the
    chunks in order reproduces the timeline exactly.
    """
    if parts < 1:
        raise ValueError(f"parts must be >= 1, got {parts}")
    if user.label is Label.UNKNOWN:
        raise CorpusError(f"cannot build labeled samples for unlabeled user {user.user_id!r}")
    n = len(user.posts)
    if n == 0:
        raise CorpusError(f"user {user.user_id!r} has no posts")
    if n < parts:
        sizes = [1] * n
    else:
        base, remainder = divmod(n, parts)
        sizes = [base + 1] * remainder + [base] * (parts - remainder)
    samples: list[LabeledSample] = []
    start = 0
    for part_index, size in enumerate(sizes):
        chunk = user.posts[start : start + size]
        start += size
        samples.append(
            LabeledSample(
                text=" ".join(p.text for p in chunk),
                label=user.label,
                origin_user=user.user_id,
                part_index=part_index,
            )
        )
    return samples


def training_samples(corpus: Corpus, parts: int = DEFAULT_PARTS) -> list[LabeledSample]:
    """One whole-history sample per labeled user plus the augmented chunks.

    The chunk samples are added to, not substituted for, the whole-history
    samples.
    """
    out: list[LabeledSample] = []
    for user in corpus.users:
        if user.label is Label.UNKNOWN:
            continue
        out.append(
            LabeledSample(
                text=" ".join(p.text for p in user.posts),
                label=user.label,
                origin_user=user.user_id,
                part_index=-1,
            )
        )
        out.extend(augment_split(user, parts))
    if not out:
        raise CorpusError("corpus has no labeled users")
    return out


def train_valid_split(
    samples: list[LabeledSample],
    valid_fraction: float = DEFAULT_VALID_FRACTION,
    seed: int = 13,
) -> tuple[list[LabeledSample], list[LabeledSample]]:
    """Deterministic stratified split into (train, valid).

    The validation set holds round(len(samples) * valid_fraction) items,
    spread over the classes by largest remainder so each class lands within
    one sample of the requested fraction. A single-class input warns and
    falls back to an unstratified split.
    """
    if not 0 < valid_fraction < 1:
        raise ValueError(f"valid_fraction must be in (0, 1), got {valid_fraction}")
    if not samples:
        raise ValueError("no samples to split")
    rng = random.Random(seed)
    by_label: dict[Label, list[int]] = {}
    for i, sample in enumerate(samples):
        by_label.setdefault(sample.label, []).append(i)
    if len(by_label) == 1:
        warnings.warn("single-class sample set, falling back to an unstratified split", stacklevel=2)
    groups = [(label.value, idxs) for label, idxs in sorted(by_label.items(), key=lambda kv: kv[0].value)]

    total_valid = int(round(len(samples) * valid_fraction))
    total_valid = min(max(total_valid, 1), len(samples) - 1)
    quotas = {name: len(idxs) * valid_fraction for name, idxs in groups}
    take = {name: int(quotas[name]) for name, _ in groups}
    # Never drain a class out of the training side.
    caps = {name: len(idxs) - 1 if len(idxs) > 1 else 0 for name, idxs in groups}
    # Largest-remainder allocation keeps the overall validation size at the
    # rounded total while holding every class within one sample of its quota.
    by_remainder = sorted(groups, key=lambda g: (-(quotas[g[0]] - take[g[0]]), -len(g[1]), g[0]))
    for name, _ in by_remainder * 2:
        if sum(take.values()) >= total_valid:
            break
        if take[name] < caps[name]:
            take[name] += 1
    train_idx: list[int] = []
    valid_idx: list[int] = []
    for name, idxs in groups:
        shuffled = idxs[:]
        rng.shuffle(shuffled)
        k = min(take[name], len(shuffled))
        valid_idx.extend(shuffled[:k])
        train_idx.extend(shuffled[k:])
    return [samples[i] for i in sorted(train_idx)], [samples[i] for i in sorted(valid_idx)]
