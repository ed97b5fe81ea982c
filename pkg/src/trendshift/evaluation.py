"""Rank-based recall, per-day scoring against the serving model, and series output."""
from __future__ import annotations

import csv
from collections import OrderedDict
from dataclasses import dataclass
from datetime import date, timedelta
from typing import TYPE_CHECKING, Iterable, Sequence

from .stream import Post, PostStream

if TYPE_CHECKING:
    from .adaptation import ModelRegistry


def relevance(r: str, targets: set[str] | frozenset[str]) -> int:
    return 1 if r in targets else 0


def recall_at_k(recommended: Sequence[str], targets: Iterable[str]) -> float:
    targets = set(targets)
    if not targets:
        raise ValueError("recall is undefined for a post without target hashtags")
    hits = sum(relevance(r, targets) for r in dict.fromkeys(recommended))
    return min(1.0, hits / len(targets))


@dataclass(frozen=True)
class EvalRecord:
    post_id: str
    date: date
    recommended: tuple[str, ...]
    targets: frozenset[str]
    recall: float
    version: int


def evaluate_posts(registry: "ModelRegistry", posts: Sequence[Post], k: int, eta: int = 0) -> list[EvalRecord]:
    """Score posts against one snapshot of the serving model.

    Targets are the post's own hashtags; the model only sees the text with
    hashtags stripped. Posts without hashtags are skipped; posts the model
    cannot score (no words left) count as recall 0.
    """
    posts = [p for p in posts if p.hashtags]
    if not posts:
        return []
    model, version = registry.current()
    ranked = model.recommend_batch(posts, k, eta)
    out = []
    for post, recs in zip(posts, ranked):
        recs = tuple(recs or ())
        targets = frozenset(post.hashtags)
        out.append(EvalRecord(post.id, post.day, recs, targets, recall_at_k(recs, targets), version))
    return out


@dataclass(frozen=True)
class DailyRecall:
    date: date
    n_posts: int
    mean_recall: float
    model_version: int


@dataclass(frozen=True)
class WeeklyRecall:
    iso_week: str
    n_posts: int
    mean_recall: float


def iso_week(d: date) -> str:
    y, w, _ = d.isocalendar()
    return f"{y}-W{w:02d}"


def daily_series(records: Iterable[EvalRecord]) -> list[DailyRecall]:
    by_day: "OrderedDict[date, list[EvalRecord]]" = OrderedDict()
    for r in sorted(records, key=lambda r: r.date):
        by_day.setdefault(r.date, []).append(r)
    return [
        DailyRecall(d, len(rs), sum(r.recall for r in rs) / len(rs), max(r.version for r in rs))
        for d, rs in by_day.items()
    ]


def weekly_series(daily: Iterable[DailyRecall]) -> list[WeeklyRecall]:
    """Weekly mean recall: daily means weighted by their post counts."""
    acc: "OrderedDict[str, list[float]]" = OrderedDict()
    for row in daily:
        total, n = acc.setdefault(iso_week(row.date), [0.0, 0])
        acc[iso_week(row.date)] = [total + row.mean_recall * row.n_posts, n + row.n_posts]
    return [WeeklyRecall(w, int(n), total / n) for w, (total, n) in acc.items() if n]


def mean_recall(records: Iterable[EvalRecord], start: date | None = None, end: date | None = None) -> float:
    vals = [r.recall for r in records if (start is None or r.date >= start) and (end is None or r.date <= end)]
    return sum(vals) / len(vals) if vals else float("nan")


def evaluate_stream(registry: "ModelRegistry", stream: PostStream, start: date, end: date,
                    k: int, eta: int = 0) -> tuple[list[EvalRecord], list[DailyRecall], list[WeeklyRecall]]:
    """Score every post dated in [start, end] against whatever model is serving at the time."""
    records: list[EvalRecord] = []
    d = start
    while d <= end:
        records.extend(evaluate_posts(registry, stream.day(d), k, eta))
        d += timedelta(days=1)
    daily = daily_series(records)
    return records, daily, weekly_series(daily)


def write_daily_csv(rows: Iterable[DailyRecall], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "n_posts", "mean_recall", "model_version"])
        for r in rows:
            w.writerow([r.date.isoformat(), r.n_posts, f"{r.mean_recall:.6f}", r.model_version])


def write_weekly_csv(rows: Iterable[WeeklyRecall], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iso_week", "mean_recall"])
        for r in rows:
            w.writerow([r.iso_week, f"{r.mean_recall:.6f}"])


def rjd_oracle(h1: Sequence[str], h2: Sequence[str]) -> float:
    """Ranked Jaccard distance evaluated literally from its intersection/union sums.

    Kept deliberately naive and separate from ``trends.rjd`` so tests can
    cross-check the two.
    """
    h1, h2 = list(h1), list(h2)

    def rank_of(s, h):
        for i in range(len(s)):
            if s[i] == h:
                return len(s) - i
        return 0

    union = []
    for h in h1 + h2:
        if h not in union:
            union.append(h)
    inter_sum = 0.0
    for h in union:
        if h in h1 and h in h2:
            inter_sum += min(rank_of(h1, h), rank_of(h2, h))
    union_sum = 0.0
    for h in union:
        union_sum += (rank_of(h1, h) + rank_of(h2, h)) / 2.0
    if union_sum == 0.0:
        return 0.0
    return 1.0 - inter_sum / union_sum
