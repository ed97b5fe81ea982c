"""Trending sets and the ranked Jaccard distance used to detect trend shifts."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from datetime import date
from typing import Iterable, Mapping, Sequence, Union

from .errors import ConfigurationError


@dataclass(frozen=True)
class TrendingSet:
    """Top hashtags ordered by decreasing count (ties: lexicographic)."""

    entries: tuple[tuple[str, int], ...]
    n: int
    window_end: date | None = None

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple((h, int(c)) for h, c in self.entries))
        if len(self.entries) > self.n:
            raise ValueError(f"{len(self.entries)} entries exceed capacity n={self.n}")
        keys = [h for h, _ in self.entries]
        if len(set(keys)) != len(keys):
            raise ValueError("duplicate hashtags in trending set")
        if any(c <= 0 for _, c in self.entries):
            raise ValueError("trending counts must be positive")
        if list(self.entries) != sorted(self.entries, key=lambda e: (-e[1], e[0])):
            raise ValueError("entries must be sorted by count desc, hashtag asc")

    @property
    def hashtags(self) -> list[str]:
        return [h for h, _ in self.entries]

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.hashtags)

    def rank(self, h: str) -> int:
        return rank(self, h)


Ranked = Union[TrendingSet, Sequence[str]]


def top_hashtags(counts: Mapping[str, int], n: int, window_end: date | None = None) -> TrendingSet:
    if n < 1:
        raise ConfigurationError(f"n must be >= 1, got {n}")
    ordered = sorted(((h, c) for h, c in counts.items() if c > 0), key=lambda e: (-e[1], e[0]))
    return TrendingSet(tuple(ordered[:n]), n, window_end)


def _ordered(s: Ranked) -> list[str]:
    return s.hashtags if isinstance(s, TrendingSet) else list(s)


def rank(s: Ranked, h: str) -> int:
    """n_eff - i for the hashtag at 0-based position i; 0 when absent."""
    items = _ordered(s)
    try:
        return len(items) - items.index(h)
    except ValueError:
        return 0


def _ranks(s: Ranked) -> dict[str, int]:
    items = _ordered(s)
    n = len(items)
    return {h: n - i for i, h in enumerate(items)}


def rjd(h1: Ranked, h2: Ranked) -> float:
    """Ranked Jaccard distance in [0, 1]; 0 for identical rankings, 1 for disjoint ones.

    The ranked union sums the mean rank over all hashtags of either set, which
    reduces to half the sum of both triangular numbers.
    """
    r1, r2 = _ranks(h1), _ranks(h2)
    n1, n2 = len(r1), len(r2)
    union = (n1 * (n1 + 1) + n2 * (n2 + 1)) / 4.0
    if union == 0:
        return 0.0
    if len(r1) > len(r2):
        r1, r2 = r2, r1
    inter = sum(min(r, r2[h]) for h, r in r1.items() if h in r2)
    return 1.0 - inter / union


@dataclass(frozen=True)
class ShiftEvent:
    date: date | None
    delta: float
    previous: TrendingSet
    current: TrendingSet
    omega: float
    strategy: str | None = None

    def __post_init__(self):
        if self.delta < self.omega:
            raise ValueError(f"delta {self.delta} below threshold {self.omega}")


def detect_shift(
    current_trends: TrendingSet,
    window_trends: TrendingSet,
    omega: float,
    when: date | None = None,
    strategy: str | None = None,
) -> ShiftEvent | None:
    """A ShiftEvent when rjd(current, window) >= omega, else None."""
    if not 0.0 <= omega <= 1.0:
        raise ConfigurationError(f"omega out of range: {omega}")
    delta = rjd(current_trends, window_trends)
    if delta >= omega:
        when = when if when is not None else window_trends.window_end
        return ShiftEvent(when, delta, current_trends, window_trends, omega, strategy)
    return None


SHIFT_LOG_COLUMNS = ["date", "delta", "omega", "previous_set", "current_set"]


def write_shift_log(events: Iterable[ShiftEvent], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SHIFT_LOG_COLUMNS)
        for ev in events:
            writer.writerow([
                ev.date.isoformat() if ev.date else "",
                f"{ev.delta:.6f}",
                f"{ev.omega:g}",
                "|".join(ev.previous.hashtags),
                "|".join(ev.current.hashtags),
            ])
