"""Posts, record parsing, and calendar-day windows over a time-ordered stream."""
from __future__ import annotations

import bisect
import enum
import json
import re
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from .errors import ConfigurationError, ParseError, RangeError

HASHTAG_RE = re.compile(r"#(\w+)")
_TS_RE = re.compile(
    r"^(\d{4})-(\d{2})-(\d{2})[T ](\d{2}):(\d{2}):(\d{2})(\.\d+)?(Z|[+-]\d{2}:\d{2})?$"
)


def extract_hashtags(text: str) -> list[str]:
    """Hashtags in order of first appearance, lowercased, '#' stripped, de-duplicated."""
    seen: dict[str, None] = {}
    for match in HASHTAG_RE.finditer(text or ""):
        seen.setdefault(match.group(1).lower(), None)
    return list(seen)


def normalize_hashtag(tag: str) -> str:
    tag = tag.strip().lstrip("#").lower()
    if not tag or "#" in tag or any(ch.isspace() for ch in tag):
        raise ValueError(f"invalid hashtag {tag!r}")
    return tag


def _unique(tags: Iterable[str]) -> tuple[str, ...]:
    return tuple(dict.fromkeys(tags))


def parse_timestamp(value: str) -> datetime:
    """Parse an ISO-8601 timestamp into an aware UTC datetime truncated to seconds.

    Naive timestamps are taken as UTC. Raises ParseError for a malformed string and
    RangeError for a well-formed one naming an impossible instant (e.g. month 13).
    """
    if not isinstance(value, str):
        raise ParseError("ts", f"expected string, got {type(value).__name__}")
    m = _TS_RE.match(value.strip())
    if m is None:
        raise ParseError("ts", f"not an ISO-8601 timestamp: {value!r}")
    year, month, day, hour, minute, second = (int(g) for g in m.groups()[:6])
    offset = m.group(8)
    try:
        if offset in (None, "Z"):
            tz = timezone.utc
        else:
            sign = 1 if offset[0] == "+" else -1
            tz = timezone(sign * timedelta(hours=int(offset[1:3]), minutes=int(offset[4:6])))
        ts = datetime(year, month, day, hour, minute, second, tzinfo=tz)
    except ValueError as exc:
        raise RangeError("ts", f"{value!r}: {exc}") from None
    return ts.astimezone(timezone.utc)


def format_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass(frozen=True)
class Post:
    id: str
    timestamp: datetime
    text: str
    hashtags: tuple[str, ...] = ()

    def __post_init__(self):
        if self.timestamp.tzinfo is None:
            raise ValueError("timestamp must be timezone-aware")
        object.__setattr__(self, "hashtags", _unique(normalize_hashtag(h) for h in self.hashtags))

    @property
    def day(self) -> date:
        return self.timestamp.astimezone(timezone.utc).date()

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "ts": format_timestamp(self.timestamp),
            "text": self.text,
            "tags": list(self.hashtags),
        }

    def to_line(self) -> str:
        return json.dumps(self.to_record(), ensure_ascii=False, separators=(",", ":"))


def parse_post_record(line: str) -> Post:
    """Parse one line-delimited JSON record into a Post.

    When the record has no tags (missing or empty), hashtags are extracted from the text.
    """
    try:
        rec = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError("record", str(exc)) from None
    if not isinstance(rec, dict):
        raise ParseError("record", "expected a JSON object")

    post_id = rec.get("id")
    if not isinstance(post_id, str) or not post_id:
        raise ParseError("id", "missing or not a non-empty string")
    if "ts" not in rec:
        raise ParseError("ts", "missing")
    ts = parse_timestamp(rec["ts"])
    text = rec.get("text")
    if not isinstance(text, str):
        raise ParseError("text", "missing or not a string")

    tags = rec.get("tags")
    if tags is None:
        tags = []
    if not isinstance(tags, list) or not all(isinstance(t, str) for t in tags):
        raise ParseError("tags", "expected an array of strings")
    try:
        hashtags = [normalize_hashtag(t) for t in tags]
    except ValueError as exc:
        raise ParseError("tags", str(exc)) from None
    if not hashtags:
        hashtags = extract_hashtags(text)
    return Post(post_id, ts, text, tuple(hashtags))


class WindowKind(enum.Enum):
    BOOTSTRAP = "B"
    TUMBLING = "T"
    SLIDING = "W"
    FINETUNE = "F"


@dataclass(frozen=True)
class WindowSpec:
    kind: WindowKind
    length_days: int
    end_date: date

    def __post_init__(self):
        if self.length_days < 1:
            raise ConfigurationError(f"{self.kind.name} window length must be >= 1 day")

    @property
    def start_date(self) -> date:
        return self.end_date - timedelta(days=self.length_days - 1)

    def contains(self, day: date) -> bool:
        return self.start_date <= day <= self.end_date


def validate_window_lengths(d_B: int, d_T: int, d_W: int, d_F: int) -> None:
    for name, value in (("d_B", d_B), ("d_T", d_T), ("d_W", d_W), ("d_F", d_F)):
        if int(value) < 1:
            raise ConfigurationError(f"{name} must be >= 1, got {value}")
    if d_F >= d_W:
        raise ConfigurationError(f"fine-tuning window must be shorter than sliding window (d_F={d_F}, d_W={d_W})")
    if d_T > d_W:
        raise ConfigurationError(f"tumbling window cannot exceed sliding window (d_T={d_T}, d_W={d_W})")


@dataclass
class PostStream:
    """Immutable time-ordered posts with a per-UTC-day index."""

    posts: tuple[Post, ...]
    _days: list[date] = field(init=False, repr=False)
    _offsets: list[int] = field(init=False, repr=False)

    def __init__(self, posts: Iterable[Post]):
        # stable sort keeps file order among equal timestamps
        self.posts = tuple(sorted(posts, key=lambda p: p.timestamp))
        self._days = []
        self._offsets = []
        for i, post in enumerate(self.posts):
            if not self._days or self._days[-1] != post.day:
                self._days.append(post.day)
                self._offsets.append(i)
        self._offsets.append(len(self.posts))

    def __len__(self) -> int:
        return len(self.posts)

    def __iter__(self) -> Iterator[Post]:
        return iter(self.posts)

    @property
    def days(self) -> list[date]:
        """Days that have at least one post."""
        return list(self._days)

    @property
    def first_day(self) -> date | None:
        return self._days[0] if self._days else None

    @property
    def last_day(self) -> date | None:
        return self._days[-1] if self._days else None

    def _slice(self, start: date, end: date) -> tuple[Post, ...]:
        lo = bisect.bisect_left(self._days, start)
        hi = bisect.bisect_right(self._days, end)
        return self.posts[self._offsets[lo]:self._offsets[hi]]

    def day(self, d: date) -> list[Post]:
        return list(self._slice(d, d))

    def get_last_window(self, length_days: int, end_date: date) -> list[Post]:
        """Posts dated in [end_date - length_days + 1, end_date], in timestamp order."""
        if length_days < 1:
            raise ConfigurationError(f"length_days must be >= 1, got {length_days}")
        start = end_date - timedelta(days=length_days - 1)
        return list(self._slice(start, end_date))

    def window(self, spec: WindowSpec) -> list[Post]:
        return self.get_last_window(spec.length_days, spec.end_date)

    @classmethod
    def from_lines(cls, lines: Iterable[str]) -> "PostStream":
        posts = []
        for lineno, line in enumerate(lines, 1):
            if not line.strip():
                continue
            try:
                posts.append(parse_post_record(line))
            except (ParseError, RangeError) as exc:
                exc.lineno = lineno
                raise
        return cls(posts)

    @classmethod
    def load(cls, path: str | Path) -> "PostStream":
        with open(path, encoding="utf-8") as fh:
            return cls.from_lines(fh)

    def dump(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for post in self.posts:
                fh.write(post.to_line())
                fh.write("\n")


def get_last_window(stream: PostStream, length_days: int, end_date: date) -> list[Post]:
    return stream.get_last_window(length_days, end_date)


def iter_days(start: date, end: date, step: int = 1) -> Iterator[date]:
    d = start
    while d <= end:
        yield d
        d += timedelta(days=step)


def count_hashtags(posts: Sequence[Post]) -> dict[str, int]:
    counts: dict[str, int] = {}
    for post in posts:
        for h in post.hashtags:
            counts[h] = counts.get(h, 0) + 1
    return counts
