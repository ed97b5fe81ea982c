"""Seeded synthetic post streams with topic mixtures and hashtag-pool drift.

Each topic owns a word list and a hashtag pool. Every hashtag gets a small
"signature" of topic words that posts carrying it tend to use, so the text
predicts specific hashtags, not just the topic. A drift event replaces a
topic's pool with fresh hashtags (and fresh signatures over the same words).
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from datetime import date, datetime, timedelta, timezone
from pathlib import Path

import numpy as np

from .errors import ConfigurationError
from .stream import Post, PostStream

_CONSONANTS = "bcdfghklmnprstvz"
_VOWELS = "aeiou"


@dataclass
class TopicSpec:
    name: str
    words: list[str]
    hashtags: list[str]


@dataclass
class DriftEvent:
    """On ``day`` (1-based), ``topic`` switches to a new hashtag pool and/or the mixture changes.

    With ``ramp_days`` > 0 the new pool phases in over the preceding days: on
    ramp day j of r a post uses the new pool with probability j / (r + 1).
    """

    day: int
    topic: int | None = None
    hashtags: list[str] | None = None
    mixture: list[float] | None = None
    ramp_days: int = 0


@dataclass
class CorpusSpec:
    topics: list[TopicSpec]
    mixture: list[float]
    days: int = 30
    posts_per_day: int = 100
    start_date: str = "2020-08-01"
    seed: int = 0
    drifts: list[DriftEvent] = field(default_factory=list)
    filler_words: list[str] = field(default_factory=list)
    words_per_post: tuple[int, int] = (8, 20)
    tags_per_post: tuple[int, int] = (1, 3)
    signature_size: int = 4
    signature_share: float = 0.6
    filler_share: float = 0.15
    hashtag_zipf: float = 0.8

    def validate(self) -> None:
        if not self.topics:
            raise ConfigurationError("at least one topic required")
        if self.days < 1 or self.posts_per_day < 1:
            raise ConfigurationError("days and posts_per_day must be >= 1")
        _check_mixture(self.mixture, len(self.topics))
        for t in self.topics:
            if not t.words or not t.hashtags:
                raise ConfigurationError(f"topic {t.name!r} needs words and hashtags")
        for ev in self.drifts:
            if not 1 < ev.day <= self.days:
                raise ConfigurationError(f"drift day {ev.day} outside (1, {self.days}]")
            if ev.ramp_days < 0 or ev.day - ev.ramp_days <= 1:
                raise ConfigurationError(f"drift ramp on day {ev.day} must start inside the simulated range")
            if ev.hashtags is not None:
                if ev.topic is None or not 0 <= ev.topic < len(self.topics):
                    raise ConfigurationError(f"drift on day {ev.day} names an invalid topic")
                if not ev.hashtags:
                    raise ConfigurationError(f"drift on day {ev.day} has an empty hashtag pool")
            if ev.mixture is not None:
                _check_mixture(ev.mixture, len(self.topics))
        lo, hi = self.words_per_post
        if not 1 <= lo <= hi:
            raise ConfigurationError("words_per_post must satisfy 1 <= lo <= hi")
        lo, hi = self.tags_per_post
        if not 1 <= lo <= hi:
            raise ConfigurationError("tags_per_post must satisfy 1 <= lo <= hi")
        try:
            date.fromisoformat(self.start_date)
        except ValueError:
            raise ConfigurationError(f"bad start_date {self.start_date!r}") from None

    @property
    def first_day(self) -> date:
        return date.fromisoformat(self.start_date)

    def day_date(self, day: int) -> date:
        """Calendar date of 1-based simulation day ``day``."""
        return self.first_day + timedelta(days=day - 1)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, raw: dict) -> "CorpusSpec":
        raw = dict(raw)
        try:
            raw["topics"] = [TopicSpec(**t) for t in raw["topics"]]
            raw["drifts"] = [DriftEvent(**d) for d in raw.get("drifts", [])]
            for key in ("words_per_post", "tags_per_post"):
                if key in raw:
                    raw[key] = tuple(raw[key])
            spec = cls(**raw)
        except (KeyError, TypeError) as exc:
            raise ConfigurationError(f"bad corpus spec: {exc}") from None
        return spec

    @classmethod
    def load(cls, path: str | Path) -> "CorpusSpec":
        with open(path, encoding="utf-8") as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigurationError(f"corpus spec is not valid JSON: {exc}") from None
        return cls.from_dict(raw)

    def dump(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")


def _check_mixture(mixture, n_topics: int) -> None:
    if len(mixture) != n_topics:
        raise ConfigurationError(f"invalid mixture: {len(mixture)} weights for {n_topics} topics")
    if any(w < 0 for w in mixture) or abs(sum(mixture) - 1.0) > 1e-9:
        raise ConfigurationError(f"invalid mixture: weights {mixture} must be non-negative and sum to 1")


def _zipf_weights(n: int, s: float) -> np.ndarray:
    w = 1.0 / np.arange(1, n + 1) ** s
    return w / w.sum()


def _signatures(rng: np.random.Generator, n_words: int, pool: list[str], size: int) -> dict[str, np.ndarray]:
    size = min(size, n_words)
    return {h: rng.choice(n_words, size=size, replace=False) for h in pool}


def generate_corpus(spec: CorpusSpec) -> PostStream:
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    topics = spec.topics
    pools = [list(t.hashtags) for t in topics]
    sigs = [_signatures(rng, len(t.words), pools[i], spec.signature_size) for i, t in enumerate(topics)]
    mixture = np.asarray(spec.mixture, dtype=float)
    drifts_by_day: dict[int, list[DriftEvent]] = {}
    for ev in spec.drifts:
        drifts_by_day.setdefault(ev.day, []).append(ev)

    ramps = []  # (topic, start day, completion day, event) for phased drifts
    ramps_by_topic: dict[int, tuple] = {}
    for ev in spec.drifts:
        if ev.hashtags is not None and ev.ramp_days > 0:
            ramps.append((ev.topic, ev.day - ev.ramp_days, ev.day, ev))

    posts: list[Post] = []
    for day in range(1, spec.days + 1):
        for topic_idx, start, end, ev in ramps:
            if day == start:
                pool = list(ev.hashtags)
                ramps_by_topic[topic_idx] = (start, end, pool,
                                             _signatures(rng, len(topics[topic_idx].words), pool, spec.signature_size))
        for ev in drifts_by_day.get(day, []):
            if ev.hashtags is not None:
                ramp = ramps_by_topic.pop(ev.topic, None)
                if ramp is not None:
                    pools[ev.topic], sigs[ev.topic] = ramp[2], ramp[3]
                else:
                    pools[ev.topic] = list(ev.hashtags)
                    sigs[ev.topic] = _signatures(rng, len(topics[ev.topic].words), pools[ev.topic], spec.signature_size)
            if ev.mixture is not None:
                mixture = np.asarray(ev.mixture, dtype=float)
        midnight = datetime.combine(spec.day_date(day), datetime.min.time(), tzinfo=timezone.utc)
        seconds = np.sort(rng.integers(0, 86400, spec.posts_per_day))
        for i in range(spec.posts_per_day):
            t = int(rng.choice(len(topics), p=mixture))
            topic, pool, sig = topics[t], pools[t], sigs[t]
            ramp = ramps_by_topic.get(t)
            if ramp is not None:
                start, end, new_pool, new_sig = ramp
                if rng.random() < (day - start + 1) / (end - start + 1):
                    pool, sig = new_pool, new_sig
            n_tags = int(rng.integers(spec.tags_per_post[0], spec.tags_per_post[1] + 1))
            n_tags = min(n_tags, len(pool))
            tag_idx = rng.choice(len(pool), size=n_tags, replace=False, p=_zipf_weights(len(pool), spec.hashtag_zipf))
            tags = [pool[j] for j in tag_idx]
            sig_words = np.concatenate([sig[h] for h in tags])

            n_words = int(rng.integers(spec.words_per_post[0], spec.words_per_post[1] + 1))
            words = []
            for _ in range(n_words):
                u = rng.random()
                if u < spec.filler_share and spec.filler_words:
                    words.append(spec.filler_words[int(rng.integers(len(spec.filler_words)))])
                elif u < spec.filler_share + spec.signature_share:
                    words.append(topic.words[int(sig_words[rng.integers(len(sig_words))])])
                else:
                    words.append(topic.words[int(rng.integers(len(topic.words)))])
            for h in tags:
                words.insert(int(rng.integers(len(words) + 1)), "#" + h)
            ts = midnight + timedelta(seconds=int(seconds[i]))
            posts.append(Post(f"d{day:03d}p{i:04d}", ts, " ".join(words), tuple(tags)))
    return PostStream(posts)


def write_corpus(spec: CorpusSpec, path: str | Path) -> int:
    stream = generate_corpus(spec)
    stream.dump(path)
    return len(stream)


def pseudo_words(rng: np.random.Generator, n: int, syllables: tuple[int, int] = (2, 3), taken: set | None = None) -> list[str]:
    taken = set() if taken is None else taken
    out = []
    while len(out) < n:
        k = int(rng.integers(syllables[0], syllables[1] + 1))
        w = "".join(rng.choice(list(_CONSONANTS)) + rng.choice(list(_VOWELS)) for _ in range(k))
        if w not in taken:
            taken.add(w)
            out.append(w)
    return out


def make_spec(
    *,
    n_topics: int = 2,
    words_per_topic: int = 40,
    hashtags_per_topic: int = 8,
    drift_days: tuple[int, ...] = (),
    ramp_days: int = 0,
    days: int = 30,
    posts_per_day: int = 100,
    seed: int = 0,
    start_date: str = "2020-08-01",
    n_filler: int = 12,
) -> CorpusSpec:
    """A desk-scale spec where every drift day replaces all topic pools at once."""
    rng = np.random.default_rng([seed, 7919])
    taken: set[str] = set()
    filler = pseudo_words(rng, n_filler, (1, 2), taken)
    topics = []
    for i in range(n_topics):
        words = pseudo_words(rng, words_per_topic, (2, 3), taken)
        tags = pseudo_words(rng, hashtags_per_topic, (3, 4), taken)
        topics.append(TopicSpec(f"topic{i}", words, tags))
    drifts = []
    for day in drift_days:
        for i in range(n_topics):
            drifts.append(DriftEvent(day, i, pseudo_words(rng, hashtags_per_topic, (3, 4), taken), ramp_days=ramp_days))
    return CorpusSpec(
        topics=topics,
        mixture=[1.0 / n_topics] * n_topics,
        days=days,
        posts_per_day=posts_per_day,
        start_date=start_date,
        seed=seed,
        drifts=drifts,
        filler_words=filler,
    )


def stationary_spec(seed: int = 0, days: int = 30, posts_per_day: int = 100, n_topics: int = 2) -> CorpusSpec:
    return make_spec(n_topics=n_topics, days=days, posts_per_day=posts_per_day, seed=seed)


def single_drift_spec(seed: int = 0, drift_day: int = 20, days: int = 30, posts_per_day: int = 100) -> CorpusSpec:
    return make_spec(drift_days=(drift_day,), days=days, posts_per_day=posts_per_day, seed=seed)


def two_drift_spec(seed: int = 0, drift_days: tuple[int, int] = (25, 43), days: int = 60,
                   posts_per_day: int = 100, ramp_days: int = 5) -> CorpusSpec:
    return make_spec(drift_days=drift_days, ramp_days=ramp_days, days=days, posts_per_day=posts_per_day, seed=seed)
