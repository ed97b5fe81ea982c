from __future__ import annotations

from datetime import date, datetime, timedelta, timezone

import pytest
from hypothesis import HealthCheck, settings

from trendshift.stream import Post

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

START = date(2020, 8, 1)


def make_post(pid: str, day: date | int, text: str, tags=(), second: int = 0) -> Post:
    if isinstance(day, int):
        day = START + timedelta(days=day - 1)
    ts = datetime(day.year, day.month, day.day, tzinfo=timezone.utc) + timedelta(seconds=second)
    return Post(pid, ts, text, tuple(tags))


@pytest.fixture(scope="session")
def two_topic_stream():
    """Small stationary two-topic corpus, 14 days."""
    from trendshift.corpus import generate_corpus, make_spec

    return generate_corpus(make_spec(n_topics=2, days=14, posts_per_day=80, seed=3))


@pytest.fixture(scope="session")
def bootstrapped(two_topic_stream):
    from trendshift.adaptation import bootstrap
    from trendshift.config import PipelineConfig

    cfg = PipelineConfig(seed=3)
    model, trending = bootstrap(two_topic_stream, two_topic_stream.last_day, cfg)
    return model, trending, cfg


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
