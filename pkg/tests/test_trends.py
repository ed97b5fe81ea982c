from __future__ import annotations

import csv
import itertools
from datetime import date
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from trendshift.errors import ConfigurationError
from trendshift.evaluation import rjd_oracle
from trendshift.trends import TrendingSet, detect_shift, rank, rjd, top_hashtags, write_shift_log


def ranked_sets(max_size=15, alphabet=20):
    return st.lists(st.integers(0, alphabet - 1).map(lambda i: f"h{i}"), unique=True, max_size=max_size)


def exact_rjd(h1, h2) -> Fraction:
    """Rational-arithmetic version of the definitional sums."""
    def r(s, h):
        return len(s) - s.index(h) if h in s else 0

    union = set(h1) | set(h2)
    inter = sum(min(r(h1, h), r(h2, h)) for h in set(h1) & set(h2))
    den = sum(Fraction(r(h1, h) + r(h2, h), 2) for h in union)
    return Fraction(0) if den == 0 else 1 - Fraction(inter) / den


class TestTopHashtags:
    def test_top_two(self):
        assert top_hashtags({"a": 5, "b": 3, "c": 1}, 2).entries == (("a", 5), ("b", 3))

    def test_lexicographic_tie(self):
        assert top_hashtags({"b": 2, "a": 2}, 1).entries == (("a", 2),)

    def test_empty_table(self):
        ts = top_hashtags({}, 10)
        assert len(ts) == 0 and ts.hashtags == []

    @given(st.dictionaries(st.text("abcdef", min_size=1, max_size=3), st.integers(1, 6), max_size=25),
           st.integers(1, 12))
    def test_matches_full_sort_oracle(self, counts, n):
        expected = sorted(counts.items(), key=lambda e: (-e[1], e[0]))[:n]
        assert list(top_hashtags(counts, n).entries) == expected

    def test_rejects_bad_n(self):
        with pytest.raises(ConfigurationError):
            top_hashtags({"a": 1}, 0)

    def test_trending_set_invariants(self):
        with pytest.raises(ValueError):
            TrendingSet((("a", 1), ("b", 3)), 5)
        with pytest.raises(ValueError):
            TrendingSet((("a", 1), ("b", 1), ("c", 1)), 2)


class TestRank:
    def test_positions(self):
        s = ["a", "b", "c"]
        assert (rank(s, "a"), rank(s, "c"), rank(s, "z")) == (3, 1, 0)

    def test_trending_set_rank(self):
        ts = top_hashtags({"a": 3, "b": 2, "c": 1}, 5)
        assert ts.rank("a") == 3  # n_eff, not capacity


class TestRJD:
    def test_worked_example(self):
        assert rjd(["a", "b", "c"], ["b", "a", "d"]) == pytest.approx(1 - 4 / 6, abs=1e-15)
        assert rjd_oracle(["a", "b", "c"], ["b", "a", "d"]) == pytest.approx(1 - 4 / 6, abs=1e-15)

    def test_swap_of_two(self):
        assert rjd(["a", "b"], ["b", "a"]) == pytest.approx(1 - 2 / 3, abs=1e-15)

    def test_edge_cases(self):
        assert rjd([], []) == 0.0
        assert rjd([], ["a"]) == 1.0
        assert rjd_oracle([], []) == 0.0

    def test_reversal_n10(self):
        s = [f"h{i}" for i in range(10)]
        assert abs(rjd(s, s[::-1]) - (1 - 30 / 55)) < 1e-12

    @given(ranked_sets(), ranked_sets())
    def test_matches_oracle(self, a, b):
        assert abs(rjd(a, b) - rjd_oracle(a, b)) < 1e-12
        assert abs(rjd(a, b) - float(exact_rjd(a, b))) < 1e-12

    @given(ranked_sets(), ranked_sets())
    def test_symmetric_and_bounded(self, a, b):
        d = rjd(a, b)
        assert 0.0 <= d <= 1.0
        assert d == pytest.approx(rjd(b, a), abs=1e-15)

    @given(ranked_sets(max_size=15))
    def test_identity(self, a):
        assert rjd(a, list(a)) == 0.0

    @given(st.lists(st.integers(0, 9), unique=True, min_size=1), st.lists(st.integers(10, 19), unique=True, min_size=1))
    def test_disjoint(self, a, b):
        assert rjd([f"h{i}" for i in a], [f"h{i}" for i in b]) == 1.0

    @pytest.mark.parametrize("n", range(1, 8))
    def test_permutation_bound_exhaustive(self, n):
        items = [f"h{i}" for i in range(n)]
        bound = rjd(items, items[::-1])
        for perm in itertools.permutations(items):
            assert rjd(items, list(perm)) <= bound + 1e-12

    @given(st.permutations([f"h{i}" for i in range(10)]))
    def test_reordering_never_triggers(self, perm):
        items = [f"h{i}" for i in range(10)]
        assert rjd(items, perm) < 0.9


class TestDetect:
    def test_identical_no_event(self):
        ts = top_hashtags({"a": 3, "b": 2}, 10)
        assert detect_shift(ts, ts, 0.9) is None

    def test_disjoint_event(self):
        old = top_hashtags({"a": 3, "b": 2}, 10)
        new = top_hashtags({"x": 3, "y": 2}, 10, date(2020, 8, 20))
        ev = detect_shift(old, new, 0.9)
        assert ev is not None and ev.delta == 1.0 and ev.date == date(2020, 8, 20)

    def test_worked_example_threshold(self):
        old = top_hashtags({"a": 3, "b": 2, "c": 1}, 3)
        new = top_hashtags({"b": 3, "a": 2, "d": 1}, 3)
        ev = detect_shift(old, new, 0.3)
        assert ev.delta == pytest.approx(1 / 3)

    def test_threshold_is_inclusive(self):
        old = top_hashtags({"a": 2, "b": 1}, 2)
        new = top_hashtags({"b": 2, "a": 1}, 2)
        delta = rjd(old, new)
        assert detect_shift(old, new, delta) is not None
        assert detect_shift(old, new, np.nextafter(delta, 1.0)) is None

    @pytest.mark.parametrize("omega", [-0.1, 1.01])
    def test_omega_range(self, omega):
        ts = top_hashtags({"a": 1}, 1)
        with pytest.raises(ConfigurationError, match="omega out of range"):
            detect_shift(ts, ts, omega)

    def test_shift_log_columns(self, tmp_path):
        old = top_hashtags({"a": 3, "b": 2}, 10)
        new = top_hashtags({"x": 3, "y": 2}, 10)
        ev = detect_shift(old, new, 0.9, date(2020, 8, 20))
        write_shift_log([ev], tmp_path / "s.csv")
        rows = list(csv.DictReader(open(tmp_path / "s.csv", encoding="utf-8")))
        assert rows == [{"date": "2020-08-20", "delta": "1.000000", "omega": "0.9",
                         "previous_set": "a|b", "current_set": "x|y"}]
