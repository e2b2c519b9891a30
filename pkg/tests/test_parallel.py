"""Tests for the ordered task fan-out (parallel.py)."""

from __future__ import annotations

import threading
import time

import pytest

from gridwave.parallel import check_jobs, ordered_map


class TestOrderedMap:
    def test_results_follow_input_order(self) -> None:
        def slow_square(k: int) -> int:
            time.sleep(0.002 * (10 - k))
            return k * k

        assert ordered_map(slow_square, range(10), jobs=4) == [k * k for k in range(10)]

    def test_serial_and_pooled_agree(self) -> None:
        items = ["a", "bb", "ccc", "dddd", "eeeee"]
        assert ordered_map(len, items, jobs=1) == ordered_map(len, items, jobs=3)

    def test_serial_runs_on_the_calling_thread(self) -> None:
        seen = ordered_map(lambda _: threading.get_ident(), range(3), jobs=1)
        assert set(seen) == {threading.get_ident()}

    def test_empty_input(self) -> None:
        assert ordered_map(len, [], jobs=4) == []

    def test_errors_propagate(self) -> None:
        def fail(k: int) -> int:
            if k == 2:
                raise ValueError("bad item 2")
            return k

        with pytest.raises(ValueError, match="bad item 2"):
            ordered_map(fail, range(4), jobs=2)


class TestCheckJobs:
    def test_accepts_positive(self) -> None:
        assert check_jobs(3) == 3

    @pytest.mark.parametrize("jobs", [0, -2])
    def test_rejects_non_positive(self, jobs: int) -> None:
        with pytest.raises(ValueError, match="jobs must be >= 1"):
            check_jobs(jobs)
        with pytest.raises(ValueError, match="jobs must be >= 1"):
            ordered_map(len, ["x"], jobs=jobs)
