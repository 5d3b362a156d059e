"""Tests for representation scans and the counting lemmas."""

from __future__ import annotations

import math

import pytest

from primeab.arith import factorize
from primeab.exceptions import ParameterError, ResourceError, SearchExhaustedError
from primeab.model import RepresentationRecord
from primeab.verify import lemma71_ratio, lemma72_check, min_theta, recheck, scan_range, selberg_G


def test_min_theta_small_n() -> None:
    record = min_theta(100)
    assert (record.p, record.a, record.b) == (97, 1, 3)
    assert record.theta_n == pytest.approx(math.log(3) / math.log(100))
    assert recheck(record, 0.01)


def test_min_theta_prefers_smallest_product() -> None:
    # 1000 - 3 = 997 is prime, 1000 - 1 and 1000 - 2 are not
    record = min_theta(1000)
    assert record.p == 997
    assert record.a * record.b == 3


def test_min_theta_arguments() -> None:
    with pytest.raises(ParameterError):
        min_theta(99)
    with pytest.raises(ParameterError):
        min_theta(1000, delta=0.2)
    with pytest.raises(ParameterError):
        min_theta(1000, delta=0.0)


def test_min_theta_never_grows_as_delta_shrinks() -> None:
    for n in range(1000, 1300):
        thetas = []
        for delta in (0.09, 0.05, 0.01):
            try:
                thetas.append(min_theta(n, delta).theta_n)
            except SearchExhaustedError:
                thetas.append(1.0)
        assert thetas == sorted(thetas, reverse=True), n


def test_recheck_rejects_bad_records() -> None:
    good = RepresentationRecord(n=100, p=97, a=1, b=3, theta_n=0.24, balance=0.24)
    assert recheck(good)
    composite = RepresentationRecord(n=100, p=91, a=3, b=3, theta_n=0.48, balance=0.49)
    assert not recheck(composite)
    unbalanced = RepresentationRecord(n=1000, p=503, a=1, b=497, theta_n=0.9, balance=1.0)
    assert not recheck(unbalanced, 0.01)


def test_scan_structure() -> None:
    summary = scan_range(100, 3000, theta_budget=0.3)
    assert len(summary.records) + len(summary.exhausted) == 2901
    over = [r.n for r in summary.records if r.theta_n > 0.3]
    assert summary.failures == sorted(over + summary.exhausted)
    assert sum(summary.histogram) == len(summary.records)
    assert len(summary.bin_edges) == len(summary.histogram) + 1
    assert summary.worst_theta == max(r.theta_n for r in summary.records)
    assert all(recheck(r, summary.delta) for r in summary.records)


def test_failures_shrink_as_budget_grows() -> None:
    lo, hi = 2000, 2600
    budgets = (0.0, 0.2, 0.3, 0.45, 0.56)
    failures = [set(scan_range(lo, hi, theta_budget=b).failures) for b in budgets]
    for wider, narrower in zip(failures, failures[1:]):
        assert narrower <= wider
    composite = {n for n in range(lo, hi + 1) if factorize(n - 1).factors != ((n - 1, 1),)}
    assert failures[0] == composite


def test_scan_is_thread_independent() -> None:
    assert scan_range(5000, 6500, threads=1) == scan_range(5000, 6500, threads=4)


def test_scan_guards() -> None:
    with pytest.raises(ParameterError):
        scan_range(50, 200)
    with pytest.raises(ParameterError):
        scan_range(300, 200)
    with pytest.raises(ParameterError):
        scan_range(100, 200, theta_budget=1.0)
    with pytest.raises(ResourceError):
        scan_range(10**9, 10**9 + 10)


def test_lemma71_ratio_near_one() -> None:
    ratio = lemma71_ratio(10**6, 10**4, 3)
    assert 0 < ratio < 2
    assert 0 < lemma71_ratio(10**6, 10**4, 1) < 2


def test_lemma71_arguments() -> None:
    with pytest.raises(ParameterError):
        lemma71_ratio(10**6, 5, 2)
    with pytest.raises(ParameterError):
        lemma71_ratio(100, 60, 1)


@pytest.mark.parametrize(("d", "n"), [(1, 1), (2, 1), (2, 3)])
def test_lemma72_main_term(d, n) -> None:
    check = lemma72_check(10**5, d, n)
    assert check.relative_error < 1e-3
    assert check.empirical_c < 1


def test_lemma72_arguments() -> None:
    with pytest.raises(ParameterError):
        lemma72_check(100, 2, 4)
    with pytest.raises(ResourceError):
        lemma72_check(10**9, 1, 1)
    assert lemma72_check(1, 2, 1).lhs == 0.0


def test_selberg_G() -> None:
    assert selberg_G(10**12, 0.0) > 0
    assert selberg_G(10**12, 5.0) == 0.0
    with pytest.raises(ParameterError):
        selberg_G(10**12, -1.0)


@pytest.mark.slow
def test_representations_found_above_hundred_thousand() -> None:
    summary = scan_range(10**5, 10**5 + 10**4, delta=0.01, theta_budget=0.56, threads=4)
    assert summary.exhausted == []
    assert summary.failures == []
    assert summary.worst_theta <= 0.56


@pytest.mark.slow
def test_lemma72_error_grid() -> None:
    for E in (10**4, 10**5, 10**6):
        for d in (1, 2, 6):
            for n in (1, 5, 77):
                check = lemma72_check(E, d, n)
                assert check.empirical_c <= 5, (E, d, n)
    check = lemma72_check(10**6, 1, 1)
    assert check.lhs / 10**6 == pytest.approx(1.9435964, abs=1e-3)
