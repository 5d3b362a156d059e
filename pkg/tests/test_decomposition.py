"""Tests for decompositions, their intersection and the sieve weight."""

from __future__ import annotations

import json
import math
from dataclasses import replace
from importlib import resources

import numpy as np
import pytest

from primeab.arith import Factorization, factor_range, factorize
from primeab.decomposition import (
    Classification,
    Cutoff,
    CutoffKind,
    PiecewiseLinear,
    Term,
    build_decomposition,
    buchstab_split,
    classify,
    d1_layout,
    deficit_of,
    dump_plan,
    evaluate_lambda,
    intersect_decompositions,
    lambda_profile,
    lambda_values,
    load_plan,
    profile_over,
    read_plan,
    root_term,
    stub_decomposition,
    term_value,
)
from primeab.deficit import integrate_deficit, slice_region
from primeab.exceptions import ParameterError, UndeterminedError, UnsupportedStructureError
from primeab.model import DecompositionPlan
from primeab.regions import halfspace, region, union

D1_LEAVES = ["Z0", "Z1", "F1", "F2", "F3@", "F3x", "G_REG", "G", "FINAL4", "FINAL2"]


def _rho(facs: list[Factorization]) -> np.ndarray:
    return np.array([1.0 if f.factors == ((f.n, 1),) else 0.0 for f in facs])


def _window(x: int, length: int) -> list[Factorization]:
    return factor_range(x - length + 1, x)


# Buchstab splits


def test_split_root_at_z0() -> None:
    same, deeper = buchstab_split(root_term(), Cutoff.constant(0.1))
    assert same.depth == 0 and same.sign == 1
    assert same.cutoff == Cutoff.constant(0.1)
    assert deeper.depth == 1 and deeper.sign == -1
    assert deeper.cutoff.kind is CutoffKind.PREVIOUS_PRIME
    assert deeper.region.contains_many([[0.3], [0.1], [0.05], [0.5]]).tolist() == [True, True, False, False]


def test_split_twice_gives_three_terms() -> None:
    z0, f1 = buchstab_split(root_term(), Cutoff.constant(0.1))
    z1, f2 = buchstab_split(f1, Cutoff.constant(0.1))
    assert [t.sign for t in (z0, z1, f2)] == [1, -1, 1]
    assert f2.depth == 2
    assert f2.region.contains_many([[0.3, 0.2], [0.2, 0.3], [0.3, 0.05]]).tolist() == [True, False, False]


def test_equal_cutoffs_give_empty_term() -> None:
    _, deeper = buchstab_split(root_term(), Cutoff.constant(0.5))
    grid = np.linspace(0.0, 1.0, 1001)[:, None]
    assert not deeper.region.contains_many(grid).any()


def test_split_order_violations() -> None:
    with pytest.raises(ParameterError):
        buchstab_split(root_term(), Cutoff.constant(0.6))
    with pytest.raises(ParameterError):
        buchstab_split(root_term(), Cutoff.previous_prime())


def test_piecewise_minimum_and_regions() -> None:
    line = PiecewiseLinear(pieces=((0.0, 0.05, 0.2),))
    low = PiecewiseLinear.constant(0.1).minimum(line)
    assert low([0.1, 0.25, 0.5]).tolist() == pytest.approx([0.07, 0.1, 0.1])
    X = np.random.default_rng(3).uniform(0.0, 0.6, size=(1000, 2))
    above = low.at_least(2, 1).contains_many(X)
    below = low.below(2, 1).contains_many(X)
    assert np.all(above ^ below)
    assert Cutoff.piecewise(PiecewiseLinear.constant(0.1)).kind is CutoffKind.CONSTANT


# structure of the first decomposition


def test_d1_leaves(d1) -> None:
    assert [t.name for t in d1.terms] == D1_LEAVES
    assert all(t.sign == (-1) ** t.depth for t in d1.terms)
    assert [t.name for t in d1.discards()] == ["F2", "G"]
    assert d1.K == 4


def test_odd_K_rejected(d1) -> None:
    with pytest.raises(ParameterError):
        replace(d1, K=3)


def test_plan_round_trip(d1, tmp_path) -> None:
    packaged = json.loads(resources.files("primeab").joinpath("data/d1.json").read_text())
    assert dump_plan(d1) == DecompositionPlan(**packaged)
    path = tmp_path / "plan.json"
    path.write_text(dump_plan(d1).model_dump_json())
    assert [t.name for t in read_plan(path).terms] == D1_LEAVES
    assert [t.name for t in read_plan().terms] == D1_LEAVES


def test_plan_mismatch_rejected(d1) -> None:
    plan = dump_plan(d1)
    broken = plan.model_copy(update={"terms": list(reversed(plan.terms))})
    with pytest.raises(ParameterError):
        load_plan(broken)


# classification


def _term(name: str) -> Term:
    return Term(depth=2, region=region(name), cutoff=Cutoff.previous_prime(), sign=1, name=name)


@pytest.mark.parametrize(
    ("name", "expected"),
    [("F1b", Classification.REGULAR), ("F2", Classification.DISCARD), ("F3", Classification.DECOMPOSE)],
)
def test_classify(d1, name, expected) -> None:
    assert classify(_term(name), d1.typeI_domain, d1.typeII_domain) is expected


def test_classify_mixed_region_is_undetermined(d1) -> None:
    with pytest.raises(UndeterminedError):
        classify(_term("F"), d1.typeI_domain, d1.typeII_domain)
    empty = Term(depth=2, region=halfspace(2, {0: 1.0}, -2.0), cutoff=Cutoff.previous_prime(), sign=1)
    with pytest.raises(UndeterminedError):
        classify(empty, d1.typeI_domain, d1.typeII_domain)


# pointwise weight


def test_lambda_of_a_prime(d1) -> None:
    k = 999_983
    assert evaluate_lambda(d1, k, factorize(k), 10**6) == 1.0


def test_lambda_of_a_discarded_product(d1) -> None:
    # 331 * 11 * 139: (alpha_1, alpha_2) of (331, 11) falls in the discarded region
    k = 331 * 11 * 139
    fac = factorize(k)
    assert evaluate_lambda(d1, k, fac, 10**6) == -1.0
    f2 = next(t for t in d1.terms if t.name == "F2")
    assert term_value(f2, d1, fac, 10**6) == 1.0


def test_lambda_vanishes_on_small_prime_factors(d1) -> None:
    x = 10**6
    for k in (2 * 499_979, 3 * 333_331, 2**19):
        assert evaluate_lambda(d1, k, factorize(k), x) == 0.0


@pytest.mark.parametrize("p", [1009, 2003])
def test_lambda_at_a_prime_square(d1, p) -> None:
    x = p * p
    assert evaluate_lambda(d1, x, factorize(x), x) == 0.0
    facs = _window(x, 2_000)
    rho = _rho(facs)
    assert np.array_equal(lambda_values(d1, facs, x, terms=d1.terms), rho)
    assert np.all(lambda_values(d1, facs, x) <= rho)


def test_lambda_argument_checks(d1) -> None:
    with pytest.raises(ParameterError):
        evaluate_lambda(d1, 400_000, factorize(400_000), 10**6)
    with pytest.raises(ParameterError):
        evaluate_lambda(d1, 999_983, factorize(999_979), 10**6)
    with pytest.raises(ParameterError):
        Factorization(n=12, factors=((2, 2),))


def test_leaves_reassemble_rho(d1) -> None:
    x = 200_000
    facs = _window(x, 10_000)
    rho = _rho(facs)
    assert np.array_equal(lambda_values(d1, facs, x, terms=d1.terms), rho)
    lam = lambda_values(d1, facs, x)
    assert np.all(lam <= rho)
    for term in d1.discards():
        assert np.all(lambda_values(d1, facs, x, terms=[term]) >= 0)
    small = np.array([f.factors[0][0] < x**0.1 for f in facs])
    assert np.all(lam[small] == 0)


def test_split_is_reversible_pointwise() -> None:
    x = 200_000
    facs = _window(x, 10_000)
    z0, f1 = buchstab_split(root_term(), Cutoff.constant(0.1))
    z1, f2 = buchstab_split(f1, Cutoff.constant(0.1))
    d = stub_decomposition(role_reversal=False, deficit=0.0)
    parent = lambda_values(d, facs, x, terms=[f1])
    children = lambda_values(d, facs, x, terms=[z1, f2])
    assert np.array_equal(parent, children)
    assert np.array_equal(lambda_values(d, facs, x, terms=[z0, f1]), _rho(facs))


# profiles


def test_profile_positive(d1) -> None:
    profile = lambda_profile(d1, 10**6, threads=2)
    assert profile.sum_lambda > 0
    assert 0 <= profile.empirical_deficit <= 1
    assert profile.violations == 0
    assert profile.sum_lambda <= profile.sum_rho


def test_profile_of_primes_only(d1) -> None:
    x = 10**6
    ks = [999_953, 999_959, 999_961, 999_979, 999_983]
    profile = profile_over(d1, ks, [factorize(k) for k in ks], x)
    assert profile.sum_rho == 5
    assert profile.empirical_deficit == 0.0


def test_profile_window_checks(d1) -> None:
    with pytest.raises(ParameterError):
        lambda_profile(d1, 10**6, h0=600_000)
    with pytest.raises(ParameterError):
        lambda_profile(d1, 10**6, y=10**6 + 10)


# deficits and intersections


def test_no_discards_no_deficit(evaluator, mc_params) -> None:
    d = stub_decomposition(role_reversal=False, deficit=0.0)
    assert deficit_of(d, evaluator, mc_params).value == 0.0


def test_overlapping_union_below_sum(evaluator, mc_params) -> None:
    a = slice_region((0.4, 0.44), (0.2, 0.25))
    b = slice_region((0.42, 0.45), (0.2, 0.25))
    joint = integrate_deficit(union(a, b, name="ab"), 2, evaluator, mc_params)
    apart = integrate_deficit(a, 2, evaluator, mc_params) + integrate_deficit(b, 2, evaluator, mc_params)
    assert joint.value <= apart.value + 3 * math.hypot(joint.std_error, apart.std_error)


def test_intersect_with_itself_keeps_discards(d1) -> None:
    both = intersect_decompositions(d1, d1)
    assert [t.name for t in both.discards()] == ["F2", "G"]
    X = np.random.default_rng(9).uniform(0.1, 0.5, size=(20_000, 2))
    assert np.array_equal(both.depth2["discard"].contains_many(X), d1.depth2["discard"].contains_many(X))
    assert np.array_equal(both.depth2["regular"].contains_many(X), d1.depth2["regular"].contains_many(X))


def test_intersection_takes_lower_cutoffs(d1) -> None:
    other = build_decomposition(replace(d1_layout(), z0=0.12), name="D1b")
    for pair in ((d1, other), (other, d1)):
        combined = intersect_decompositions(*pair)
        assert combined.z0_exponent == 0.1
        assert combined.K == 4


def test_intersection_is_exact_partition(d1) -> None:
    other = build_decomposition(replace(d1_layout(), discard_region=None), name="D1c")
    combined = intersect_decompositions(d1, other)
    x = 200_000
    facs = _window(x, 5_000)
    assert np.array_equal(lambda_values(combined, facs, x, terms=combined.terms), _rho(facs))


def test_imported_role_reversals(d1) -> None:
    combined = intersect_decompositions(d1, stub_decomposition())
    assert combined.imported_deficit == pytest.approx(0.01)
    assert combined.name == "D1&D2"
    with pytest.raises(UnsupportedStructureError):
        intersect_decompositions(stub_decomposition(), d1)
    narrow = stub_decomposition(regular=halfspace(2, {0: 1.0, 1: 1.0}, -0.9))
    with pytest.raises(UnsupportedStructureError):
        intersect_decompositions(d1, narrow)


def test_intersection_needs_common_zeta(d1) -> None:
    with pytest.raises(ParameterError):
        intersect_decompositions(d1, replace(d1, zeta=0.2))


@pytest.mark.slow
def test_d1_deficit(d1, evaluator, mc_params) -> None:
    result = deficit_of(d1, evaluator, mc_params)
    assert result.value < 0.73
    assert set(result.components) == {"F2", "G"}


@pytest.mark.slow
def test_intersection_deficits(d1, evaluator, mc_params) -> None:
    alone = deficit_of(d1, evaluator, mc_params)
    doubled = deficit_of(intersect_decompositions(d1, d1), evaluator, mc_params)
    assert abs(doubled.value - alone.value) <= 4 * math.hypot(alone.std_error, doubled.std_error)
    without = build_decomposition(replace(d1_layout(), discard_region=None), name="D1c")
    one_way = deficit_of(intersect_decompositions(d1, without), evaluator, mc_params)
    other_way = deficit_of(intersect_decompositions(without, d1), evaluator, mc_params)
    assert abs(one_way.value - alone.value) <= 4 * math.hypot(alone.std_error, one_way.std_error)
    assert abs(one_way.value - other_way.value) <= 4 * math.hypot(one_way.std_error, other_way.std_error)
    combined = deficit_of(intersect_decompositions(d1, stub_decomposition()), evaluator, mc_params)
    assert combined.value < 0.75


@pytest.mark.slow
def test_profile_tracks_deficit_at_ten_million(d1, evaluator, mc_params) -> None:
    profile = lambda_profile(d1, 10**7, threads=4)
    assert profile.sum_lambda > 0
    assert profile.violations == 0
    assert abs(profile.empirical_deficit - deficit_of(d1, evaluator, mc_params).value) <= 0.1


@pytest.mark.slow
def test_no_violations_in_large_windows(d1) -> None:
    x = 10**7
    for y in (x, 8 * 10**6, 6 * 10**6):
        profile = lambda_profile(d1, x, y=y, h0=10**5, threads=4)
        assert profile.violations == 0
        assert profile.sum_lambda > 0


@pytest.mark.slow
def test_random_pairs_are_subadditive(evaluator, mc_params) -> None:
    rng = np.random.default_rng(20)
    layouts = []
    for z0 in (0.1, 0.11, 0.12):
        for discard in (region("F2"), None):
            for K in (2, 4):
                name = f"z{z0}-{'d' if discard is not None else 'n'}-K{K}"
                layouts.append(build_decomposition(replace(d1_layout(), z0=z0, discard_region=discard, K=K), name))
    alone = {d.name: deficit_of(d, evaluator, mc_params) for d in layouts}
    for _ in range(20):
        i, j = rng.choice(len(layouts), size=2, replace=False)
        a, b = layouts[i], layouts[j]
        both = deficit_of(intersect_decompositions(a, b), evaluator, mc_params)
        bound = alone[a.name].value + alone[b.name].value
        sigma = math.sqrt(both.std_error**2 + alone[a.name].std_error**2 + alone[b.name].std_error**2)
        assert both.value <= bound + 3 * sigma, (a.name, b.name)
