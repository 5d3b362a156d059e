"""Tests for exponent regions and their lifts."""

from __future__ import annotations

import itertools
import json

import numpy as np
import pytest

from primeab.exceptions import ComplexityGuardError, ParameterError
from primeab.regions import (
    E_region,
    H_region,
    LiftKind,
    Region,
    RegionSet,
    block_sum_vectors,
    catalog,
    contains,
    contains_many,
    difference,
    halfspace,
    in_E,
    in_H,
    intersect,
    lifted_contains,
    load_catalog,
    region,
    type_i_lift,
    type_ii_lift,
    union,
    with_width,
)


@pytest.mark.parametrize(
    ("alpha", "expected"),
    [((0.3, 0.2), True), ((0.05, 0.2), False), ((0.6, 0.5), False)],
)
def test_in_E(alpha, expected) -> None:
    assert in_E(alpha, 0.1) is expected


def test_in_E_needs_positive_zeta() -> None:
    with pytest.raises(ParameterError):
        in_E((0.3, 0.2), 0.0)


@pytest.mark.parametrize(
    ("alpha", "expected"),
    [
        ((0.4, 0.2), True),
        ((0.4, 0.35), False),
        ((0.2, 0.3), False),
        ((0.4, 0.25, 0.1), True),
        ((0.4, 0.2, 0.2), False),
    ],
)
def test_in_H(alpha, expected) -> None:
    assert in_H(alpha) is expected


def test_catalog_examples() -> None:
    r2 = region("R2")
    assert contains(r2, (0.5, 0.2))
    assert not contains(r2, (0.5, 0.28))
    assert contains(region("S1"), (0.5,))
    assert not contains(region("S1"), (0.56,))


def test_dimension_mismatch() -> None:
    with pytest.raises(ParameterError):
        contains(region("R2"), (0.1, 0.2, 0.3))
    with pytest.raises(ParameterError):
        union(region("R2"), region("S1"))
    with pytest.raises(ParameterError):
        region("NOPE")


def test_strict_boundary_excluded() -> None:
    f = region("F")
    assert not contains(f, (0.3, 0.3))
    assert contains(f, (0.3, 0.1))
    assert not contains(f, (0.5, 0.2))


def test_catalog_union_entries() -> None:
    f1 = region("F1")
    assert isinstance(f1, RegionSet)
    assert contains(f1, (0.47, 0.2))
    assert contains(f1, (0.3, 0.2))
    assert not contains(f1, (0.3, 0.11))
    assert set(catalog()) >= {"R2", "S1", "F", "F1", "F2", "F3", "G"}


def test_type_ii_lift_subset_sums() -> None:
    s1 = type_ii_lift(region("S1"))
    assert lifted_contains(s1, (0.3, 0.2, 0.1))
    assert not lifted_contains(s1, (0.3, 0.3, 0.3))
    assert lifted_contains(s1, (0.47,))


def test_type_i_lift_partitions() -> None:
    r2 = type_i_lift(region("R2"))
    assert lifted_contains(r2, (0.3, 0.25, 0.2))
    # every grouping of these three coordinates sums past 0.775
    assert not lifted_contains(r2, (0.4, 0.3, 0.2))


def _brute_type_i(base: Region, alpha: tuple[float, ...]) -> bool:
    j = base.dim
    for labels in itertools.product(range(j), repeat=len(alpha)):
        if set(labels) != set(range(j)):
            continue
        sums = [0.0] * j
        for a, label in zip(alpha, labels):
            sums[label] += a
        if contains(base, sums):
            return True
    return False


def test_type_i_lift_matches_enumeration() -> None:
    rng = np.random.default_rng(11)
    r2 = region("R2")
    lift = type_i_lift(r2)
    for alpha in rng.uniform(0.05, 0.45, size=(200, 3)):
        assert lifted_contains(lift, alpha) == _brute_type_i(r2, tuple(alpha))


def test_lifts_are_permutation_invariant() -> None:
    rng = np.random.default_rng(5)
    lifts = [type_i_lift(region("R2")), type_ii_lift(region("S1"))]
    for alpha in rng.uniform(0.05, 0.4, size=(100, 4)):
        for lift in lifts:
            answers = {lifted_contains(lift, perm) for perm in itertools.permutations(alpha)}
            assert len(answers) == 1


def test_type_i_lift_at_base_dimension() -> None:
    r2 = region("R2")
    lift = type_i_lift(r2)
    rng = np.random.default_rng(2)
    for alpha in rng.uniform(0.0, 0.6, size=(200, 2)):
        assert lifted_contains(lift, alpha) == (contains(r2, alpha) or contains(r2, alpha[::-1]))


def test_lift_complexity_guard() -> None:
    with pytest.raises(ComplexityGuardError):
        lifted_contains(type_i_lift(region("R2")), [0.01] * 13)


def test_lift_width_pins_coordinates() -> None:
    lift = with_width(type_ii_lift(region("S1")), 2)
    X = np.array([[0.3, 0.2, 0.1], [0.3, 0.1, 0.2]])
    assert lift.contains_many(X).tolist() == [True, False]
    assert lift.kind is LiftKind.TYPE_II


@pytest.mark.parametrize(
    ("lift", "alpha", "expected"),
    [
        (type_ii_lift(E_region(4, 0.01)), [0.05] * 11, True),
        (type_i_lift(E_region(4, 0.1)), [0.05] * 12, True),
        (type_i_lift(E_region(4, 0.2)), [0.05] * 12, False),
        (type_ii_lift(E_region(4, 0.15)), [0.05] * 12, True),
        (type_ii_lift(E_region(4, 0.2)), [0.05] * 12, False),
        (type_i_lift(E_region(4, 0.1)), [0.05] * 6 + [0.04] * 6, True),
    ],
)
def test_lifts_up_to_twelve_coordinates(lift, alpha, expected) -> None:
    assert lifted_contains(lift, alpha) is expected


def test_block_sums_agree_with_enumerated_groupings() -> None:
    rng = np.random.default_rng(11)
    lifts = [type_i_lift(region("R2")), type_ii_lift(region("S1")), type_ii_lift(E_region(3, 0.1))]
    for alpha in rng.uniform(0.02, 0.3, size=(40, 5)):
        for lift in lifts:
            sums = block_sum_vectors(alpha, lift.base.dim, lift.kind)
            by_blocks = sums.shape[0] > 0 and bool(lift.base.contains_many(sums).any())
            assert lifted_contains(lift, alpha) == by_blocks


def test_union_distributes() -> None:
    a, b = region("R2"), region("F")
    both = union(a, b)
    X = np.random.default_rng(0).uniform(0.0, 0.7, size=(2000, 2))
    expected = a.contains_many(X) | b.contains_many(X)
    assert np.array_equal(contains_many(both, X), expected)


def test_intersection_and_difference() -> None:
    a, b = region("F"), region("F3")
    X = np.random.default_rng(1).uniform(0.0, 0.6, size=(2000, 2))
    assert np.array_equal(intersect(a, b).contains_many(X), a.contains_many(X) & b.contains_many(X))
    assert np.array_equal(difference(a, b).contains_many(X), a.contains_many(X) & ~b.contains_many(X))


def test_monotone_in_constraints() -> None:
    base = region("F")
    tighter = base.constrain([1.0, 1.0], -0.45)
    X = np.random.default_rng(4).uniform(0.0, 0.6, size=(2000, 2))
    assert np.all(base.contains_many(X)[tighter.contains_many(X)])


def test_bounding_box_and_emptiness() -> None:
    lo, hi = region("F2").bounding_box()
    assert lo[0] >= 0.325 - 1e-12 and hi[0] <= 0.45 + 1e-12
    impossible = intersect(region("G"), halfspace(4, {0: 1.0}, -0.9))
    assert impossible.is_empty
    assert not region("G").is_empty


def test_H_region_matches_in_H() -> None:
    h3 = H_region(3)
    for alpha in np.random.default_rng(8).uniform(0.0, 0.5, size=(500, 3)):
        assert contains(h3, alpha) == in_H(alpha)


def test_load_catalog_from_file(tmp_path) -> None:
    path = tmp_path / "regions.json"
    path.write_text(
        json.dumps(
            {
                "version": 1,
                "regions": [
                    {"name": "A", "dim": 1, "constraints": [{"coeffs": [1.0], "constant": -0.2}]},
                    {"name": "B", "dim": 1, "union_of": ["A", "A"]},
                ],
            }
        )
    )
    regions = load_catalog(path)
    assert contains(regions["A"], (0.2,))
    assert not contains(regions["B"], (0.1,))
