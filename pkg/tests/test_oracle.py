"""Attack-enumeration oracle tests: counts, hand instances, and sweeps."""

import json
from collections import Counter

import numpy as np
import pytest

from nncert.data import Dataset, Example, poisoning_size
from nncert.errors import BudgetTooLarge, DatasetTooSmall
from nncert.oracle import (
    AttackSpace,
    NeighborRule,
    enumerate_poisonings,
    estimate_work,
    individual_sweep,
    joint_sweep,
    verify_individual,
    verify_joint,
)

LABELS_1_2 = 2


def base_two_rows():
    return Dataset(np.array([[0.0, 0.0], [1.0, 0.0]]), np.array([1, 2]), LABELS_1_2)


def test_budget_zero_enumerates_only_the_base():
    space = AttackSpace(base_two_rows(), (), 0)
    sets = list(enumerate_poisonings(space))
    assert len(sets) == 1
    assert Counter(sets[0].example_keys()) == Counter(base_two_rows().example_keys())


def test_budget_one_counts_every_distinct_multiset():
    base = base_two_rows()
    pool = (Example(np.array([2.0, 2.0]), 1),)
    space = AttackSpace(base, pool, 1)
    sets = list(enumerate_poisonings(space))
    # base, two removals, one addition, and removal+addition pairs: 6 in all
    assert len(sets) == 6
    keys = [tuple(sorted(ds.example_keys())) for ds in sets]
    assert len(set(keys)) == 6
    for ds in sets:
        assert poisoning_size(base, ds) <= 1
    assert estimate_work(space) >= 6


def test_duplicate_base_rows_collapse_removals():
    base = Dataset(np.array([[0.0, 0.0], [0.0, 0.0]]), np.array([1, 1]), LABELS_1_2)
    pool = (Example(np.array([2.0, 2.0]), 1),)
    sets = list(enumerate_poisonings(AttackSpace(base, pool, 1)))
    # removing either copy gives the same multiset: base, base-x, base+p, base-x+p
    assert len(sets) == 4


def test_enumeration_respects_the_work_ceiling():
    base = Dataset(
        np.arange(12, dtype=np.float64).reshape(6, 2), np.array([1, 2, 1, 2, 1, 2]), 2
    )
    pool = tuple(
        Example(np.array([float(i), float(j)]), 1 + (i + j) % 2)
        for i in range(4)
        for j in range(4)
    )
    space = AttackSpace(base, pool, 2, ceiling=10)
    with pytest.raises(BudgetTooLarge):
        list(enumerate_poisonings(space))


def test_attack_space_validation():
    base = base_two_rows()
    with pytest.raises(ValueError):
        AttackSpace(base, (), -1)
    with pytest.raises(ValueError):
        AttackSpace(base, (Example(np.array([1.0, 2.0, 3.0]), 1),), 1)
    with pytest.raises(ValueError):
        NeighborRule("knn")
    with pytest.raises(ValueError):
        NeighborRule("rnn", k=3, r=1.0)
    with pytest.raises(ValueError):
        NeighborRule("lexicographic", k=1)


def test_verify_individual_on_a_hand_instance():
    # three label-1 votes in the unit ball: e* = 1, and the cheapest flip is
    # two replacements (swap two of the votes for label 2)
    base = Dataset(
        np.array([[0.0, 0.0], [0.0, 0.0], [0.0, 0.0], [3.0, 3.0]]),
        np.array([1, 1, 1, 2]),
        LABELS_1_2,
    )
    pool = (
        Example(np.array([0.0, 0.0]), 2),
        Example(np.array([1.0, 0.0]), 2),
    )
    space = AttackSpace(base, pool, 2)
    rule = NeighborRule("rnn", r=1.0)
    result = verify_individual(space, [0.0, 0.0], 1, rule)
    assert result.ok
    assert result.prediction == 1
    assert result.claimed_e_star == 1
    assert result.flip_size == 2
    assert result.enumerated > 6


def test_verify_individual_flags_inflated_claims():
    base = Dataset(
        np.array([[0.0, 0.0], [0.0, 0.0], [0.0, 0.0], [3.0, 3.0]]),
        np.array([1, 1, 1, 2]),
        LABELS_1_2,
    )
    pool = (
        Example(np.array([0.0, 0.0]), 2),
        Example(np.array([1.0, 0.0]), 2),
    )
    space = AttackSpace(base, pool, 2)
    rule = NeighborRule("rnn", r=1.0)
    result = verify_individual(space, [0.0, 0.0], 1, rule, claimed_e_star=2)
    assert not result.ok
    assert all(v["check"] == "individual" for v in result.violations)
    assert "size 2" in result.violations[0]["detail"]


def test_verify_individual_guards_knn_removals():
    base = Dataset(
        np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]),
        np.array([1, 2, 1, 2]),
        LABELS_1_2,
    )
    space = AttackSpace(base, (), 2)
    with pytest.raises(DatasetTooSmall):
        verify_individual(space, [0.0, 0.0], 1, NeighborRule("knn", k=3))


def test_verify_joint_on_a_grouping_showcase():
    # one unassailable test point, one hopeless, and a pair whose shared
    # budget cannot flip both: the aggregate bound at e=1 is 1/2, double the
    # individual bound, and exhaustive attack confirms it
    base = Dataset(
        np.array(
            [[-1.0, 0.0], [0.0, -1.0], [0.0, 1.0], [1.0, 0.0], [1.0, 0.0], [10.0, 0.0]]
        ),
        np.array([1, 1, 1, 1, 1, 2]),
        LABELS_1_2,
    )
    xs = np.array([[0.0, 0.0], [10.0, 1.0], [9.0, 0.0], [2.0, 0.0]])
    ys = np.array([1, 1, 2, 1])
    pool = tuple(
        Example(np.array([float(i), 0.0]), label)
        for i in (0, 1, 2, 9, 10)
        for label in (1, 2)
    )
    space = AttackSpace(base, pool, 1)
    result = verify_joint(space, xs, ys, NeighborRule("rnn", r=1.0), 1)
    assert result.ok
    assert result.enumerated > 0
    island = result.bounds["joint-island"]
    assert island["joint_ca"] == "1/2"
    assert sorted(map(tuple, island["groups"])) == [(0,), (1,), (2, 3)]
    assert set(result.bounds) == {"joint-island", "joint-rd"}


def test_verify_joint_requires_rnn():
    space = AttackSpace(base_two_rows(), (), 1)
    with pytest.raises(ValueError):
        verify_joint(space, [[0.0, 0.0]], [1], NeighborRule("knn", k=1), 1)


def test_individual_sweep_finds_no_violations():
    report = individual_sweep(count=12, seed=3)
    assert report.ok
    assert report.instances == 12
    assert report.enumerated > 0
    assert report.tightness_probed >= 1
    assert report.tightness_flipped >= 1
    payload = json.dumps(report.to_dict())
    assert "violations" in payload


def test_individual_sweep_catches_inflated_claims():
    report = individual_sweep(count=12, seed=3, claimed_slack=1)
    assert not report.ok
    first = report.violations[0]
    for key in ("check", "detail", "dataset", "instance", "algo", "params"):
        assert key in first


def test_joint_sweep_finds_no_violations():
    report = joint_sweep(count=8, seed=5)
    assert report.ok
    assert report.instances == 8
    assert report.enumerated > 0
    assert json.loads(json.dumps(report.to_dict()))["kind"] == "joint"
