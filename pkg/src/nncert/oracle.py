"""Brute-force attack enumeration for validating certificates on toy instances.

Every multiset reachable from a base training set by removing and adding at
most `budget` examples (additions drawn from a finite candidate pool) is
enumerated, and the classifier is re-run on each to confirm that no attack
within a certificate's claimed size ever breaks it.

Prediction over poisoned sets is reimplemented here from scratch (plain
Python sums and sorts) rather than imported, so a defect in the optimized
neighbor code shows up as an oracle disagreement instead of being trusted on
both sides. Only the rank-hash digest is shared, because the digest is part
of the classifier definition itself. Feature values are assumed exactly
representable (integer grids), so the two distance computations cannot drift.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .certify import (
    group_island,
    group_rd,
    individual_cert,
    joint_ca,
    joint_group_bound,
)
from .data import Dataset, Example
from .errors import BudgetTooLarge, DatasetTooSmall
from .neighbors import knn_neighbors, rank_hash, rnn_neighbors, tally

DEFAULT_CEILING = 2_000_000


@dataclass(frozen=True)
class NeighborRule:
    """Which classifier to attack: knn with k, or rnn with radius r."""

    algo: str
    k: int | None = None
    r: float | None = None

    def __post_init__(self):
        if self.algo not in ("knn", "rnn"):
            raise ValueError(f"unknown algorithm {self.algo!r}")
        if self.algo == "knn" and (self.k is None or self.r is not None):
            raise ValueError("knn requires k and forbids r")
        if self.algo == "rnn" and (self.r is None or self.k is not None):
            raise ValueError("rnn requires r and forbids k")

    def neighbors(self, dataset: Dataset, x):
        if self.algo == "knn":
            return knn_neighbors(dataset, x, self.k)
        return rnn_neighbors(dataset, x, self.r)


@dataclass(frozen=True)
class AttackSpace:
    """Base training set, finite addition pool, and the enumeration budget."""

    base: Dataset
    pool: tuple
    budget: int
    ceiling: int = DEFAULT_CEILING

    def __post_init__(self):
        object.__setattr__(self, "pool", tuple(self.pool))
        if self.budget < 0:
            raise ValueError(f"budget must be >= 0, got {self.budget}")
        for ex in self.pool:
            if ex.features.shape[0] != self.base.dim:
                raise ValueError("pool example dimension differs from base")


def estimate_work(space: AttackSpace) -> int:
    """Upper bound on (removal set, addition multiset) pairs to visit."""
    n, p, b = len(space.base), len(space.pool), space.budget
    removals = sum(math.comb(n, i) for i in range(min(b, n) + 1))
    additions = sum(math.comb(p + j - 1, j) for j in range(b + 1)) if p else 1
    return removals * additions


def _check_ceiling(space: AttackSpace) -> None:
    work = estimate_work(space)
    if work > space.ceiling:
        raise BudgetTooLarge(
            f"enumeration would visit about {work} candidate sets, "
            f"ceiling is {space.ceiling}"
        )


def _index_sets(space: AttackSpace):
    """Yield (kept base indices, added pool indices, poisoning size) once per
    distinct result multiset, base first, filtered to size <= budget.
    """
    base = space.base
    n = len(base)
    base_keys = base.example_keys()
    pool_keys = [ex.key() for ex in space.pool]
    base_counter = Counter(base_keys)
    seen = set()
    for removed in range(min(space.budget, n) + 1):
        for removal in itertools.combinations(range(n), removed):
            dropped = set(removal)
            kept = tuple(i for i in range(n) if i not in dropped)
            kept_keys = [base_keys[i] for i in kept]
            for added in range(space.budget + 1):
                for addition in itertools.combinations_with_replacement(
                    range(len(space.pool)), added
                ):
                    keys = kept_keys + [pool_keys[j] for j in addition]
                    canon = tuple(sorted(keys))
                    if canon in seen:
                        continue
                    seen.add(canon)
                    common = base_counter & Counter(keys)
                    size = max(n, len(keys)) - sum(common.values())
                    if size <= space.budget:
                        yield kept, addition, size


def _materialize(space: AttackSpace, kept, addition) -> Dataset:
    rows = [space.base.features[i] for i in kept]
    labs = [int(space.base.labels[i]) for i in kept]
    rows += [space.pool[j].features for j in addition]
    labs += [space.pool[j].label for j in addition]
    if rows:
        feats = np.stack(rows)
    else:
        feats = np.empty((0, space.base.dim), dtype=np.float64)
    return Dataset(feats, np.array(labs, dtype=np.int64), space.base.num_classes)


def enumerate_poisonings(space: AttackSpace):
    """Every training multiset within poisoning size `budget` of the base,
    each exactly once (the base itself included).
    """
    _check_ceiling(space)
    for kept, addition, _ in _index_sets(space):
        yield _materialize(space, kept, addition)


# ---------------------------------------------------------------------------
# independent predictor over enumerated sets


def _row_records(space: AttackSpace, x):
    """Per-row (distance, inverted digest, label) for base then pool rows.

    Plain Python arithmetic throughout; inverted digests make plain tuple
    sort equal to the classifier's digest-descending tie order.
    """
    records = []
    for features, label in itertools.chain(
        ((space.base.features[i], int(space.base.labels[i])) for i in range(len(space.base))),
        ((ex.features, ex.label) for ex in space.pool),
    ):
        dist = 0.0
        for a, bvals in zip(x, features):
            dist += abs(float(a) - float(bvals))
        digest = rank_hash(features, label)
        inverted = bytes(255 ^ byte for byte in digest)
        records.append((dist, inverted, label))
    return records


def _oracle_predict(rows, num_classes: int, rule: NeighborRule) -> int:
    if rule.algo == "rnn":
        votes = [label for dist, _, label in rows if dist <= rule.r]
    else:
        votes = [label for _, _, label in sorted(rows)[: rule.k]]
    counts = [0] * (num_classes + 1)
    for label in votes:
        counts[label] += 1
    return max(range(1, num_classes + 1), key=lambda l: (counts[l], l))


def _poisoned_rows(records, n_base: int, kept, addition):
    return [records[i] for i in kept] + [records[n_base + j] for j in addition]


def _describe(space: AttackSpace, kept, addition):
    """Canonical JSON-friendly form of a poisoned multiset."""
    rows = [
        ([float(v) for v in space.base.features[i]], int(space.base.labels[i]))
        for i in kept
    ]
    rows += [
        ([float(v) for v in space.pool[j].features], space.pool[j].label)
        for j in addition
    ]
    return sorted(rows)


# ---------------------------------------------------------------------------
# certificate verification


@dataclass(frozen=True)
class IndividualVerification:
    claimed_e_star: int
    budget: int
    prediction: int
    enumerated: int
    violations: tuple
    flip_size: int | None

    @property
    def ok(self) -> bool:
        return not self.violations


def verify_individual(
    space: AttackSpace, x, y: int, rule: NeighborRule, *, claimed_e_star=None
) -> IndividualVerification:
    """Check one certificate against every attack the space can express.

    The claim: the clean prediction survives every poisoning of size at most
    e_star. Enumeration runs to space.budget, so sizes past the claim double
    as a tightness probe; flip_size records the smallest flipping attack.
    `claimed_e_star` overrides the honest threshold (negative-testing hook).
    """
    _check_ceiling(space)
    if rule.algo == "knn" and len(space.base) - space.budget < rule.k:
        raise DatasetTooSmall(
            f"budget {space.budget} removals can drop the dataset below k={rule.k}"
        )
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    votes = tally(rule.neighbors(space.base, x), space.base.num_classes)
    cert = individual_cert(votes, y, algo=rule.algo)
    claimed = cert.e_star if claimed_e_star is None else claimed_e_star
    records = _row_records(space, x)
    baseline = _oracle_predict(
        _poisoned_rows(records, len(space.base), range(len(space.base)), ()),
        space.base.num_classes,
        rule,
    )
    violations = []
    if baseline != cert.a:
        violations.append(
            {
                "check": "baseline",
                "detail": f"oracle predicts {baseline}, classifier predicts {cert.a}",
                "dataset": _describe(space, tuple(range(len(space.base))), ()),
            }
        )
    flip_size = None
    enumerated = 0
    for kept, addition, size in _index_sets(space):
        enumerated += 1
        pred = _oracle_predict(
            _poisoned_rows(records, len(space.base), kept, addition),
            space.base.num_classes,
            rule,
        )
        if pred != cert.a:
            if flip_size is None or size < flip_size:
                flip_size = size
            if size <= claimed:
                violations.append(
                    {
                        "check": "individual",
                        "detail": (
                            f"size {size} attack changes prediction "
                            f"{cert.a} -> {pred}, claimed e*={claimed}"
                        ),
                        "dataset": _describe(space, kept, addition),
                    }
                )
    violations.sort(key=lambda v: (v["check"], str(v["dataset"]), v["detail"]))
    return IndividualVerification(
        claimed_e_star=claimed,
        budget=space.budget,
        prediction=cert.a,
        enumerated=enumerated,
        violations=tuple(violations),
        flip_size=flip_size,
    )


@dataclass(frozen=True)
class JointVerification:
    e: int
    enumerated: int
    bounds: dict
    violations: tuple

    @property
    def ok(self) -> bool:
        return not self.violations


def verify_joint(
    space: AttackSpace,
    test_features,
    test_labels,
    rule: NeighborRule,
    e: int,
    *,
    groupings=("joint-island", "joint-rd"),
    seed: int = 0,
) -> JointVerification:
    """Check group bounds: every attack of size <= e must leave at least
    w - 1 members of each group correctly classified, and overall accuracy
    at or above the aggregated bound.
    """
    if rule.algo != "rnn":
        raise ValueError("joint verification applies to rnn only")
    _check_ceiling(space)
    xs = [np.asarray(x, dtype=np.float64).reshape(-1) for x in test_features]
    ys = [int(y) for y in test_labels]
    certs = []
    for i, (x, y) in enumerate(zip(xs, ys)):
        votes = tally(rule.neighbors(space.base, x), space.base.num_classes)
        certs.append(individual_cert(votes, y, test_index=i, algo=rule.algo))
    certs = tuple(certs)
    plans = {}
    for method in groupings:
        if method == "joint-island":
            groups = group_island(certs, e)
        elif method == "joint-rd":
            groups = group_rd(certs, space.base.num_classes, seed)
        else:
            raise ValueError(f"unknown grouping {method!r}")
        plans[method] = (
            groups,
            [joint_group_bound(g, e) for g in groups],
            joint_ca(groups, e, certs=certs),
        )
    records = [_row_records(space, x) for x in xs]
    n_base = len(space.base)
    violations = []
    enumerated = 0
    for kept, addition, size in _index_sets(space):
        enumerated += 1
        if size > e:
            continue
        correct = [
            _oracle_predict(
                _poisoned_rows(records[i], n_base, kept, addition),
                space.base.num_classes,
                rule,
            )
            == ys[i]
            for i in range(len(xs))
        ]
        for method, (groups, bounds, bound_ca) in plans.items():
            for group, group_cert in zip(groups, bounds):
                survivors = sum(
                    1 for c in group.members if correct[c.test_index]
                )
                if survivors < group_cert.w - 1:
                    violations.append(
                        {
                            "check": method,
                            "detail": (
                                f"group {sorted(c.test_index for c in group.members)}"
                                f" keeps {survivors} < w-1={group_cert.w - 1}"
                                f" at size {size}"
                            ),
                            "dataset": _describe(space, kept, addition),
                        }
                    )
            achieved = Fraction(sum(correct), len(correct))
            if achieved < bound_ca:
                violations.append(
                    {
                        "check": method + "-aggregate",
                        "detail": (
                            f"accuracy {achieved} below bound {bound_ca}"
                            f" at size {size}"
                        ),
                        "dataset": _describe(space, kept, addition),
                    }
                )
    violations.sort(key=lambda v: (v["check"], str(v["dataset"]), v["detail"]))
    bounds = {
        method: {
            "joint_ca": str(plans[method][2]),
            "groups": [
                sorted(c.test_index for c in g.members)
                for g in plans[method][0]
            ],
            "w": [b.w for b in plans[method][1]],
        }
        for method in plans
    }
    return JointVerification(
        e=e, enumerated=enumerated, bounds=bounds, violations=tuple(violations)
    )


# ---------------------------------------------------------------------------
# randomized sweeps


GRID_SIDE = 4


def _grid_pool(num_classes: int) -> tuple:
    return tuple(
        Example(np.array([float(i), float(j)]), label)
        for i in range(GRID_SIDE)
        for j in range(GRID_SIDE)
        for label in range(1, num_classes + 1)
    )


@dataclass(frozen=True)
class SweepReport:
    kind: str
    seed: int
    instances: int
    enumerated: int
    violations: tuple
    tightness_probed: int = 0
    tightness_flipped: int = 0

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "seed": self.seed,
            "instances": self.instances,
            "datasets_enumerated": self.enumerated,
            "violations": list(self.violations),
            "tightness": {
                "probed": self.tightness_probed,
                "flipped": self.tightness_flipped,
            },
        }


def _random_instance(rng, *, min_n: int, num_classes: int):
    n = int(rng.integers(min_n, 7))
    feats = rng.integers(0, GRID_SIDE, size=(n, 2)).astype(np.float64)
    labs = rng.integers(1, num_classes + 1, size=n).astype(np.int64)
    return Dataset(feats, labs, num_classes)


def individual_sweep(
    count: int = 100, seed: int = 0, *, claimed_slack: int = 0,
    ceiling: int = DEFAULT_CEILING,
) -> SweepReport:
    """Random toy instances, alternating kNN and rNN; checks every
    certificate by exhaustive attack and probes tightness one step past it.

    claimed_slack inflates each claimed e_star (for demonstrating that the
    verifier catches a broken bound); 0 checks the real certificates.
    """
    rng = np.random.default_rng(seed)
    violations = []
    enumerated = 0
    probed = 0
    flipped = 0
    for index in range(count):
        num_classes = int(rng.integers(2, 4))
        if index % 2 == 0:
            k = int(rng.choice([1, 3]))
            rule = NeighborRule("knn", k=k)
            base = _random_instance(rng, min_n=k + 2, num_classes=num_classes)
        else:
            rule = NeighborRule("rnn", r=float(rng.choice([1.0, 2.0])))
            base = _random_instance(rng, min_n=1, num_classes=num_classes)
        x = rng.integers(0, GRID_SIDE, size=2).astype(np.float64)
        y = int(rng.integers(1, num_classes + 1))
        votes = tally(rule.neighbors(base, x), num_classes)
        cert = individual_cert(votes, y, algo=rule.algo)
        budget = min(cert.e_star + 1, 2)
        if rule.algo == "knn":
            budget = min(budget, len(base) - rule.k)
        space = AttackSpace(base, _grid_pool(num_classes), budget, ceiling)
        claimed = cert.e_star + claimed_slack
        result = verify_individual(space, x, y, rule, claimed_e_star=claimed)
        enumerated += result.enumerated
        if cert.e_star + 1 <= budget:
            probed += 1
            if result.flip_size == cert.e_star + 1:
                flipped += 1
        for violation in result.violations:
            violations.append(
                dict(
                    violation,
                    instance=index,
                    algo=rule.algo,
                    params={"k": rule.k, "r": rule.r},
                )
            )
    violations.sort(
        key=lambda v: (v["instance"], v["check"], str(v["dataset"]), v["detail"])
    )
    return SweepReport(
        kind="individual",
        seed=seed,
        instances=count,
        enumerated=enumerated,
        violations=tuple(violations),
        tightness_probed=probed,
        tightness_flipped=flipped,
    )


def joint_sweep(
    count: int = 50, seed: int = 0, *, ceiling: int = DEFAULT_CEILING
) -> SweepReport:
    """Random rNN instances with three test points, both groupings checked
    against exhaustive attacks at e in {1, 2}.
    """
    rng = np.random.default_rng(seed)
    violations = []
    enumerated = 0
    for index in range(count):
        num_classes = int(rng.integers(2, 4))
        rule = NeighborRule("rnn", r=float(rng.choice([1.0, 2.0])))
        base = _random_instance(rng, min_n=2, num_classes=num_classes)
        xs = rng.integers(0, GRID_SIDE, size=(3, 2)).astype(np.float64)
        ys = rng.integers(1, num_classes + 1, size=3)
        e = int(rng.integers(1, 3))
        space = AttackSpace(base, _grid_pool(num_classes), e, ceiling)
        result = verify_joint(space, xs, ys, rule, e, seed=seed + index)
        enumerated += result.enumerated
        for violation in result.violations:
            violations.append(
                dict(violation, instance=index, e=e, params={"r": rule.r})
            )
    violations.sort(
        key=lambda v: (v["instance"], v["check"], str(v["dataset"]), v["detail"])
    )
    return SweepReport(
        kind="joint",
        seed=seed,
        instances=count,
        enumerated=enumerated,
        violations=tuple(violations),
    )
