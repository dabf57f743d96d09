"""Certified accuracy lower bounds for nearest-neighbor majority votes.

An individual certificate bounds how many training-set modifications
(insertions, deletions, replacements counted by the poisoning-size metric) a
single prediction is guaranteed to survive. A joint certificate shares the
modification budget across a group of test examples with pairwise-distinct
predicted labels; it exists for radius neighbors only, because under kNN a
removal near one test point can promote new neighbors that shift votes
elsewhere, so per-example vote margins are not simultaneously controllable.
Group bounds aggregate over any partition of the test set.

Groupings: RD shuffles with a seeded generator and greedily packs; ISLAND
first isolates the examples that are certifiable (or hopeless) on their own
at the given budget, then packs the remainder label-by-label in decreasing
margin order.

Accuracies are exact `fractions.Fraction` values end to end; only the CSV
writer renders decimals.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from decimal import ROUND_HALF_EVEN, Decimal, localcontext
from fractions import Fraction

import numpy as np

from .data import Dataset, TestSet
from .errors import (
    DuplicatePredictedLabel,
    EmptyTestSet,
    GroupsNotPartition,
    KnnNotSupported,
)
from .neighbors import VoteTally, knn_neighbors, rnn_neighbors, tally

ALGORITHMS = ("knn", "rnn")
METHODS = ("individual", "joint-rd", "joint-island")


@dataclass(frozen=True)
class IndividualCert:
    """Per-test-example certificate.

    The prediction a is guaranteed under every attack of poisoning size at
    most e_star; `correct` records whether a matches the true label, so the
    example counts toward certified accuracy iff correct and e <= e_star.
    """

    test_index: int
    a: int
    b: int
    s_a: int
    s_b: int
    correct: bool
    e_star: int
    algo: str = "rnn"

    @property
    def gap(self) -> int:
        return self.s_a - self.s_b

    @property
    def tie_bonus(self) -> int:
        """1 when a outranks b on label order, so a keeps vote-count ties."""
        return 1 if self.a > self.b else 0

    def certified(self, e: int) -> bool:
        return self.correct and e <= self.e_star

    def sort_key(self) -> int:
        return self.gap if self.correct else 0

    def attack_cost(self, e: int) -> int:
        """Vote deficit an attacker with budget e must still overcome here.

        Zero for misclassified examples: flipping them costs the attacker
        nothing because they never count toward accuracy.
        """
        if not self.correct:
            return 0
        return max(self.gap - e + self.tie_bonus, 0)


def individual_cert(
    vote_tally: VoteTally, y: int, *, test_index: int = 0, algo: str = "rnn"
) -> IndividualCert:
    """Certificate for one prediction: e_star = ceil((s_a-s_b+I(a>b))/2) - 1.

    Each unit of poisoning budget moves at most one vote from a to another
    label, so the prediction stands while the (tie-adjusted) margin exceeds
    twice the budget. Vote ties go to the larger label, hence e_star >= 0.
    """
    if algo not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algo!r}")
    a, b = vote_tally.a, vote_tally.b
    bonus = 1 if a > b else 0
    e_star = (vote_tally.s_a - vote_tally.s_b + bonus + 1) // 2 - 1
    return IndividualCert(
        test_index=test_index,
        a=a,
        b=b,
        s_a=vote_tally.s_a,
        s_b=vote_tally.s_b,
        correct=a == y,
        e_star=e_star,
        algo=algo,
    )


def clean_accuracy(certs) -> Fraction:
    if not certs:
        raise EmptyTestSet("no certificates to aggregate")
    return Fraction(sum(1 for c in certs if c.correct), len(certs))


def individual_ca(certs, e: int) -> Fraction:
    """Fraction of test examples certified correct at poisoning size e."""
    if not certs:
        raise EmptyTestSet("no certificates to aggregate")
    if e < 0:
        raise ValueError(f"poisoning size must be >= 0, got {e}")
    return Fraction(sum(1 for c in certs if c.certified(e)), len(certs))


@dataclass(frozen=True)
class Group:
    """Test examples certified together; predicted labels must be distinct."""

    members: tuple

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(self.members))
        seen = set()
        for cert in self.members:
            if cert.a in seen:
                raise DuplicatePredictedLabel(
                    f"predicted label {cert.a} appears twice in one group"
                )
            seen.add(cert.a)

    def __len__(self) -> int:
        return len(self.members)


@dataclass(frozen=True)
class GroupCert:
    e: int
    w: int
    mu: Fraction


def joint_group_bound(group: Group, e: int) -> GroupCert:
    """Shared-budget bound: at least w - 1 of the m members stay correct.

    Members are sorted so attack costs are non-increasing; w is then the
    least index whose cost suffix is affordable within e, i.e. the suffix is
    the largest member set an attacker can flip. Equal sort keys can still
    carry unequal costs (the a > b bonus differs), so ties must fall back on
    the cost itself before the test index; otherwise a cheap member could
    hide in the prefix and the suffix would overstate what survives.
    """
    if e < 0:
        raise ValueError(f"poisoning size must be >= 0, got {e}")
    for cert in group.members:
        if cert.algo != "rnn":
            raise KnnNotSupported("joint certification requires rnn")
    ordered = sorted(
        group.members,
        key=lambda c: (-c.sort_key(), -c.attack_cost(e), c.test_index),
    )
    costs = [c.attack_cost(e) for c in ordered]
    m = len(ordered)
    suffix = 0
    w = m + 1
    for i in range(m - 1, -1, -1):
        if suffix + costs[i] > e:
            break
        suffix += costs[i]
        w = i + 1
    mu = Fraction(w - 1, m) if m else Fraction(0)
    return GroupCert(e=e, w=w, mu=mu)


def group_rd(certs, c: int, seed: int):
    """Seeded random grouping: shuffle, then put each certificate into the
    first group that has room (< c members) and lacks its predicted label.
    """
    if c < 1:
        raise ValueError(f"group capacity must be >= 1, got {c}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(certs))
    members: list[list] = []
    labels_present: list[set] = []
    for idx in order:
        cert = certs[int(idx)]
        for group, present in zip(members, labels_present):
            if len(group) < c and cert.a not in present:
                group.append(cert)
                present.add(cert.a)
                break
        else:
            members.append([cert])
            labels_present.append({cert.a})
    return tuple(Group(tuple(g)) for g in members)


def group_island(certs, e: int):
    """Margin-greedy grouping, recomputed per budget e.

    Certificates that are individually certified at e, or that carry zero
    attack cost at e (misclassified, or margin already spent), become
    singleton groups: grouping cannot improve the first kind and cannot
    rescue the second. The remainder is packed one group per round, taking
    per predicted label the certificate with the largest remaining vote
    deficit, so expensive members concentrate in the same groups and the
    shared budget covers as few flips as possible.
    """
    if e < 0:
        raise ValueError(f"poisoning size must be >= 0, got {e}")
    singletons = []
    leftover = []
    for cert in certs:
        if cert.certified(e):
            singletons.append(cert)
        elif cert.attack_cost(e) <= 0:
            singletons.append(cert)
        else:
            leftover.append(cert)
    buckets: dict[int, list] = {}
    for cert in leftover:
        buckets.setdefault(cert.a, []).append(cert)
    for label in buckets:
        buckets[label].sort(key=lambda c: (-c.attack_cost(e), c.test_index))
    groups = [Group((cert,)) for cert in singletons]
    round_no = 0
    while True:
        picked = [
            bucket[round_no]
            for label, bucket in sorted(buckets.items())
            if round_no < len(bucket)
        ]
        if not picked:
            break
        groups.append(Group(tuple(picked)))
        round_no += 1
    return tuple(groups)


def joint_ca(groups, e: int, *, certs=None) -> Fraction:
    """Aggregate bound over a partition: sum of mu_j * |U_j| over the total.

    Groups must be disjoint; when the full certificate list is supplied they
    must also cover it exactly.
    """
    seen = set()
    total = 0
    for group in groups:
        for cert in group.members:
            if cert.test_index in seen:
                raise GroupsNotPartition(
                    f"test index {cert.test_index} appears in two groups"
                )
            seen.add(cert.test_index)
            total += 1
    if certs is not None:
        expected = {c.test_index for c in certs}
        if seen != expected or total != len(certs):
            raise GroupsNotPartition(
                "groups do not cover the certificate list exactly"
            )
    if total == 0:
        raise EmptyTestSet("no group members to aggregate")
    survivors = sum(joint_group_bound(g, e).w - 1 for g in groups)
    return Fraction(survivors, total)


# ---------------------------------------------------------------------------
# curve construction


@dataclass(frozen=True)
class CurveConfig:
    algo: str
    k: int | None = None
    r: float | None = None
    method: str = "individual"
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.algo not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algo!r}")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.algo == "knn":
            if self.k is None or self.r is not None:
                raise ValueError("knn requires k and forbids r")
        else:
            if self.r is None or self.k is not None:
                raise ValueError("rnn requires r and forbids k")
        if self.algo == "knn" and self.method != "individual":
            raise KnnNotSupported("joint certification requires rnn")
        if self.threads < 1:
            raise ValueError(f"threads must be >= 1, got {self.threads}")


@dataclass(frozen=True)
class CurvePoint:
    e: int
    ca_individual: Fraction
    ca_joint: Fraction | None
    n_test: int


def certify_testset(train: Dataset, test: TestSet, config: CurveConfig):
    """One certificate per test example, in test order.

    Worker threads write into fixed slots, so the result is identical for
    any thread count.
    """
    if len(test) == 0:
        raise EmptyTestSet("test set is empty")
    results: list = [None] * len(test)

    def certify_one(i: int) -> None:
        x = test.features[i]
        if config.algo == "knn":
            neighbor_set = knn_neighbors(train, x, config.k)
        else:
            neighbor_set = rnn_neighbors(train, x, config.r)
        votes = tally(neighbor_set, train.num_classes)
        results[i] = individual_cert(
            votes, int(test.labels[i]), test_index=i, algo=config.algo
        )

    if config.threads == 1:
        for i in range(len(test)):
            certify_one(i)
    else:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            for _ in pool.map(certify_one, range(len(test))):
                pass
    return tuple(results)


def curve(train: Dataset, test: TestSet, config: CurveConfig, e_values):
    """Certified-accuracy curve over an ascending grid of poisoning sizes.

    Neighbor tallies are computed once; RD groups are built once from the
    seed (the grouping rule does not look at e), while ISLAND regroups at
    every e because its parts are defined in terms of e.
    """
    e_values = [int(e) for e in e_values]
    if any(b <= a for a, b in zip(e_values, e_values[1:])):
        raise ValueError("e_values must be strictly ascending")
    certs = certify_testset(train, test, config)
    rd_groups = None
    if config.method == "joint-rd":
        rd_groups = group_rd(certs, train.num_classes, config.seed)
    points = []
    for e in e_values:
        ca_ind = individual_ca(certs, e)
        if config.method == "individual":
            ca_jnt = None
        elif config.method == "joint-rd":
            ca_jnt = joint_ca(rd_groups, e, certs=certs)
        else:
            ca_jnt = joint_ca(group_island(certs, e), e, certs=certs)
        points.append(CurvePoint(e, ca_ind, ca_jnt, len(test)))
    return tuple(points)


def e_grid(e_max: int, e_step: int):
    if e_step < 1:
        raise ValueError(f"e_step must be >= 1, got {e_step}")
    if e_max < 0:
        raise ValueError(f"e_max must be >= 0, got {e_max}")
    return list(range(0, e_max + 1, e_step))


def format_rational(value: Fraction) -> str:
    """Render with exactly 6 fractional digits, ties to even."""
    with localcontext() as ctx:
        ctx.prec = 50
        dec = Decimal(value.numerator) / Decimal(value.denominator)
        return str(dec.quantize(Decimal("0.000001"), rounding=ROUND_HALF_EVEN))


def write_curve_csv(points, path) -> None:
    """CSV with header e,ca_individual,ca_joint,n_test and LF endings.

    ca_joint is left empty for individual-only runs.
    """
    with open(path, "w", newline="\n") as fh:
        fh.write("e,ca_individual,ca_joint,n_test\n")
        for p in points:
            joint = "" if p.ca_joint is None else format_rational(p.ca_joint)
            fh.write(
                f"{p.e},{format_rational(p.ca_individual)},{joint},{p.n_test}\n"
            )
