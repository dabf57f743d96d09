"""Provable accuracy lower bounds for kNN/rNN classifiers under training-set
poisoning and backdoor triggers, with a brute-force oracle that validates the
certificates on small instances."""

from .certify import (
    CurveConfig,
    CurvePoint,
    Group,
    GroupCert,
    IndividualCert,
    certify_testset,
    clean_accuracy,
    curve,
    e_grid,
    group_island,
    group_rd,
    individual_ca,
    individual_cert,
    joint_ca,
    joint_group_bound,
    write_curve_csv,
)
from .data import (
    Dataset,
    Example,
    Image,
    TestSet,
    embed_trigger,
    load_cifar10,
    load_feature_csv,
    load_idx,
    make_backdoor_testset,
    poisoning_size,
    testset_from_csv,
    write_feature_csv,
)
from .features import HogParams, flatten_raw, hog, hog_dimension, to_grayscale
from .neighbors import (
    NeighborSet,
    VoteTally,
    knn_neighbors,
    l1_distance,
    l1_distances,
    predict,
    rank_hash,
    rnn_neighbors,
    tally,
)
from .oracle import (
    AttackSpace,
    NeighborRule,
    enumerate_poisonings,
    individual_sweep,
    joint_sweep,
    verify_individual,
    verify_joint,
)

__all__ = [name for name in dir() if not name.startswith("_")]
