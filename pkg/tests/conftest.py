"""Session-wide fixtures: one synthetic corpus plus cached descriptors.

The corpus and its descriptors are built once per session (a few seconds)
and shared by the module tests and the acceptance gate.
"""

import numpy as np
import pytest

from nncert import synthetic
from nncert.data import Dataset, Image, TestSet, embed_trigger
from nncert.features import HogParams, hog

CORPUS_TRAIN = 6000
CORPUS_TEST = 1200
CORPUS_SEED = 7
NUM_CLASSES = 10
TRIGGER_SIDE = 5


def image28(array):
    return Image(28, 28, 1, np.ascontiguousarray(array, dtype=np.uint8).reshape(-1))


def hog_matrix(images, params=HogParams()):
    return np.stack([hog(image28(img), params) for img in images])


@pytest.fixture(scope="session")
def corpus():
    train_images, train_labels, test_images, test_labels = synthetic.make_corpus(
        CORPUS_TRAIN, CORPUS_TEST, CORPUS_SEED
    )
    return {
        "train_images": train_images,
        "train_labels": train_labels,
        "test_images": test_images,
        "test_labels": test_labels,
    }


@pytest.fixture(scope="session")
def descriptors(corpus):
    params = HogParams()
    triggered = [
        np.frombuffer(
            embed_trigger(image28(img), TRIGGER_SIDE, 255).pixels, dtype=np.uint8
        ).reshape(28, 28)
        for img in corpus["test_images"]
    ]
    return {
        "train": hog_matrix(corpus["train_images"], params),
        "test": hog_matrix(corpus["test_images"], params),
        "test_triggered": hog_matrix(triggered, params),
        "train_labels": corpus["train_labels"],
        "test_labels": corpus["test_labels"],
    }


@pytest.fixture(scope="session")
def subsample(descriptors):
    """Seeded picker: (n_train, n_test, seed) -> (train, test, triggered test)."""

    def pick(n_train, n_test, seed):
        rng = np.random.default_rng(seed)
        keep_train = np.sort(rng.choice(CORPUS_TRAIN, n_train, replace=False))
        keep_test = np.sort(rng.choice(CORPUS_TEST, n_test, replace=False))
        train = Dataset(
            descriptors["train"][keep_train],
            descriptors["train_labels"][keep_train],
            NUM_CLASSES,
        )
        test = TestSet(
            descriptors["test"][keep_test],
            descriptors["test_labels"][keep_test],
            NUM_CLASSES,
        )
        test_triggered = TestSet(
            descriptors["test_triggered"][keep_test],
            descriptors["test_labels"][keep_test],
            NUM_CLASSES,
        )
        return train, test, test_triggered

    return pick
