"""Synthetic datasets shared by the tests and the acceptance suite."""

import numpy as np


def blobs(seed, n=300, d=10, spread=8.0):
    """Three isotropic unit blobs with centres drawn at scale ``spread``."""
    rng = np.random.default_rng(seed)
    centres = rng.normal(scale=spread, size=(3, d))
    labels = rng.integers(0, 3, n)
    return centres[labels] + rng.normal(size=(n, d)), labels


def imbalanced_mixture(seed, n=500, d=10):
    """Five Gaussian classes with proportions 45/25/15/10/5 percent."""
    rng = np.random.default_rng(seed)
    props = np.array([0.45, 0.25, 0.15, 0.10, 0.05])
    counts = np.round(props * n).astype(int)
    counts[0] += n - counts.sum()
    centres = rng.normal(scale=4.0, size=(5, d))
    labels = np.repeat(np.arange(5), counts)
    return centres[labels] + rng.normal(size=(n, d)), labels


def label_entropy(labels, k):
    p = np.bincount(labels, minlength=k) / len(labels)
    p = p[p > 0]
    return float(-(p * np.log(p)).sum())


# one "PASS|FAIL criterion ..." line per acceptance check, printed in the
# terminal summary by conftest
ACCEPTANCE_LINES = []
