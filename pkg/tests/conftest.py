import numpy as np
import pytest

from waekit import synth
from waekit.core import align


def decisions_from_counts(tp, fn, fp, tn):
    """Truth/prediction vectors realising a confusion matrix."""
    truth = np.array([1] * (tp + fn) + [0] * (fp + tn), dtype=np.int8)
    pred = np.array([1] * tp + [0] * fn + [1] * fp + [0] * tn, dtype=np.int8)
    return truth, pred


@pytest.fixture(scope="session")
def ref_sets():
    return synth.reference_fixture(seed=0)


@pytest.fixture(scope="session")
def ref_aligned(ref_sets):
    return align(ref_sets)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
