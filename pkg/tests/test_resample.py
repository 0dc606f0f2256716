import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from triwin.dataset import LabeledDataset, imbalance_ratio
from triwin.errors import TooFewPositives
from triwin.resample import ResamplePlan, ros, rus, smote


def make(n_pos, n_neg, seed=0):
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.normal(2, 1, (n_pos, 2)), rng.normal(0, 1, (n_neg, 2))])
    return LabeledDataset(X, np.r_[np.ones(n_pos, int), -np.ones(n_neg, int)])


def rowset(A):
    return {r.tobytes() for r in A}


def test_ros_duplicates_existing_positives():
    ds = make(10, 40)
    out = ros(ds, seed=1)
    assert (out.n_pos, out.n_neg) == (40, 40)
    assert rowset(out.positives) <= rowset(ds.positives)
    assert imbalance_ratio(out) == 1.0


def test_ros_balanced_is_identity():
    ds = make(10, 10)
    assert ros(ds, 0) is ds


def test_rus_subset():
    ds = make(10, 40)
    out = rus(ds, seed=2)
    assert (out.n_pos, out.n_neg) == (10, 10)
    assert rowset(out.negatives) <= rowset(ds.negatives)
    assert imbalance_ratio(out) == 1.0


def test_rus_deterministic():
    ds = make(10, 40)
    assert rus(ds, 5).features.tobytes() == rus(ds, 5).features.tobytes()


def test_smote_on_segment():
    X = np.array([[0.0, 0.0], [1.0, 1.0]] + [[5.0 + i, -3.0] for i in range(8)])
    ds = LabeledDataset(X, np.r_[1, 1, -np.ones(8, int)])
    out = smote(ds, smote_k=1, seed=3)
    synth = out.positives[2:]
    assert len(synth) == 6
    np.testing.assert_allclose(synth[:, 0], synth[:, 1], atol=1e-15)
    assert np.all((synth >= 0) & (synth <= 1))
    assert imbalance_ratio(out) == 1.0


def test_smote_inside_bounding_box():
    ds = make(12, 60, seed=4)
    out = smote(ds, seed=4)
    lo, hi = ds.positives.min(axis=0), ds.positives.max(axis=0)
    for row in out.positives:
        assert np.all(row >= lo - 1e-12) and np.all(row <= hi + 1e-12)


def test_smote_needs_neighbours():
    with pytest.raises(TooFewPositives):
        smote(make(1, 10))
    with pytest.raises(TooFewPositives):
        smote(make(3, 10), smote_k=5)


def test_plan_rejects_unknown_method():
    with pytest.raises(ValueError):
        ResamplePlan("tomek")


@settings(max_examples=40, deadline=None)
@given(n_pos=st.integers(6, 30), extra=st.integers(0, 60), seed=st.integers(0, 2**32),
       method=st.sampled_from(["ros", "rus", "smote"]))
def test_invariants(n_pos, extra, seed, method):
    ds = make(n_pos, n_pos + extra, seed % 1000)
    plan = ResamplePlan(method, seed)
    out = plan.apply(ds)
    again = plan.apply(ds)
    assert out.features.tobytes() == again.features.tobytes()
    assert out.n_pos == out.n_neg
    if method == "rus":
        assert rowset(out.negatives) <= rowset(ds.negatives)
    else:
        np.testing.assert_array_equal(out.negatives, ds.negatives)
