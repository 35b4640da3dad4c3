import numpy as np
import pytest

from feintchain.alerts import FlowDataset, FlowRecord, N_FLOW_FEATURES
from feintchain.resample import (
    ResamplePlan,
    apply_plan,
    interpolate,
    knn_same_class,
    random_downsample,
    smote,
)


def make_dataset(class_sizes: dict[str, int], seed=0, spread=1.0):
    rng = np.random.default_rng(seed)
    records = []
    for name, size in class_sizes.items():
        base = rng.uniform(0, 10, N_FLOW_FEATURES)
        for _ in range(size):
            features = base + spread * rng.standard_normal(N_FLOW_FEATURES)
            records.append(FlowRecord(features, name, str(len(records))))
    return FlowDataset.from_records(records)


def collinear_dataset():
    """Three same-class points at 0, 1, 3 along feature 0 plus a far class."""
    rows = []
    for i, v in enumerate((0.0, 1.0, 3.0)):
        features = np.zeros(N_FLOW_FEATURES)
        features[0] = v
        rows.append(FlowRecord(features, "minor", str(i)))
    far = np.full(N_FLOW_FEATURES, 50.0)
    rows.append(FlowRecord(far, "major", "3"))
    return FlowDataset.from_records(rows)


class TestDownsample:
    def test_counts_and_purity(self):
        ds = make_dataset({"Benign": 200, "Bot": 30})
        out = random_downsample(ds, "Benign", 20, seed=1)
        assert out.class_counts() == {"Benign": 20, "Bot": 30}

    def test_paper_style_ratio(self):
        # Scaled-down analog of the big benign cut: exact target counts.
        ds = make_dataset({"Benign": 1886, "Bot": 15})
        out = random_downsample(ds, "Benign", 179, seed=1)
        assert out.class_counts()["Benign"] == 179

    def test_target_equal_keeps_members(self):
        ds = make_dataset({"A": 25, "B": 5})
        out = random_downsample(ds, "A", 25, seed=3)
        assert [r.source_id for r in out.records] == [r.source_id for r in ds.records]

    def test_target_zero_removes_class(self):
        ds = make_dataset({"A": 10, "B": 5})
        out = random_downsample(ds, "A", 0, seed=3)
        assert out.class_counts() == {"B": 5}

    def test_target_above_count_rejected(self):
        ds = make_dataset({"A": 10})
        with pytest.raises(ValueError):
            random_downsample(ds, "A", 11)

    def test_uniform_without_replacement_deterministic(self):
        ds = make_dataset({"A": 50})
        first = random_downsample(ds, "A", 10, seed=9)
        second = random_downsample(ds, "A", 10, seed=9)
        ids1 = [r.source_id for r in first.records]
        assert ids1 == [r.source_id for r in second.records]
        assert len(set(ids1)) == 10


class TestKnn:
    def test_identical_pair(self):
        features = np.ones(N_FLOW_FEATURES)
        ds = FlowDataset.from_records([
            FlowRecord(features, "m", "0"),
            FlowRecord(features.copy(), "m", "1"),
        ])
        neighbors = knn_same_class(ds.records[0], ds, 1)
        assert neighbors[0].source_id == "1"

    def test_collinear_order(self):
        ds = collinear_dataset()
        neighbors = knn_same_class(ds.records[0], ds, 2)
        # exhaustive-distance oracle: 1 is closer than 3
        assert [n.source_id for n in neighbors] == ["1", "2"]

    def test_excludes_other_classes(self):
        ds = collinear_dataset()
        assert all(n.label == "minor" for n in knn_same_class(ds.records[0], ds, 2))

    def test_too_few_members(self):
        ds = collinear_dataset()
        with pytest.raises(ValueError):
            knn_same_class(ds.records[0], ds, 3)

    def test_distance_ties_break_in_record_order(self):
        base = np.zeros(N_FLOW_FEATURES)
        left = base.copy()
        left[0] = -1.0
        right = base.copy()
        right[0] = 1.0
        ds = FlowDataset.from_records([
            FlowRecord(base, "m", "q"),
            FlowRecord(right, "m", "r"),
            FlowRecord(left, "m", "l"),
        ])
        neighbors = knn_same_class(ds.records[0], ds, 2)
        assert [n.source_id for n in neighbors] == ["r", "l"]


class TestSmote:
    def test_interpolation_endpoints(self):
        base = np.arange(N_FLOW_FEATURES, dtype=float)
        neighbor = base + 10.0
        assert np.array_equal(interpolate(base, neighbor, 0.0), base)
        assert np.array_equal(interpolate(base, neighbor, 1.0), neighbor)

    def test_paper_scale_minority_counts(self):
        ds = make_dataset({"Benign": 60, "Infiltration": 28,
                           "SQLInjection": 16, "Heartbleed": 8})
        out = smote(ds, "Infiltration", 280, k=5, seed=0)
        out = smote(out, "SQLInjection", 160, k=5, seed=0)
        out = smote(out, "Heartbleed", 80, k=5, seed=0)
        assert out.class_counts() == {"Benign": 60, "Infiltration": 280,
                                      "SQLInjection": 160, "Heartbleed": 80}

    def test_segment_bound_invariant(self):
        ds = make_dataset({"minor": 12, "major": 40}, spread=2.0)
        out = smote(ds, "minor", 120, k=5, seed=2)
        originals = {r.source_id for r in ds.records}
        base_records = [r for r in ds.records if r.label == "minor"]
        synth = [r for r in out.records if r.source_id not in originals]
        assert len(synth) == 108
        features = np.stack([r.features for r in base_records])
        lo, hi = features.min(axis=0), features.max(axis=0)
        for rec in synth:
            assert rec.label == "minor"
            assert np.all(rec.features >= lo - 1e-12)
            assert np.all(rec.features <= hi + 1e-12)

    def test_deterministic_under_seed(self):
        ds = make_dataset({"minor": 10, "major": 20})
        out1 = smote(ds, "minor", 40, k=3, seed=7)
        out2 = smote(ds, "minor", 40, k=3, seed=7)
        assert np.array_equal(out1.feature_matrix(), out2.feature_matrix())
        out3 = smote(ds, "minor", 40, k=3, seed=8)
        assert not np.array_equal(out1.feature_matrix(), out3.feature_matrix())

    def test_preconditions(self):
        ds = make_dataset({"minor": 4, "major": 10})
        with pytest.raises(ValueError):
            smote(ds, "minor", 10, k=5)   # needs k+1 members
        with pytest.raises(ValueError):
            smote(ds, "minor", 3, k=2)    # target below current
        with pytest.raises(ValueError):
            smote(ds, "ghost", 10, k=2)


class TestPlan:
    def test_validation(self):
        with pytest.raises(ValueError):
            ResamplePlan(targets={"A": -1})
        with pytest.raises(ValueError):
            ResamplePlan(targets={}, k=0)

    def test_apply_mixed(self):
        ds = make_dataset({"Benign": 300, "Bot": 40, "Rare": 10})
        plan = ResamplePlan(targets={"Benign": 50, "Rare": 60}, k=3, seed=4)
        out = apply_plan(ds, plan)
        assert out.class_counts() == {"Benign": 50, "Bot": 40, "Rare": 60}

    def test_unknown_class_rejected(self):
        ds = make_dataset({"A": 10})
        with pytest.raises(ValueError, match="unknown"):
            apply_plan(ds, ResamplePlan(targets={"Z": 5}))

    def test_count_exactness_property(self):
        rng = np.random.default_rng(41)
        ds = make_dataset({"A": 80, "B": 30, "C": 12})
        for _ in range(5):
            targets = {"A": int(rng.integers(10, 80)),
                       "B": int(rng.integers(30, 90)),
                       "C": int(rng.integers(12, 40))}
            out = apply_plan(ds, ResamplePlan(targets=targets, k=3, seed=1))
            assert out.class_counts() == targets
