import numpy as np
import pytest

from streamboost.dataset import (Dataset, DatasetError, load_csv, load_libsvm, minmax_scaler, split,
                                 stream, stream_order)


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestLibsvm:
    def test_classification_line_densified(self, tmp_path):
        ds = load_libsvm(write(tmp_path, "a.svm", "1 1:0.5 3:2.0\n"), task="multiclass", num_classes=2)
        assert ds.d == 3
        np.testing.assert_array_equal(ds[0].features, [0.5, 0.0, 2.0])
        assert ds[0].label == 1

    def test_regression_target(self, tmp_path):
        ds = load_libsvm(write(tmp_path, "r.svm", "-1.5 2:1.0\n"), task="regression", n_features=4)
        np.testing.assert_array_equal(ds[0].features, [0.0, 1.0, 0.0, 0.0])
        np.testing.assert_array_equal(ds[0].target, [-1.5])

    def test_empty_file(self, tmp_path):
        with pytest.raises(DatasetError, match="empty dataset"):
            load_libsvm(write(tmp_path, "e.svm", ""))

    def test_malformed_line_reports_line_number(self, tmp_path):
        with pytest.raises(DatasetError, match="line 2"):
            load_libsvm(write(tmp_path, "m.svm", "1 1:2\n1 1-2\n"))

    def test_non_ascending_indices(self, tmp_path):
        with pytest.raises(DatasetError, match="ascending"):
            load_libsvm(write(tmp_path, "n.svm", "1 3:1 2:1\n"))

    def test_zero_index_rejected(self, tmp_path):
        with pytest.raises(DatasetError):
            load_libsvm(write(tmp_path, "z.svm", "1 0:1\n"))

    def test_dimension_override_too_small(self, tmp_path):
        with pytest.raises(DatasetError):
            load_libsvm(write(tmp_path, "s.svm", "1 5:1\n"), n_features=3)

    def test_binary_labels_normalised(self, tmp_path):
        ds = load_libsvm(write(tmp_path, "b.svm", "0 1:1\n1 1:2\n0 1:3\n"), task="binary")
        np.testing.assert_array_equal(ds.labels, [-1, 1, -1])
        np.testing.assert_array_equal(ds.supervision()[:, 0], [-1.0, 1.0, -1.0])


class TestCsv:
    def test_target_column_extracted(self, tmp_path):
        ds = load_csv(write(tmp_path, "a.csv", "1,2,3\n4,5,6\n"), target_column=0)
        np.testing.assert_array_equal(ds.features, [[2, 3], [5, 6]])
        np.testing.assert_array_equal(ds.targets, [[1], [4]])

    def test_header_skipped(self, tmp_path):
        ds = load_csv(write(tmp_path, "h.csv", "a,b,c\n1,2,3\n"))
        assert ds.n == 1
        np.testing.assert_array_equal(ds.targets, [[3]])

    def test_ragged_row(self, tmp_path):
        with pytest.raises(DatasetError):
            load_csv(write(tmp_path, "r.csv", "1,2,3\n4,5\n"))

    def test_non_numeric_cell(self, tmp_path):
        with pytest.raises(DatasetError, match="non-numeric"):
            load_csv(write(tmp_path, "x.csv", "1,2,3\n4,x,6\n"))

    def test_multiclass_labels(self, tmp_path):
        ds = load_csv(write(tmp_path, "c.csv", "0.5,2\n0.1,0\n0.2,1\n"), task="multiclass")
        assert ds.num_classes == 3
        np.testing.assert_array_equal(ds.supervision(), np.eye(3)[[2, 0, 1]])


def small(n=10, d=2):
    return Dataset(np.arange(n * d, dtype=float).reshape(n, d), "regression", targets=np.arange(n))


class TestSplit:
    def test_ninety_ten(self):
        train, test = split(small(10), 0.1, seed=0)
        assert (train.n, test.n) == (9, 1)

    def test_half(self):
        train, test = split(small(4), 0.5, seed=3)
        assert (train.n, test.n) == (2, 2)

    def test_deterministic(self):
        a = split(small(50), 0.3, seed=7)
        b = split(small(50), 0.3, seed=7)
        np.testing.assert_array_equal(a[1].indices, b[1].indices)

    def test_partition_exact(self):
        train, test = split(small(37), 0.25, seed=1)
        both = np.concatenate([train.indices, test.indices])
        np.testing.assert_array_equal(np.sort(both), np.arange(37))

    @pytest.mark.parametrize("fraction", [0.0, 1.0, -0.2, 1.5])
    def test_fraction_out_of_range(self, fraction):
        with pytest.raises(DatasetError):
            split(small(), fraction, seed=0)


class TestStream:
    def test_stored_order_without_shuffle(self):
        assert [s.index for s in stream(small(5), seed=0, shuffle=False)] == [0, 1, 2, 3, 4]

    def test_shuffle_reproducible(self):
        a = [s.index for s in stream(small(20), seed=4)]
        b = [s.index for s in stream(small(20), seed=4)]
        assert a == b
        assert sorted(a) == list(range(20))

    def test_two_passes_fresh_permutations(self):
        order = stream_order(30, seed=2, passes=2)
        assert len(order) == 60
        assert sorted(order[:30]) == sorted(order[30:]) == list(range(30))
        assert not np.array_equal(order[:30], order[30:])


def test_invalid_labels_rejected():
    with pytest.raises(DatasetError):
        Dataset(np.zeros((2, 1)), "multiclass", labels=[0, 3], num_classes=2)


def test_minmax_uses_train_statistics():
    train = small(4)
    apply = minmax_scaler(train)
    scaled = apply(train)
    assert scaled.features.min() == 0.0 and scaled.features.max() == 1.0
    # the original dataset is untouched
    assert train.features.max() == 7.0
