import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from colabel.core import (
    MISSING,
    DatasetFiles,
    LabeledExample,
    LoadedData,
    TrustedDataset,
    UntrustedDataset,
    check_soft_labels,
    derive_rng,
    estimate_class_prior,
    load_dataset,
    save_dataset,
    validate_dataset,
)


def make_pair(n=10, m=3, d=2, C=3, seed=0):
    rng = np.random.default_rng(seed)
    truth = rng.integers(0, C, n)
    A = rng.integers(0, C, (n, m))
    U = UntrustedDataset([f"u{i}" for i in range(n)], rng.normal(size=(n, d)), A, truth)
    D = TrustedDataset([f"t{i}" for i in range(4)], rng.normal(size=(4, d)), np.array([0, 1, 2, 0]), rng.integers(0, C, (4, m)))
    return U, D


def test_validate_clean_dataset_is_empty():
    U, D = make_pair()
    assert validate_dataset(U, D, 3) == []


def test_validate_all_missing_row():
    U, D = make_pair()
    U.annotations[4] = MISSING
    assert "all-missing row at index 4" in validate_dataset(U, D, 3)


def test_validate_row_count_mismatch():
    U, D = make_pair()
    bad = UntrustedDataset(U.ids, U.features, U.annotations[:9], U.truth)
    assert any("row count mismatch" in p for p in validate_dataset(bad, D, 3))


def test_validate_reports_label_range_dimension_and_empty_column():
    U, D = make_pair()
    U.annotations[0, 0] = 5
    U.annotations[:, 2] = MISSING
    U.annotations[:, 1] = 1
    D2 = TrustedDataset(D.ids, np.zeros((4, 3)), D.labels)
    report = validate_dataset(U, D2, 3)
    assert any("outside" in p for p in report)
    assert any("dimension mismatch" in p for p in report)
    assert "empty annotator column 2" in report


@pytest.mark.parametrize(
    "labels, C, alpha, expected",
    [
        ([0, 0, 1, 1], 2, 0.0, [0.5, 0.5]),
        ([0, 0, 0, 1], 2, 0.0, [0.75, 0.25]),
        ([0, 0], 2, 1.0, [0.75, 0.25]),
    ],
)
def test_class_prior_examples(labels, C, alpha, expected):
    np.testing.assert_allclose(estimate_class_prior(np.array(labels), C, alpha), expected, atol=1e-15)


def test_class_prior_rejects_empty():
    with pytest.raises(ValueError):
        estimate_class_prior(np.array([], dtype=int), 3)


@given(
    labels=arrays(np.int64, st.integers(1, 40), elements=st.integers(0, 4)),
    alpha=st.floats(0.01, 5.0),
)
def test_class_prior_smoothed_is_positive_distribution(labels, alpha):
    q = estimate_class_prior(labels, 5, alpha)
    assert np.all(q > 0)
    assert abs(q.sum() - 1) < 1e-12


def test_trusted_dataset_nonempty_and_examples():
    with pytest.raises(ValueError):
        TrustedDataset([], np.zeros((0, 2)), np.zeros(0, dtype=int))
    ex = [LabeledExample("a", np.array([1.0, 2.0]), 1), LabeledExample("b", np.array([0.0, 1.0]), 0)]
    D = TrustedDataset.from_examples(ex)
    assert [e.id for e in D.examples()] == ["a", "b"]
    assert D.u == 2


def test_check_soft_labels():
    assert check_soft_labels(np.array([[0.2, 0.8], [1.0, 0.0]]))
    assert not check_soft_labels(np.array([[0.2, 0.7]]))
    assert not check_soft_labels(np.array([[-0.1, 1.1]]))


def test_derive_rng_is_deterministic_and_keyed():
    a = derive_rng(7, "x", 3).random(5)
    b = derive_rng(7, "x", 3).random(5)
    c = derive_rng(7, "x", 4).random(5)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


@given(seed=st.integers(0, 2**32), n=st.integers(1, 12), m=st.integers(1, 4), complete=st.booleans())
def test_dataset_round_trip(tmp_path_factory, seed, n, m, complete):
    rng = np.random.default_rng(seed)
    C = 3
    A = rng.integers(0, C, (n, m))
    if not complete:
        A[rng.random((n, m)) < 0.3] = MISSING
        A[:, 0] = rng.integers(0, C, n)
    U = UntrustedDataset([f"u{i}" for i in range(n)], rng.normal(size=(n, 2)) * 1e3, A, rng.integers(0, C, n))
    D = TrustedDataset(["t0", "t1"], rng.normal(size=(2, 2)), np.array([2, 0]), rng.integers(0, C, (2, m)))
    V = UntrustedDataset(["v0"], rng.normal(size=(1, 2)), rng.integers(0, C, (1, m)), np.array([1]))
    root = tmp_path_factory.mktemp("rt")
    files = save_dataset(root, LoadedData(U, D, V))
    back = load_dataset(files)
    assert back.untrusted.ids == U.ids
    np.testing.assert_array_equal(back.untrusted.features, U.features)
    np.testing.assert_array_equal(back.untrusted.annotations, U.annotations)
    np.testing.assert_array_equal(back.untrusted.truth, U.truth)
    np.testing.assert_array_equal(back.trusted.features, D.features)
    np.testing.assert_array_equal(back.trusted.labels, D.labels)
    np.testing.assert_array_equal(back.trusted.annotations, D.annotations)
    np.testing.assert_array_equal(back.validation.features, V.features)
    np.testing.assert_array_equal(back.validation.annotations, V.annotations)


def test_file_order_is_not_significant(tmp_path):
    U, D = make_pair(n=5)
    files = save_dataset(tmp_path, LoadedData(U, D))
    lines = files.features.read_text().splitlines()
    files.features.write_text("\n".join([lines[0]] + lines[1:][::-1]) + "\n")
    back = load_dataset(DatasetFiles.in_dir(tmp_path))
    np.testing.assert_array_equal(back.untrusted.features, U.features)
    np.testing.assert_array_equal(back.trusted.features, D.features)


def test_missing_id_is_an_error(tmp_path):
    U, D = make_pair(n=5)
    files = save_dataset(tmp_path, LoadedData(U, D))
    lines = files.features.read_text().splitlines()
    files.features.write_text("\n".join(lines[:-1]) + "\n")
    with pytest.raises(ValueError, match="missing"):
        load_dataset(files)
