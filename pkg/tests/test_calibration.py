import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from colabel.calibration import (
    IsotonicMap,
    MulticlassCalibrator,
    ReliabilityReport,
    apply_calibration,
    expected_calibration_error,
    fit_multiclass_calibrator,
    pav_fit,
    reliability_report,
)

from oracles import isotonic_bruteforce


def test_pav_two_point_violation_pools():
    m = pav_fit([0.2, 0.8], [1.0, 0.0])
    np.testing.assert_allclose(m([0.2, 0.8]), [0.5, 0.5])


def test_pav_hand_example():
    s = np.array([0.1, 0.2, 0.3, 0.4, 0.5])
    m = pav_fit(s, [0, 1, 1, 0, 1])
    np.testing.assert_allclose(m(s), [0, 2 / 3, 2 / 3, 2 / 3, 1])


def test_pav_ties_are_pooled_before_fitting():
    m = pav_fit([0.5, 0.5, 0.5], [1, 0, 0])
    np.testing.assert_allclose(m([0.5]), [1 / 3])


@given(
    seed=st.integers(0, 2**31),
    n=st.integers(1, 8),
    binary=st.booleans(),
    ties=st.booleans(),
)
def test_pav_matches_bruteforce(seed, n, binary, ties):
    rng = np.random.default_rng(seed)
    s = rng.integers(0, 4, n) / 4 if ties else rng.random(n)
    t = rng.integers(0, 2, n).astype(float) if binary else rng.random(n)
    w = rng.uniform(0.5, 2.0, n)
    fitted = pav_fit(s, t, w)(s)
    np.testing.assert_allclose(fitted, isotonic_bruteforce(s, t, w), atol=1e-10)


@given(seed=st.integers(0, 2**31))
def test_map_is_monotone_and_clamped(seed):
    rng = np.random.default_rng(seed)
    s = rng.random(30)
    m = pav_fit(s, (rng.random(30) < s).astype(float))
    grid = np.linspace(-0.5, 1.5, 401)
    v = m(grid)
    assert np.all(np.diff(v) >= 0)
    assert v[0] == m(s.min()) and v[-1] == m(s.max())


def test_identity_map_and_unfitted():
    ident = IsotonicMap.identity()
    assert ident.is_identity()
    np.testing.assert_array_equal(ident([0.0, 0.3, 1.0]), [0.0, 0.3, 1.0])
    with pytest.raises(ValueError):
        apply_calibration(None, 0.3)
    with pytest.raises(ValueError):
        pav_fit([], [])


def test_overconfidence_is_pulled_toward_observed_rate():
    # scores all 0.9 but only 60% positive
    rng = np.random.default_rng(0)
    s = 0.9 + rng.normal(0, 1e-3, 2000)
    t = (rng.random(2000) < 0.6).astype(float)
    m = pav_fit(s, t)
    assert abs(np.mean(m(s)) - t.mean()) < 1e-9  # PAV preserves total mass
    assert abs(np.median(m(s)) - 0.6) < 0.1


def test_multiclass_calibrator_floor_and_identity_fallback():
    rng = np.random.default_rng(0)
    C = 3
    labels = np.array([0] * 30 + [1] * 30 + [2] * 5)
    P = rng.dirichlet(np.ones(C), len(labels))
    cal = fit_multiclass_calibrator(P, labels, C)
    assert not cal.maps[0].is_identity() and not cal.maps[1].is_identity()
    assert cal.maps[2].is_identity()
    out = cal(P)
    np.testing.assert_allclose(out.sum(axis=1), 1.0, atol=1e-12)
    assert out.min() > 0
    all_zero = MulticlassCalibrator((IsotonicMap(np.array([0.0]), np.array([0.0])),) * 3)
    np.testing.assert_allclose(all_zero(P[:2]), 1 / 3)


def test_ece_examples():
    assert expected_calibration_error(np.eye(3), [0, 1, 2]) == 0.0
    assert expected_calibration_error(np.eye(2)[[0, 0, 0, 0]], [0, 1, 0, 1]) == pytest.approx(50.0)
    half = np.full((4, 2), 0.5)
    assert expected_calibration_error(half, [0, 1, 0, 1]) == pytest.approx(0.0)


def test_ece_matches_direct_loop():
    rng = np.random.default_rng(5)
    P = rng.dirichlet(np.ones(4) * 0.5, 500)
    y = rng.integers(0, 4, 500)
    conf, pred = P.max(axis=1), P.argmax(axis=1)
    total = 0.0
    for b in range(15):
        lo, hi = b / 15, (b + 1) / 15
        sel = (conf > lo) & (conf <= hi)
        if sel.any():
            total += sel.sum() / 500 * abs((pred[sel] == y[sel]).mean() - conf[sel].mean())
    assert expected_calibration_error(P, y) == pytest.approx(100 * total)


def test_reliability_report_csv_round_trip(tmp_path):
    rng = np.random.default_rng(6)
    P = rng.dirichlet(np.ones(3), 50)
    rep = reliability_report(P, rng.integers(0, 3, 50))
    path = tmp_path / "bins.csv"
    rep.to_csv(path)
    back = ReliabilityReport.from_csv(path)
    assert back.ece == rep.ece
    np.testing.assert_array_equal(back.count, rep.count)
    np.testing.assert_array_equal(back.mean_conf, rep.mean_conf)
    assert rep.count.sum() == 50
    assert path.read_text().splitlines()[0] == "bin_lo,bin_hi,count,mean_conf,accuracy"


def test_pav_feasible_targets_are_returned_unchanged():
    s = np.array([0.1, 0.4, 0.5, 0.9])
    t = np.array([0.0, 0.2, 0.2, 1.0])
    np.testing.assert_allclose(pav_fit(s, t)(s), t)


def test_overconfident_classifier_top_class_pulled_to_accuracy():
    rng = np.random.default_rng(3)
    n, C = 1000, 3
    pred = rng.integers(0, C, n)
    P = np.full((n, C), 0.005)
    P[np.arange(n), pred] = 0.99
    labels = np.where(rng.random(n) < 0.6, pred, (pred + rng.integers(1, C, n)) % C)
    acc = (labels == pred).mean()
    out = fit_multiclass_calibrator(P, labels, C)(P)
    assert abs(out.max(axis=1).mean() - acc) < 0.05


def test_binary_calibration_is_complementary():
    rng = np.random.default_rng(4)
    p = rng.random(200)
    P = np.column_stack([p, 1 - p])
    y = (rng.random(200) < p).astype(int)
    y = 1 - y  # label 0 has probability p
    out = fit_multiclass_calibrator(P, y, 2)(P)
    m0 = pav_fit(P[:, 0], (y == 0).astype(float))
    m1 = pav_fit(P[:, 1], (y == 1).astype(float))
    np.testing.assert_allclose(m0(P[:, 0]) + m1(P[:, 1]), 1.0, atol=1e-12)
    np.testing.assert_allclose(out[:, 0], m0(P[:, 0]), atol=1e-5)


def test_calibration_is_idempotent_on_observed_blocks():
    rng = np.random.default_rng(5)
    s = rng.random(300)
    t = (rng.random(300) < s).astype(float)
    once = pav_fit(s, t)(s)
    again = pav_fit(once, t)(once)
    np.testing.assert_allclose(again, once, atol=1e-6)


def test_ece_uniform_confidence_matching_accuracy():
    n = 100
    P = np.tile([0.8, 0.2], (n, 1))
    y = np.array([0] * 80 + [1] * 20)
    assert expected_calibration_error(P, y) == pytest.approx(0.0, abs=1e-9)


def test_perfectly_calibrated_bins_are_within_width():
    rng = np.random.default_rng(8)
    conf = rng.uniform(0.5, 1.0, 200000)
    P = np.column_stack([conf, 1 - conf])
    y = (rng.random(conf.size) > conf).astype(int)
    rep = reliability_report(P, y)
    nz = rep.count > 0
    assert np.all(np.abs(rep.accuracy[nz] - rep.mean_conf[nz]) < 1 / 15)
    assert rep.ece == expected_calibration_error(P, y)
