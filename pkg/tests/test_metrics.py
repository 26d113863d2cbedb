import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from pemsbench import metrics
from pemsbench.metrics import MetricReport, TargetNormalizer


def test_mse_examples():
    assert metrics.mse([1, 2, 3], [1, 2, 3]) == 0.0
    assert metrics.mse([2, 4], [1, 2]) == 2.5
    assert metrics.mse([0, 0], [3, 4]) == 12.5


def test_rmse_examples():
    assert metrics.rmse([5, 6], [5, 6]) == 0.0
    a = np.array([1.0, -2.0, 7.5])
    assert metrics.rmse(a - 0.75, a) == pytest.approx(0.75, rel=1e-15)
    assert metrics.rmse([2, 4], [1, 2]) == pytest.approx(1.58114, abs=5e-6)
    assert metrics.rmse([2, 4], [1, 2]) == math.sqrt(2.5)


def test_mae_examples():
    assert metrics.mae([3, 1], [3, 1]) == 0.0
    a = np.array([0.5, 10.0, -4.0])
    assert metrics.mae(a + 2.0, a) == pytest.approx(2.0, rel=1e-15)
    assert metrics.mae([2, 4], [1, 2]) == 1.5


def test_mape_examples():
    assert metrics.mape([110], [100]) == pytest.approx((10.0, 0))
    assert metrics.mape([3, 4], [3, 4]) == (0.0, 0)
    value, excluded = metrics.mape([5, 110], [0, 100])
    assert value == pytest.approx(10.0)
    assert excluded == 1


def test_mape_floor_is_inclusive_at_threshold():
    # |y| == 1e-8 is kept, anything below is dropped
    _, excluded = metrics.mape([1.0, 1.0], [1e-8, 0.99e-8])
    assert excluded == 1


@pytest.mark.parametrize("fn", [metrics.mse, metrics.rmse, metrics.mae, metrics.mape])
def test_error_cases(fn):
    with pytest.raises(ValueError, match="length mismatch"):
        fn([1, 2], [1])
    with pytest.raises(ValueError, match="empty"):
        fn([], [])
    with pytest.raises(ValueError, match="non-finite"):
        fn([np.nan], [1.0])


def test_mape_all_excluded():
    with pytest.raises(ValueError, match="undefined"):
        metrics.mape([1, 2], [0, 0])


def test_normalize_targets_definition():
    norm = TargetNormalizer(10.0, 20.0)
    np.testing.assert_array_equal(metrics.normalize_targets(norm, [10, 20, 15]), [0.0, 1.0, 0.5])


def test_normalizer_fit_and_degenerate_range():
    assert TargetNormalizer.fit([3.0, -1.0, 7.0]) == TargetNormalizer(-1.0, 7.0)
    with pytest.raises(ValueError, match="degenerate"):
        TargetNormalizer.fit([2.0, 2.0])


def test_evaluate_normalized_identity():
    norm = TargetNormalizer(0.0, 5.0)
    rep = metrics.evaluate_normalized(norm, [1.0, 2.0, 4.0], [1.0, 2.0, 4.0])
    assert (rep.mse, rep.rmse, rep.mae, rep.mape) == (0.0, 0.0, 0.0, 0.0)


def test_normalized_mape_differs_from_raw():
    norm = TargetNormalizer(0.0, 1.0)
    rep = metrics.evaluate_normalized(norm, [0.5], [0.25])
    assert rep.mape == pytest.approx(100.0)
    shifted = TargetNormalizer(-1.0, 1.0)
    # same raw pair, different normalization: MAPE changes, MSE scales by 1/4
    rep2 = metrics.evaluate_normalized(shifted, [0.5], [0.25])
    assert rep2.mape == pytest.approx(0.125 / 0.625 * 100)
    assert rep2.mse == pytest.approx(rep.mse / 4)


def test_csv_row_uses_five_significant_digits():
    rep = MetricReport(1 / 3, math.sqrt(1 / 3), 123456.789, 0.000123456789, 7, 1)
    row = rep.csv_row("KNN", "NOx")
    assert row == ["KNN", "NOx", "0.33333", "0.57735", "1.2346e+05", "0.00012346", "7", "1"]
    assert len(row) == len(metrics.CSV_HEADER)


def test_evaluate_counts():
    rep = metrics.evaluate([1.0, 2.0, 5.0], [0.0, 2.0, 4.0])
    assert rep.n_evaluated == 3 and rep.n_excluded_mape == 1
    assert rep.mse == pytest.approx(2 / 3)


# subnormal differences underflow when squared, which breaks mae <= rmse in floats
finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False).map(lambda v: 0.0 if abs(v) < 1e-100 else v)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 40).flatmap(lambda n: st.tuples(arrays(float, n, elements=finite), arrays(float, n, elements=finite))))
def test_cross_identities(pair):
    p, a = pair
    m, r, e = metrics.mse(p, a), metrics.rmse(p, a), metrics.mae(p, a)
    assert r * r == pytest.approx(m, rel=1e-12, abs=1e-300)
    assert e <= r * (1 + 1e-12) + 1e-300
    assert min(m, r, e) >= 0


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 30).flatmap(lambda n: st.tuples(arrays(float, n, elements=finite), arrays(float, n, elements=finite))), st.randoms())
def test_permutation_invariance(pair, rnd):
    p, a = pair
    idx = list(range(len(p)))
    rnd.shuffle(idx)
    for fn in (metrics.mse, metrics.mae):
        assert fn(p[idx], a[idx]) == pytest.approx(fn(p, a), rel=1e-12, abs=1e-300)
    if (np.abs(a) >= metrics.MAPE_FLOOR).any():
        assert metrics.mape(p[idx], a[idx])[0] == pytest.approx(metrics.mape(p, a)[0], rel=1e-12)


@settings(max_examples=100, deadline=None)
@given(
    st.integers(1, 30).flatmap(lambda n: st.tuples(arrays(float, n, elements=st.floats(0.5, 100)), arrays(float, n, elements=st.floats(0.5, 100)))),
    st.floats(0.01, 100),
)
def test_scaling_laws(pair, k):
    p, a = pair
    assert metrics.mse(k * p, k * a) == pytest.approx(k * k * metrics.mse(p, a), rel=1e-9)
    assert metrics.rmse(k * p, k * a) == pytest.approx(k * metrics.rmse(p, a), rel=1e-9)
    assert metrics.mae(k * p, k * a) == pytest.approx(k * metrics.mae(p, a), rel=1e-9)
    assert metrics.mape(k * p, k * a)[0] == pytest.approx(metrics.mape(p, a)[0], rel=1e-9)


def test_zero_iff_equal():
    a = np.array([1.0, 2.0, 3.0])
    rep = metrics.evaluate(a, a)
    assert rep.mse == rep.rmse == rep.mae == rep.mape == 0.0
    rep = metrics.evaluate(a + np.array([0, 1e-6, 0]), a)
    assert min(rep.mse, rep.rmse, rep.mae, rep.mape) > 0
