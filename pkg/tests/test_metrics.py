"""Metrics vs independent statistics oracles (scipy.stats)."""

import numpy as np
import numpy.testing as npt
import pytest
from scipy import stats

from edgegaze.metrics import (
    AnovaResult,
    EvalResult,
    anova_oneway,
    euclid_errors,
    evaluate_predictions,
    kfold_indices,
    mean_euclid,
    r_squared,
    rmse,
)


def test_euclid_zero_for_equal():
    pts = np.random.default_rng(0).normal(size=(10, 2))
    npt.assert_array_equal(euclid_errors(pts, pts), np.zeros(10))


def test_euclid_pythagorean():
    d = euclid_errors([[0.0, 0.0]], [[3.0, 4.0]])
    npt.assert_allclose(d, [5.0])


def test_euclid_preserves_length():
    assert euclid_errors(np.zeros((7, 2)), np.ones((7, 2))).shape == (7,)


def test_rmse_and_mean():
    assert rmse([0.0, 0.0]) == 0.0
    assert mean_euclid([3.0, 4.0]) == 3.5
    assert rmse([3.0, 4.0]) == pytest.approx(np.sqrt(12.5))
    assert rmse([2.5]) == mean_euclid([2.5]) == 2.5


def test_rmse_at_least_mean():
    rng = np.random.default_rng(4)
    for _ in range(20):
        d = rng.uniform(0, 10, size=rng.integers(1, 30))
        assert rmse(d) >= mean_euclid(d) - 1e-12


def test_r_squared_perfect_and_mean_predictor():
    truths = np.random.default_rng(1).normal(size=(50, 2))
    assert r_squared(truths, truths) == 1.0
    mean_pred = np.tile(truths.mean(axis=0), (50, 1))
    assert r_squared(mean_pred, truths) == pytest.approx(0.0, abs=1e-12)


def test_r_squared_matches_external_oracle():
    rng = np.random.default_rng(7)
    truths = rng.normal(size=(40, 2))
    preds = truths + rng.normal(scale=0.3, size=(40, 2))
    # oracle: pooled 1 - SSres/SStot computed elementwise with scipy building blocks
    ss_res = float(np.sum((preds - truths) ** 2))
    ss_tot = float(np.sum((truths - truths.mean(axis=0)) ** 2))
    npt.assert_allclose(r_squared(preds, truths), 1 - ss_res / ss_tot, rtol=1e-12)


def test_r_squared_shift_invariant():
    rng = np.random.default_rng(2)
    truths = rng.normal(size=(30, 2))
    preds = truths + rng.normal(scale=0.5, size=(30, 2))
    shifted = r_squared(preds + 3.7, truths + 3.7)
    npt.assert_allclose(shifted, r_squared(preds, truths), rtol=1e-10)


def test_r_squared_undefined_for_constant_truths():
    with pytest.raises(ValueError):
        r_squared(np.zeros((5, 2)), np.ones((5, 2)))


def test_kfold_partition():
    folds = kfold_indices(10, k=5, seed=3)
    assert len(folds) == 5
    assert all(len(f) == 2 for f in folds)
    union = np.sort(np.concatenate(folds))
    npt.assert_array_equal(union, np.arange(10))


def test_kfold_uneven_sizes_differ_by_at_most_one():
    folds = kfold_indices(11, k=3, seed=0)
    sizes = sorted(len(f) for f in folds)
    assert sizes == [3, 4, 4]


def test_kfold_seeded():
    a = kfold_indices(20, k=4, seed=5)
    b = kfold_indices(20, k=4, seed=5)
    for fa, fb in zip(a, b):
        npt.assert_array_equal(fa, fb)
    c = kfold_indices(20, k=4, seed=6)
    assert any(not np.array_equal(fa, fc) for fa, fc in zip(a, c))


# -- ANOVA -----------------------------------------------------------------------


def test_anova_identical_groups():
    g = [1.0, 2.0, 3.0]
    res = anova_oneway([g, g, g])
    assert res.f_stat == 0.0
    assert res.p_value == 1.0


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_anova_matches_scipy(seed):
    rng = np.random.default_rng(seed)
    groups = [rng.normal(loc=rng.uniform(-1, 1), size=rng.integers(5, 20))
              for _ in range(rng.integers(2, 6))]
    res = anova_oneway(groups)
    want_f, want_p = stats.f_oneway(*groups)
    npt.assert_allclose(res.f_stat, want_f, rtol=1e-6, atol=1e-6)
    npt.assert_allclose(res.p_value, want_p, rtol=1e-6, atol=1e-9)


def test_anova_textbook_example():
    # three treatment groups, worked with scipy as the oracle
    a = [6.9, 5.4, 5.8, 4.6, 4.0]
    b = [8.3, 6.8, 7.8, 9.2, 6.5]
    c = [8.0, 10.5, 8.1, 6.9, 9.3]
    res = anova_oneway([a, b, c])
    want_f, want_p = stats.f_oneway(a, b, c)
    npt.assert_allclose(res.f_stat, want_f, rtol=1e-9)
    npt.assert_allclose(res.p_value, want_p, rtol=1e-9)
    assert (res.df_between, res.df_within) == (2, 12)


def test_anova_df_for_four_groups_of_100():
    rng = np.random.default_rng(0)
    groups = [rng.normal(loc=i, size=100) for i in range(4)]
    res = anova_oneway(groups)
    assert (res.df_between, res.df_within) == (3, 396)


def test_anova_shift_and_scale_invariance():
    rng = np.random.default_rng(3)
    groups = [rng.normal(loc=i, size=12) for i in range(3)]
    base = anova_oneway(groups)
    shifted = anova_oneway([g + 100.0 for g in groups])
    scaled = anova_oneway([g * 3.5 for g in groups])
    npt.assert_allclose(shifted.f_stat, base.f_stat, rtol=1e-9)
    npt.assert_allclose(scaled.f_stat, base.f_stat, rtol=1e-9)


def test_anova_zero_within_variance_errors():
    with pytest.raises(ValueError):
        anova_oneway([[1.0, 1.0], [2.0, 2.0]])
    with pytest.raises(ValueError):
        anova_oneway([[1.0, 1.0], [1.0, 1.0]])


def test_anova_validation():
    with pytest.raises(ValueError):
        anova_oneway([[1.0, 2.0]])
    with pytest.raises(ValueError):
        anova_oneway([[1.0, 2.0], [3.0]])


# -- EvalResult --------------------------------------------------------------------


def test_eval_result_invariant_enforced():
    with pytest.raises(ValueError):
        EvalResult(model="m", mean_euclid_cm=2.0, rmse_cm=1.0, r2=0.5, n=10)
    with pytest.raises(ValueError):
        EvalResult(model="m", mean_euclid_cm=0.0, rmse_cm=0.0, r2=1.0, n=0)


def test_evaluate_predictions_with_folds():
    rng = np.random.default_rng(6)
    truths = rng.uniform(0, 10, size=(40, 2))
    preds = truths + rng.normal(scale=0.5, size=(40, 2))
    folds = kfold_indices(40, k=5, seed=1)
    res = evaluate_predictions("toy", preds, truths, fold_assignments=folds)
    assert res.n == 40
    assert len(res.fold_rmse_cm) == 5
    assert res.rmse_cm >= res.mean_euclid_cm
    csv_text = EvalResult.to_csv([res])
    assert csv_text.startswith(EvalResult.CSV_HEADER)
    row = csv_text.strip().splitlines()[1]
    assert row.split(",")[0] == "toy"
    assert float(row.split(",")[1]) == pytest.approx(res.rmse_cm)
    md = EvalResult.to_markdown([res])
    assert "| toy |" in md
