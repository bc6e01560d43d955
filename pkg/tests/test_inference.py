import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from specdebias.errors import InvalidInputError
from specdebias.inference import (benjamini_hochberg, calibration_metrics, confidence_intervals,
                                  infer, p_values, quantile_offsets, tpr_limit)


def test_pvalue_examples():
    assert p_values([0.0], 1.0)[0] == 1.0
    assert p_values([1.959964], 1.0)[0] == pytest.approx(0.05, abs=1e-6)
    assert p_values([10.0], 1.0)[0] < 1e-20
    assert p_values([20.0], 4.0)[0] == pytest.approx(2 * stats.norm.sf(10.0), rel=1e-12)
    with pytest.raises(InvalidInputError):
        p_values([1.0], 0.0)


def test_interval_examples():
    ci = confidence_intervals(np.array([0.3]), 2.5, 0.05)
    assert (ci[0, 1] - ci[0, 0]) / 2 == pytest.approx(1.959964 * np.sqrt(2.5), rel=1e-6)
    w = [np.diff(confidence_intervals([0.0], 1.0, a)[0])[0] for a in (0.9, 0.99, 0.999999)]
    assert w[2] < 1e-5 and w[0] > w[1] > w[2]
    ci = confidence_intervals([0.0], 4.0, 0.3173)
    assert ci[0, 1] == pytest.approx(2.0, abs=1e-3)
    for bad in (0.0, 1.0, -0.1):
        with pytest.raises(InvalidInputError):
            confidence_intervals([0.0], 1.0, bad)


def test_asymmetric_offsets():
    a, b = quantile_offsets(0.1, symmetric=False, a=-2.0)
    assert stats.norm.cdf(b) - stats.norm.cdf(a) == pytest.approx(0.9, abs=1e-14)
    with pytest.raises(InvalidInputError):
        quantile_offsets(0.1, symmetric=False)
    with pytest.raises(InvalidInputError):
        quantile_offsets(0.1, symmetric=False, a=-1.0)


def test_calibration_examples(rng):
    p = 500
    zero = np.zeros(p)
    m = calibration_metrics(zero, np.full(p, 0.3), confidence_intervals(zero, 1, 0.5), 0.0)
    assert m["fpr"] == 0 and m["tpr"] is None
    whole = np.column_stack([np.full(p, -np.inf), np.full(p, np.inf)])
    assert calibration_metrics(rng.normal(size=p), np.ones(p), whole, 0.1)["fcp"] == 0


def test_calibrated_gaussian_fcp():
    rng = np.random.default_rng(3)
    p, tau = 20_000, 2.0
    beta = rng.choice([0.0, 5.0], p)
    est = beta + np.sqrt(tau) * rng.standard_normal(p)
    for alpha in (0.05, 0.2, 0.5):
        rep = infer(est, tau, alpha)
        m = calibration_metrics(beta, rep.pvalues, rep.intervals, alpha)
        assert abs(m["fcp"] - alpha) <= 3 * np.sqrt(alpha * (1 - alpha) / p)


def test_tpr_limit_examples():
    assert tpr_limit([2.0], 1.0, 0.05) == pytest.approx(0.5160, abs=5e-5)
    assert tpr_limit([2.0, 0.0, -3.0], 1e-12, 0.05) == pytest.approx(1.0)
    assert tpr_limit([0.5], 1.0, 1 - 1e-12) == pytest.approx(1.0, abs=1e-9)
    with pytest.raises(InvalidInputError):
        tpr_limit([0.0, 0.0], 1.0, 0.05)
    # only signals with |B| >= mu0 count
    assert tpr_limit([1.0, 10.0], 1.0, 0.05, mu0=5) == pytest.approx(tpr_limit([10.0], 1.0, 0.05))


def test_bh_examples():
    assert benjamini_hochberg(np.ones(5), 0.1).size == 0
    np.testing.assert_array_equal(benjamini_hochberg([0.04], 0.05), [0])
    # thresholds 0.0125, 0.025, 0.0375, 0.05: the third p-value misses its threshold
    np.testing.assert_array_equal(benjamini_hochberg([0.01, 0.02, 0.04, 0.9], 0.05), [0, 1])
    np.testing.assert_array_equal(benjamini_hochberg([0.01, 0.02, 0.035, 0.9], 0.05), [0, 1, 2])
    # step-up: a later passing rank rescues earlier failures
    np.testing.assert_array_equal(benjamini_hochberg([0.03, 0.031, 0.032, 0.033], 0.04), [0, 1, 2, 3])


def test_report_invariants_and_csv(tmp_path, rng):
    beta = rng.normal(0, 3, 50)
    rep = infer(beta, 2.0, 0.1)
    np.testing.assert_array_equal(rep.decisions, rep.pvalues <= 0.1)
    np.testing.assert_allclose(rep.intervals[:, 1] - rep.intervals[:, 0],
                               (rep.b - rep.a) * np.sqrt(2.0))
    assert stats.norm.cdf(rep.b) - stats.norm.cdf(rep.a) == pytest.approx(0.9)
    path = tmp_path / "r.csv"
    rep.write_csv(path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["index", "beta_u", "pvalue", "ci_lo", "ci_hi", "reject"]
    assert len(rows) == 51
    assert float(rows[7][1]) == beta[6]


@settings(max_examples=100, deadline=None)
@given(b=st.lists(st.floats(-20, 20), min_size=2, max_size=30),
       tau=st.floats(0.01, 10), alpha=st.floats(0.001, 0.999))
def test_duality_and_monotonicity(b, tau, alpha):
    b = np.asarray(b)
    rep = infer(b, tau, alpha)
    # beta*=0 lies in CI_i  <=>  the level-alpha test of beta_i = 0 does not reject
    inside = (rep.intervals[:, 0] <= 0) & (0 <= rep.intervals[:, 1])
    z = np.abs(b) / np.sqrt(tau)
    clear = np.abs(z - stats.norm.ppf(1 - alpha / 2)) > 1e-9
    np.testing.assert_array_equal(inside[clear], ~rep.decisions[clear])
    order = np.argsort(np.abs(b))
    assert np.all(np.diff(rep.pvalues[order]) <= 0)


@settings(max_examples=100, deadline=None)
@given(p=st.lists(st.floats(0, 1), min_size=1, max_size=40), q1=st.floats(0.01, 0.99),
       q2=st.floats(0.01, 0.99))
def test_bh_monotone_in_q(p, q1, q2):
    lo, hi = sorted((q1, q2))
    assert set(benjamini_hochberg(p, lo)) <= set(benjamini_hochberg(p, hi))
