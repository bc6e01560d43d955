import numpy as np
import pytest

from specdebias.designs import (FAMILY_DEFAULTS, DesignRecipe, SignalRecipe, generate_design,
                                generate_noise, generate_signal, haar_orthogonal, stream)
from specdebias.errors import InvalidInputError


@pytest.mark.parametrize("family", sorted(FAMILY_DEFAULTS))
def test_deterministic_and_unit_mean_eig(family):
    rec = DesignRecipe(family, 60, 90, seed=7)
    X1 = generate_design(rec, trial=2)
    X2 = generate_design(rec, trial=2)
    assert X1.shape == (60, 90)
    assert np.array_equal(X1, X2)
    assert np.sum(X1 * X1) / 90 == pytest.approx(1.0, abs=1e-12)
    assert not np.array_equal(X1, generate_design(rec, trial=3))


def test_matrix_normal_iid_reduction():
    n, p = 2000, 100
    rec = DesignRecipe("matrix_normal", n, p, params={"rho": 0.0, "row_df_factor": None}, seed=1)
    X = generate_design(rec, rescale=False)
    C = X.T @ X / n
    assert np.max(np.abs(C - np.eye(p))) <= 5 / np.sqrt(p)


def test_spiked_separated_eigenvalues():
    n, p = 200, 400
    X = generate_design(DesignRecipe("spiked", n, p, seed=2), rescale=False)
    ev = np.sort(np.linalg.svd(X, compute_uv=False) ** 2)[::-1]
    gaps = ev[:-1] / np.maximum(ev[1:], 1e-300)
    assert int(np.argmax(gaps[: n - 1])) + 1 == 50
    assert ev[49] > 1e3 * ev[50]


def _ar_lag1(a):
    # Yule-Walker for AR(3): rho1 = a1 + a2 rho1 + a3 rho2, rho2 = a1 rho1 + a2 + a3 rho1
    a1, a2, a3 = a
    A = np.array([[1 - a2, -a3], [-(a1 + a3), 1.0]])
    return np.linalg.solve(A, [a1, a2])[0]


def test_var_lag1_autocorrelation():
    n, p = 1000, 200
    X = generate_design(DesignRecipe("var", n, p, seed=3), rescale=False)
    Xc = X[50:] - X[50:].mean(axis=0)
    per_col = np.sum(Xc[1:] * Xc[:-1], axis=0) / np.sum(Xc * Xc, axis=0)
    target = _ar_lag1((0.4, 0.08, 0.04))
    est = per_col.mean()
    se = per_col.std(ddof=1) / np.sqrt(p)
    assert est > 0
    # columns share innovations through the row covariance, so allow a wider band than iid SE
    assert abs(est - target) <= max(5 * se, 3 / np.sqrt(n))


def test_right_rotation_preserves_spectrum():
    X = generate_design(DesignRecipe("lnn", 40, 70, seed=4))
    O = haar_orthogonal(70, seed=5)
    s1 = np.linalg.svd(X, compute_uv=False)
    s2 = np.linalg.svd(X @ O, compute_uv=False)
    np.testing.assert_allclose(s2, s1, rtol=1e-10, atol=1e-12)


def test_signal_point_mass_is_zero():
    beta = generate_signal(SignalRecipe(weights=(0, 0, 1)), 500)
    assert not np.any(beta)


def test_mixture_mean():
    N = 200_000
    beta = generate_signal(SignalRecipe(seed=11), N)
    var = 0.24 * 401 + 0.06 * 101 - 4.2 ** 2
    assert abs(beta.mean() + 4.2) <= 3 * np.sqrt(var / N)


def test_alignment_only_norm():
    p = 300
    O = haar_orthogonal(p, seed=1)
    rec = SignalRecipe(weights=(0, 0, 1), align_indices=(1,))
    beta = generate_signal(rec, p, O)
    assert np.sum(beta ** 2) / p == pytest.approx(25.0, abs=1e-10)
    np.testing.assert_allclose(beta, 5 * np.sqrt(p) * O[1], atol=1e-12)


def test_signal_fixed_noise_redrawn():
    rec = SignalRecipe(seed=3)
    assert np.array_equal(generate_signal(rec, 50, trial=0), generate_signal(rec, 50, trial=0))
    e0 = generate_noise(50, 2.0, seed=3, trial=0)
    e1 = generate_noise(50, 2.0, seed=3, trial=1)
    assert not np.array_equal(e0, e1)
    # streams with the same seed are independent draws
    a = stream(3, "signal").standard_normal(5)
    b = stream(3, "noise").standard_normal(5)
    assert not np.array_equal(a, b)


def test_haar_orthogonal():
    O = haar_orthogonal(120, seed=9)
    np.testing.assert_allclose(O.T @ O, np.eye(120), atol=1e-12)
    np.testing.assert_allclose(np.linalg.norm(O, axis=0), 1.0, atol=1e-12)


def test_haar_p1_symmetric():
    signs = np.array([haar_orthogonal(1, seed=s)[0, 0] for s in range(1000)])
    assert set(np.unique(signs)) == {-1.0, 1.0}
    k = int(np.sum(signs > 0))
    assert abs(k - 500) <= 3 * np.sqrt(250)


def test_errors():
    with pytest.raises(InvalidInputError):
        DesignRecipe("gaussian", 10, 10)
    with pytest.raises(InvalidInputError):
        DesignRecipe("spiked", 10, 10, params={"alpha": 2})
    with pytest.raises(InvalidInputError):
        DesignRecipe("var", 0, 10)
    with pytest.raises(InvalidInputError):
        SignalRecipe(weights=(0.5, 0.6, 0.0))
    with pytest.raises(InvalidInputError):
        generate_signal(SignalRecipe(align_indices=(1,)), 10)
    with pytest.raises(InvalidInputError):
        generate_signal(SignalRecipe(align_indices=(12,)), 10, np.eye(10))
    with pytest.raises(InvalidInputError):
        generate_design(DesignRecipe("matrix_normal", 10, 20, params={"row_df_factor": 0.5}))
    with pytest.raises(InvalidInputError):
        generate_design(DesignRecipe("spiked", 10, 20, params={"noise_sd": "1/p"}))
    with pytest.raises(InvalidInputError):
        stream(0, "weights")
