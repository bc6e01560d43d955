import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from specdebias.errors import InvalidInputError
from specdebias.penalty import PenaltySpec, hpp_extended, prox, prox_deriv_extended


def test_prox_examples():
    assert prox(PenaltySpec(1, 0), 1.0, 2.0) == pytest.approx(1.0, abs=1e-15)
    assert prox(PenaltySpec(1, 0), 1.0, 0.5) == 0.0
    assert prox(PenaltySpec(0, 1), 1.0, 2.0) == pytest.approx(1.0, abs=1e-15)


def test_hpp_examples():
    en = PenaltySpec(1, 0.1)
    assert hpp_extended(en, 0.0) == np.inf
    assert hpp_extended(en, 3.7) == pytest.approx(0.1)
    assert np.all(hpp_extended(PenaltySpec.ridge(0.5), np.array([-2.0, 0.0, 9.0])) == 0.5)


def test_prox_deriv_examples():
    en = PenaltySpec(1, 0.1)
    assert prox_deriv_extended(en, 1.0, 0.5) == 0.0
    assert prox_deriv_extended(en, 1.0, 2.0) == pytest.approx(1 / 1.1, abs=1e-15)
    assert prox_deriv_extended(PenaltySpec.ridge(1.0), 2.0, -17.3) == pytest.approx(1 / 3)


def test_prox_minimises_objective(rng):
    pen = PenaltySpec(0.7, 0.3)
    for x in rng.normal(0, 3, 20):
        v = 1.3
        px = prox(pen, v, x)
        grid = np.linspace(px - 1, px + 1, 2001)
        obj = pen.value(grid) + (grid - x) ** 2 / (2 * v)
        best = pen.value(px) + (px - x) ** 2 / (2 * v)
        assert best <= obj.min() + 1e-12


def test_parse_and_kind():
    assert PenaltySpec.parse("en:1.0,0.1") == PenaltySpec(1.0, 0.1)
    assert PenaltySpec.parse("ridge:0.5") == PenaltySpec(0.0, 0.5)
    assert PenaltySpec.parse("lasso:1.0") == PenaltySpec(1.0, 0.0)
    assert PenaltySpec.parse("en:1.0,0.1").kind == "elastic_net"
    assert PenaltySpec.ridge(0.5).kind == "ridge"
    assert PenaltySpec.lasso(2).kind == "lasso"
    assert PenaltySpec(1, 0.1).c0 == 0.1
    assert PenaltySpec.lasso(1).c0 == 0.0
    assert PenaltySpec.parse(str(PenaltySpec(1.5, 0.25))) == PenaltySpec(1.5, 0.25)
    for bad in ("en:1", "foo:1", "ridge:-1", "lasso:x", "en:0,0"):
        with pytest.raises(InvalidInputError):
            PenaltySpec.parse(bad)
    with pytest.raises(InvalidInputError):
        PenaltySpec(0.0, 0.0)
    with pytest.raises(InvalidInputError):
        prox(PenaltySpec(1, 0), 0.0, 1.0)


def test_value_non_negative(rng):
    x = rng.normal(0, 5, 100)
    assert np.all(PenaltySpec(1, 0.1).value(x) >= 0)


def test_firm_nonexpansive_1e5_pairs():
    rng = np.random.default_rng(11)
    m = 100_000
    x, y = rng.normal(0, 3, m), rng.normal(0, 3, m)
    v = rng.uniform(0.05, 5, m)
    for pen in (PenaltySpec(1, 0.1), PenaltySpec.lasso(0.8), PenaltySpec.ridge(2.0)):
        px, py = prox(pen, v, x), prox(pen, v, y)
        assert np.all((px - py) ** 2 <= (x - y) * (px - py) + 1e-12)


def test_prox_derivative_identity_including_thresholds():
    pen = PenaltySpec(1.0, 0.1)
    v = 1.7
    t = pen.lambda1 * v
    x = np.concatenate([np.linspace(-5, 5, 1001), [t, -t, np.nextafter(t, 10), np.nextafter(-t, -10), 0.0]])
    lhs = prox_deriv_extended(pen, v, x)
    with np.errstate(divide="ignore"):
        rhs = 1.0 / (1.0 + v * hpp_extended(pen, prox(pen, v, x)))
    np.testing.assert_array_equal(lhs, rhs)
    # elastic net form (1/(1 + lambda2 v)) 1{|x| > lambda1 v}
    np.testing.assert_allclose(lhs, (np.abs(x) > t) / (1 + pen.lambda2 * v), atol=1e-15)


def test_prox_deriv_matches_finite_difference(rng):
    pen = PenaltySpec(1.0, 0.4)
    v = 0.9
    x = rng.uniform(-4, 4, 200)
    x = x[np.abs(np.abs(x) - v) > 1e-3]
    fd = (prox(pen, v, x + 1e-6) - prox(pen, v, x - 1e-6)) / 2e-6
    np.testing.assert_allclose(prox_deriv_extended(pen, v, x), fd, atol=1e-7)


@settings(max_examples=200, deadline=None)
@given(l1=st.floats(0, 5), l2=st.floats(0, 5), v=st.floats(1e-3, 10),
       a=st.floats(-50, 50), b=st.floats(-50, 50))
def test_prox_monotone_and_bounded_derivative(l1, l2, v, a, b):
    if l1 == 0 and l2 == 0:
        l2 = 1.0
    pen = PenaltySpec(l1, l2)
    lo, hi = min(a, b), max(a, b)
    assert prox(pen, v, lo) <= prox(pen, v, hi)
    d = prox_deriv_extended(pen, v, a)
    assert 0 <= d <= 1 / (1 + v * pen.c0) + 1e-15
    assert pen.c0 <= hpp_extended(pen, a) <= np.inf
