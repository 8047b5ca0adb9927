import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, special

from fracctrl.specfun import (
    MLParams,
    SeriesConvergenceError,
    gamma_fn,
    mainardi_density,
    mainardi_series,
    mainardi_transform,
    mittag_leffler,
    mittag_leffler_array,
    stable_density,
)

# mpmath references, see tests/oracles/generate.py
GAMMA_175 = 0.91906252684888323
ML_REF = {
    (0.75, 0.75, -1.0): 0.23223772010096143,
    (0.6, 1.0, -0.5): 0.60947582195620002,
    (0.6, 1.0, -1.0): 0.4133273409431063,
    (0.6, 1.0, -5.0): 0.095117846438754617,
    (0.6, 1.0, -25.0): 0.018295717331791214,
    (0.75, 1.0, -0.5): 0.60379034509524676,
    (0.75, 1.0, -1.0): 0.39310830281575406,
    (0.75, 1.0, -5.0): 0.067923974332643942,
    (0.75, 1.0, -25.0): 0.011500180787169601,
    (0.9, 1.0, -0.5): 0.60340549869586097,
    (0.9, 1.0, -1.0): 0.37606602142464188,
    (0.9, 1.0, -5.0): 0.034431324804098424,
    (0.9, 1.0, -25.0): 0.0045121471218401898,
    (0.9, 1.0, -30.0): 0.003713707698459853,
    (0.6, 1.0, -10.0): 0.046589654426804279,
    (0.8, 0.8, -3.0): 0.039915664251597084,
    (0.8, 1.8, -3.0): 0.29569326710592753,
}
WRIGHT_075_07 = 0.51954540724878476


def test_gamma_values():
    assert gamma_fn(1.0) == 1.0
    assert gamma_fn(0.5) == pytest.approx(1.772453850905516, rel=1e-15)
    assert gamma_fn(1.75) == pytest.approx(GAMMA_175, rel=1e-14)


@pytest.mark.parametrize("x", [0.0, -1.0, float("nan")])
def test_gamma_domain(x):
    with pytest.raises(ValueError):
        gamma_fn(x)


def test_ml_closed_forms():
    assert mittag_leffler(MLParams(1.0, 1.0), -1.0) == pytest.approx(math.exp(-1.0), rel=1e-14)
    assert mittag_leffler(MLParams(2.0, 1.0), -1.0) == pytest.approx(math.cos(1.0), rel=1e-14)
    z = np.linspace(-30.0, 0.0, 31)
    e = mittag_leffler_array(0.5, 1.0, z)
    ref = special.erfcx(-z)  # exp(z^2) erfc(-z)
    np.testing.assert_allclose(e, ref, rtol=1e-12)


@pytest.mark.parametrize("key", sorted(ML_REF))
def test_ml_against_high_precision_series(key):
    a, b, z = key
    assert mittag_leffler(MLParams(a, b), z) == pytest.approx(ML_REF[key], rel=1e-12, abs=1e-15)


def test_ml_at_zero():
    for b in (0.5, 1.0, 1.8):
        assert mittag_leffler(MLParams(0.7, b), 0.0) == pytest.approx(1.0 / math.gamma(b), rel=1e-15)


def test_ml_region_boundaries_are_continuous():
    # the evaluator switches methods at |z| = 1 and |z|^(1/alpha) = 40
    for a in (0.6, 0.8, 0.95):
        for zb in (1.0, 40.0**a):
            z = np.array([-zb * (1 - 1e-9), -zb * (1 + 1e-9)])
            v = mittag_leffler_array(a, 1.0, z)
            # |dE/dz| <= 1, so anything beyond the step itself is a jump
            assert abs(v[0] - v[1]) < 1e-12 + 2.1e-9 * zb


def test_ml_rejects_bad_input():
    with pytest.raises(ValueError):
        mittag_leffler(MLParams(0.5, 1.0), 1.0)
    with pytest.raises(ValueError):
        MLParams(0.0, 1.0)
    with pytest.raises(ValueError):
        MLParams(0.5, -1.0)


@given(st.floats(0.55, 0.99), st.floats(0.0, 200.0))
def test_ml_completely_monotone_range(alpha, x):
    # 0 < E_{alpha,1}(-x) <= 1 and decreasing for 0 < alpha <= 1
    v = mittag_leffler_array(alpha, 1.0, np.array([-x, -x - 0.5]))
    assert 0.0 < v[1] <= v[0] <= 1.0 + 1e-15


@given(st.floats(0.55, 0.99), st.floats(0.01, 50.0))
def test_ml_recurrence(alpha, x):
    # E_{a,b}(z) = 1/Gamma(b) + z E_{a,a+b}(z)
    z = -x
    lhs = mittag_leffler(MLParams(alpha, 1.0), z)
    rhs = 1.0 + z * mittag_leffler(MLParams(alpha, alpha + 1.0), z)
    assert lhs == pytest.approx(rhs, abs=1e-12 * max(1.0, x))


def test_mainardi_half_closed_form():
    # alpha = 1/2: eta(theta) = exp(-theta^2/4)/sqrt(pi)
    assert mainardi_density(0.5, 1.0) == pytest.approx(math.exp(-0.25) / math.sqrt(math.pi), rel=1e-15)
    assert mainardi_density(0.5, 1.0) == pytest.approx(0.43939128946772240, rel=1e-14)
    # the series path agrees with the closed form
    assert mainardi_series(0.5, 1.0) == pytest.approx(mainardi_density(0.5, 1.0), rel=1e-13)


def test_one_sided_stable_half():
    # omega_{1/2}(1) = exp(-1/4) / (2 sqrt(pi))
    assert stable_density(0.5, 1.0) == pytest.approx(0.21969564473386122, rel=1e-13)


def test_mainardi_against_wright_series():
    assert mainardi_density(0.75, 0.7) == pytest.approx(WRIGHT_075_07, rel=1e-12)


def test_series_convergence_error():
    with pytest.raises(SeriesConvergenceError):
        mainardi_series(0.9, 20.0)
    with pytest.raises(SeriesConvergenceError):
        mainardi_series(0.9, 3.0, max_terms=3)


def test_kanter_fallback_matches_series():
    # where both are valid the two representations agree
    from fracctrl.specfun import _kanter_density

    for a in (0.6, 0.75, 0.9):
        for th in (0.3, 0.7, 1.0):
            assert _kanter_density(a, th) == pytest.approx(mainardi_series(a, th), rel=1e-10)


@pytest.mark.parametrize("alpha", [0.6, 0.75, 0.9])
def test_mainardi_probability_density(alpha):
    mass = mainardi_transform(alpha, 0.0)
    assert mass == pytest.approx(1.0, abs=1e-9)
    # adaptive quadrature over the whole line as an independent oracle
    val, _ = integrate.quad(lambda t: mainardi_density(alpha, t), 0.0, np.inf, limit=200)
    assert val == pytest.approx(1.0, abs=1e-7)


@pytest.mark.parametrize("alpha", [0.6, 0.75, 0.9])
def test_mainardi_first_moment(alpha):
    assert mainardi_transform(alpha, 0.0, moment=1) == pytest.approx(1.0 / math.gamma(1.0 + alpha), abs=1e-9)


@given(st.floats(0.55, 0.95), st.floats(0.01, 8.0))
def test_mainardi_positive(alpha, theta):
    assert mainardi_density(alpha, theta) >= 0.0


def test_mainardi_domain():
    for a, th in ((1.0, 1.0), (0.0, 1.0), (0.5, 0.0), (0.5, -1.0)):
        with pytest.raises(ValueError):
            mainardi_density(a, th)
