import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq
from scipy.special import ndtri

from fblbeam.rate import (
    bessel_poly,
    dispersion,
    gen_lambert_w,
    make_regime,
    nu0,
    nu4,
    q_func,
    q_inv,
    rate,
    rate_derivs,
    solve_rate_eq_bisect,
    solve_rate_eq_series,
)

# 40-digit mpmath values, frozen
QINV_REF = {1e-2: 2.3263478740408411009, 1e-5: 4.2648907939228246285,
            1e-10: 6.3613409024040562047, 0.3: 0.52440051270804078404}
REGIME_REF = dict(vartheta=0.37696665017536346, nu0=0.061217209924263567,
                  nu2=0.25632404309325588, nu3=4.7985796642498875, nu4=0.43748247008579468)


@pytest.mark.parametrize("eps", sorted(QINV_REF))
def test_q_inv_matches_high_precision(eps):
    assert q_inv(eps) == pytest.approx(QINV_REF[eps], rel=1e-13)


def test_q_inv_agrees_with_scipy_quantile():
    eps = np.logspace(-12, np.log10(0.49), 50)
    ours = np.array([q_inv(e) for e in eps])
    np.testing.assert_allclose(ours, -ndtri(eps), rtol=1e-12)


def test_q_inv_domain():
    assert q_inv(0.5) == 0.0
    for bad in (0.0, 1.0, -0.1, 1.5):
        with pytest.raises(ValueError):
            q_inv(bad)


@given(st.floats(min_value=-6, max_value=6))
def test_q_func_inverse_roundtrip(x):
    p = q_func(x)
    if 1e-300 < p < 1 - 1e-12:
        # p carries ~1e-16 absolute error, magnified by 1/pdf(x)
        pdf = math.exp(-x * x / 2) / math.sqrt(2 * math.pi)
        assert q_inv(p) == pytest.approx(x, abs=1e-9 + 1e-15 / pdf)


def test_rate_shannon_limit_and_scalar_type():
    assert rate(3.0, 0.0) == pytest.approx(math.log(4.0))
    assert isinstance(rate(1.0, 0.3), float)
    assert rate(np.array([0.0, 1.0]), 0.3).shape == (2,)
    assert rate(0.0, 0.7) == 0.0


def test_rate_rejects_bad_inputs():
    with pytest.raises(ValueError):
        rate(-1.0, 0.1)
    with pytest.raises(ValueError):
        rate(1.0, -0.1)


@pytest.mark.parametrize("v", [0.1, 0.377, 1.0, 5.0])
def test_rate_derivatives_match_finite_differences(v):
    g = np.array([0.01, 0.2, 1.0, 7.0, 50.0])
    d1, d2, _ = rate_derivs(g, v)
    h = 1e-5 * (1 + g)
    fd1 = (rate(g + h, v) - rate(g - h, v)) / (2 * h)
    fd2 = (rate(g + h, v) - 2 * rate(g, v) + rate(g - h, v)) / h ** 2
    np.testing.assert_allclose(d1, fd1, rtol=1e-6, atol=1e-9)
    np.testing.assert_allclose(d2, fd2, rtol=1e-3, atol=1e-6)


def test_regime_thresholds_match_high_precision(regime):
    for key, ref in REGIME_REF.items():
        assert getattr(regime, key) == pytest.approx(ref, rel=1e-11), key
    assert regime.r_min == pytest.approx(2 * math.log(2))


def test_regime_to_dict_and_shannon_mode():
    d = make_regime(1e-5, 128, 256).to_dict()
    assert d["nu1"] == 0.0 and set(d) >= {"nu0", "nu2", "nu3", "nu4", "r_min"}
    sh = make_regime(1e-5, 128, 256, shannon_mode=True)
    assert sh.vartheta == 0.0 and sh.nu3 == pytest.approx(3.0)


@pytest.mark.parametrize("eps", [0.5, 0.7, 0.0])
def test_regime_rejects_non_positive_penalty(eps):
    with pytest.raises(ValueError):
        make_regime(eps, 128, 256)


def _bessel_exact(m, z):
    z = Fraction(z)
    return float(sum(Fraction(math.factorial(m + k), math.factorial(k) * math.factorial(m - k))
                     * (z / 2) ** k for k in range(m + 1)))


@pytest.mark.parametrize("m", [0, 1, 2, 5, 12])
@pytest.mark.parametrize("z", [-0.75, 0.1, 2.0])
def test_bessel_poly_against_factorial_sum(m, z):
    assert bessel_poly(m, z) == pytest.approx(_bessel_exact(m, z), rel=1e-12)


def test_bessel_poly_low_orders():
    # B_1(z) = 1 + z, B_2(z) = 1 + 3z + 3z^2
    assert bessel_poly(1, 0.3) == pytest.approx(1.3)
    assert bessel_poly(2, 0.3) == pytest.approx(1 + 0.9 + 0.27)


def test_gen_lambert_w_solves_its_equation_when_convergent():
    t1, t2, mu = 1.0, -1.0, -0.05
    w = gen_lambert_w(t1, t2, mu, terms=80)
    root = brentq(lambda x: math.exp(x) * (x - t1) * (x - t2) - mu, 0.5, 1.0, xtol=1e-15)
    assert w == pytest.approx(root, abs=1e-12)


def test_gen_lambert_w_zero_argument():
    assert gen_lambert_w(0.3, -0.3, 0.0) == 0.3


def test_series_agrees_with_bisection_for_large_penalty():
    for v in (1.0, 2.0, 5.0):
        assert solve_rate_eq_series(0.0, v) == pytest.approx(solve_rate_eq_bisect(0.0, v),
                                                             rel=1e-12)


def test_series_error_shrinks_as_penalty_grows():
    errs = [abs(solve_rate_eq_series(0.0, v) / solve_rate_eq_bisect(0.0, v) - 1)
            for v in (0.3, 0.4, 0.5, 1.0)]
    assert all(a > b for a, b in zip(errs, errs[1:]))


@given(st.floats(min_value=0.0, max_value=4.0), st.floats(min_value=1e-3, max_value=10.0))
@settings(max_examples=80, deadline=None)
def test_bisection_root_solves_rate_equation(alpha, v):
    g = solve_rate_eq_bisect(alpha, v)
    assert g >= 0
    assert rate(g, v) == pytest.approx(alpha, abs=1e-9 * max(1.0, alpha))
    # the returned root lies on the increasing branch
    assert g >= nu0(v) - 1e-12


@pytest.mark.parametrize("v", [0.1, 0.377, 0.5, 1.0, 5.0])
def test_nu0_is_stationary_and_nu4_is_inflection(v):
    d1, _, _ = rate_derivs(nu0(v), v)
    assert abs(d1) < 1e-8
    _, d2, _ = rate_derivs(nu4(v), v)
    assert abs(d2) < 1e-8


def test_dispersion_limits():
    assert dispersion(0.0) == 0.0
    assert dispersion(1e9) == pytest.approx(1.0)
