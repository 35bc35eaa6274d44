import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from tpsurv.distributions import (
    LAPLACE,
    LOGISTIC,
    NORMAL,
    Baseline,
    Skew,
    TwoPieceParams,
    ab,
    student_t,
    tp_cdf,
    tp_logcdf,
    tp_logpdf,
    tp_logsf,
    tp_median,
    tp_pdf,
    tp_quantile,
    tp_sample,
    tp_sf,
)

BASELINES = [NORMAL, LAPLACE, LOGISTIC, student_t(3.0)]
SCIPY = {
    "normal": stats.norm(),
    "laplace": stats.laplace(),
    "logistic": stats.logistic(),
    "student_t": stats.t(3.0),
}


def eps_to_inverse(g):
    # same mode mass b/(a+b) under the inverse-scale form
    return math.sqrt((1 - g) / (1 + g))


@pytest.mark.parametrize("base", BASELINES, ids=lambda b: b.label)
def test_symmetric_reduction_matches_scipy(base):
    z = np.linspace(-6, 6, 41)
    ref = SCIPY[base.kind]
    for params in (TwoPieceParams(0.3, 1.7, 0.0, base), TwoPieceParams(0.3, 1.7, 1.0, base, Skew.INVERSE_SCALE)):
        np.testing.assert_allclose(tp_pdf(z, params), ref.pdf((z - 0.3) / 1.7) / 1.7, rtol=1e-12)
        np.testing.assert_allclose(tp_cdf(z, params), ref.cdf((z - 0.3) / 1.7), rtol=1e-12, atol=1e-15)


def test_trivial_normal_ordinate():
    assert tp_logpdf(0.0, TwoPieceParams()) == pytest.approx(-0.918938533204673, abs=1e-12)


@pytest.mark.parametrize("base", BASELINES, ids=lambda b: b.label)
@pytest.mark.parametrize("gamma", [-0.75, 0.5])
def test_cdf_is_integral_of_pdf(base, gamma):
    params = TwoPieceParams(0.4, 0.8, gamma, base)
    for z in (-3.0, -0.2, 0.4, 1.1, 5.0):
        f = lambda u: tp_pdf(u, params)  # noqa: E731
        val = integrate.quad(f, -np.inf, min(z, 0.4))[0]
        if z > 0.4:
            val += integrate.quad(f, 0.4, z)[0]
        assert tp_cdf(z, params) == pytest.approx(val, abs=1e-8)


def test_epsilon_mode_mass_and_scales():
    assert ab(0.5) == (0.5, 1.5)
    assert ab(2.0, Skew.INVERSE_SCALE) == (2.0, 0.5)
    assert TwoPieceParams(gamma=0.5).mode_mass == 0.75
    assert tp_cdf(0.0, TwoPieceParams(gamma=0.5)) == 0.75


def test_sample_fraction_below_mode():
    n = 100_000
    x = tp_sample(n, TwoPieceParams(gamma=0.5), rng_seed=11)
    se = math.sqrt(0.75 * 0.25 / n)
    assert abs(np.mean(x <= 0) - 0.75) < 3 * se


@pytest.mark.parametrize("base", BASELINES, ids=lambda b: b.label)
def test_log_tails_avoid_cancellation(base):
    params = TwoPieceParams(0.0, 1.0, 0.3, base)
    # deep right tail: sf is tiny but its log is finite and consistent
    z = 30.0
    lsf = tp_logsf(z, params)
    assert np.isfinite(lsf)
    if base.kind != "normal":
        assert lsf == pytest.approx(math.log(tp_sf(z, params)), rel=1e-8)
    assert tp_logcdf(-30.0, params) < -5
    np.testing.assert_allclose(
        np.exp(tp_logcdf(np.array([-1.0, 0.5]), params)), tp_cdf(np.array([-1.0, 0.5]), params), rtol=1e-12
    )


def test_inverse_scale_equals_epsilon_at_matched_mass():
    # the two forms differ only by an overall scale factor
    g = 0.5
    e = TwoPieceParams(0.0, 1.0, g)
    gi = eps_to_inverse(g)
    a, b = ab(g)
    ai, bi = ab(gi, Skew.INVERSE_SCALE)
    k = a / ai
    i = TwoPieceParams(0.0, k, gi, parameterisation=Skew.INVERSE_SCALE)
    z = np.linspace(-4, 4, 17)
    np.testing.assert_allclose(tp_pdf(z, e), tp_pdf(z, i), rtol=1e-12)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(sigma=0.0),
        dict(sigma=-1.0),
        dict(gamma=1.0),
        dict(gamma=-1.0),
        dict(gamma=0.0, parameterisation=Skew.INVERSE_SCALE),
        dict(mu=np.inf),
    ],
)
def test_invalid_parameters_rejected(kwargs):
    with pytest.raises(ValueError):
        TwoPieceParams(**kwargs)


def test_domain_errors():
    with pytest.raises(ValueError):
        tp_quantile(0.0, TwoPieceParams())
    with pytest.raises(ValueError):
        tp_quantile(1.0, TwoPieceParams())
    with pytest.raises(ValueError):
        tp_logpdf(np.nan, TwoPieceParams())
    with pytest.raises(ValueError):
        Baseline("student_t")
    with pytest.raises(ValueError):
        Baseline("cauchy")


def test_cdf_limits():
    p = TwoPieceParams(gamma=-0.3, baseline=LOGISTIC)
    assert tp_cdf(-np.inf, p) == 0.0
    assert tp_cdf(np.inf, p) == 1.0


def test_median_has_half_mass():
    for base in BASELINES:
        p = TwoPieceParams(1.0, 2.0, 0.6, base)
        assert tp_cdf(tp_median(p), p) == pytest.approx(0.5, abs=1e-12)
    assert tp_median(TwoPieceParams(1.0, 2.0, 0.0)) == pytest.approx(1.0, abs=1e-15)


def test_sampling_is_seeded():
    p = TwoPieceParams(gamma=0.2, baseline=LAPLACE)
    np.testing.assert_array_equal(tp_sample(50, p, 3), tp_sample(50, p, 3))
    assert not np.array_equal(tp_sample(50, p, 3), tp_sample(50, p, 4))


@settings(max_examples=60, deadline=None)
@given(
    gamma=st.floats(-0.95, 0.95),
    sigma=st.floats(0.05, 20.0),
    kind=st.sampled_from(["normal", "laplace", "logistic", "student_t"]),
    z1=st.floats(-50, 50),
    z2=st.floats(-50, 50),
)
def test_cdf_monotone(gamma, sigma, kind, z1, z2):
    base = Baseline(kind, 4.0 if kind == "student_t" else None)
    p = TwoPieceParams(0.0, sigma, gamma, base)
    lo, hi = sorted((z1, z2))
    assert tp_cdf(lo, p) <= tp_cdf(hi, p)


@settings(max_examples=60, deadline=None)
@given(
    gamma=st.floats(-0.9, 0.9),
    u=st.floats(1e-6, 1 - 1e-6),
    kind=st.sampled_from(["normal", "laplace", "logistic", "student_t"]),
)
def test_quantile_roundtrip_property(gamma, u, kind):
    base = Baseline(kind, 5.0 if kind == "student_t" else None)
    p = TwoPieceParams(-1.0, 0.7, gamma, base)
    assert tp_cdf(tp_quantile(u, p), p) == pytest.approx(u, abs=1e-10)
