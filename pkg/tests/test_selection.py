import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from oracles import normal_evidence_flat_prior
from tpsurv.distributions import TwoPieceParams, tp_sample
from tpsurv.fitting import fit
from tpsurv.model import (
    CensoredObservation,
    Dataset,
    ModelSpec,
    ParameterVector,
    gamma_logprior,
    loglikelihood,
)
from tpsurv.sampler import Chain, ChainConfig
from tpsurv.selection import (
    FitError,
    bic,
    bic_value,
    compare,
    comparison_csv,
    comparison_text,
    log_cpo,
    log_marginal_is,
    lpml,
    mle_fit,
    reflected_kde,
    savage_dickey_bf,
    silverman_bandwidth,
)

SYM_NORMAL = ModelSpec("normal", two_piece=False)


def regression_data(n=60, seed=0, gamma=0.0, censor_every=0):
    rng = np.random.default_rng(seed)
    X = np.column_stack([np.ones(n), rng.normal(size=n)])
    e = tp_sample(n, TwoPieceParams(0.0, 0.6, gamma), rng_seed=seed + 1000)
    y = X @ [1.0, 0.5] + e
    resp = [CensoredObservation.right(v) if censor_every and i % censor_every == 0 else CensoredObservation.exact(v)
            for i, v in enumerate(y)]
    return Dataset(X, resp, ["(Intercept)", "x"])


def test_mle_is_least_squares_for_symmetric_normal():
    data = regression_data(80, seed=3)
    theta, ll = mle_fit(data, SYM_NORMAL)
    y = np.array([r.value for r in data.responses])
    beta, *_ = np.linalg.lstsq(data.X, y, rcond=None)
    s2 = np.mean((y - data.X @ beta) ** 2)
    np.testing.assert_allclose(theta.beta, beta, atol=1e-4)
    assert theta.sigma**2 == pytest.approx(s2, abs=1e-4)
    assert ll == pytest.approx(stats.norm(data.X @ beta, math.sqrt(s2)).logpdf(y).sum(), abs=1e-6)


def test_gamma_hat_near_zero_on_large_symmetric_sample():
    data = regression_data(2000, seed=11)
    theta, _ = mle_fit(data, ModelSpec("normal"))
    assert abs(theta.gamma) < 0.05


@pytest.mark.parametrize("baseline", ["normal", "logistic", "laplace"])
def test_mle_never_worse_than_start(baseline):
    data = regression_data(50, seed=5, gamma=0.3, censor_every=4)
    spec = ModelSpec(baseline)
    start = ParameterVector([0.0, 0.0], 2.0, 0.5)
    _, ll = mle_fit(data, spec, start)
    assert ll >= loglikelihood(start, data, spec)


def test_mle_rejects_bad_start():
    data = regression_data(10)
    far = Dataset(data.X, [CensoredObservation.interval(1e4, 1e4 + 1)] * data.n, data.names)
    with pytest.raises(FitError):
        mle_fit(far, SYM_NORMAL, ParameterVector([0.0, 0.0], 0.01))


def test_bic_penalty_arithmetic():
    assert bic_value(-100.0, 4, 50) == pytest.approx(4 * math.log(50) + 200)
    # doubling k with the same likelihood adds k log n
    assert bic_value(-100.0, 8, 50) - bic_value(-100.0, 4, 50) == pytest.approx(4 * math.log(50))


def test_bic_invariances():
    data = regression_data(70, seed=2, gamma=0.4, censor_every=5)
    spec = ModelSpec("logistic")
    base = bic(data, spec)
    perm = np.random.default_rng(0).permutation(data.n)
    assert bic(data.subset(perm), spec) == pytest.approx(base, abs=1e-6)
    # rescale and shift the covariate: the fitted likelihood does not change
    X2 = data.X.copy()
    X2[:, 1] = 3.0 * X2[:, 1] - 2.0
    assert bic(Dataset(X2, data.responses, data.names), spec) == pytest.approx(base, abs=1e-6)


def test_lpml_with_single_draw_is_loglik():
    data = regression_data(30, seed=4, censor_every=3)
    spec = ModelSpec("logistic")
    theta = ParameterVector([0.9, 0.4], 0.7, 0.2)
    ch = Chain(theta.to_array(spec)[None, :], np.zeros(1), 1.0, 0, spec.param_names(data.names))
    assert lpml(ch, data, spec) == pytest.approx(loglikelihood(theta, data, spec), rel=1e-12)


def test_log_cpo_matches_direct_harmonic_mean():
    rng = np.random.default_rng(7)
    L = rng.normal(-1.0, 0.3, size=(50, 8))
    direct = np.log(1.0 / np.mean(1.0 / np.exp(L), axis=0))
    np.testing.assert_allclose(log_cpo(L), direct, atol=1e-10)


def test_log_cpo_stable_for_tiny_likelihoods():
    L = np.array([[-800.0], [-801.0]])
    expected = -800.0 - math.log((1 + math.e) / 2)
    assert log_cpo(L)[0] == pytest.approx(expected, rel=1e-12)


def test_lpml_zero_likelihood_warns():
    data = Dataset(np.ones((2, 1)), [CensoredObservation.exact(0.0), CensoredObservation.interval(50.0, 51.0)])
    spec = SYM_NORMAL
    draws = np.array([[0.0, 0.1], [0.0, 1.0]])
    ch = Chain(draws, np.zeros(2), 1.0, 0, spec.param_names(["(Intercept)"]))
    with pytest.warns(RuntimeWarning, match="observation 1"):
        assert lpml(ch, data, spec) == -math.inf


def test_jeffreys_prior_ordinate():
    assert math.exp(gamma_logprior(0.0)) == pytest.approx(0.318310, abs=1e-6)


def test_reflected_kde():
    rng = np.random.default_rng(1)
    x = rng.normal(size=20000)
    at = np.array([-1.0, 0.0, 0.5])
    np.testing.assert_allclose(reflected_kde(x, at), stats.norm.pdf(at), atol=0.01)
    # reflection restores density near a hard edge
    u = rng.uniform(0, 1, size=20000)
    assert reflected_kde(u, 0.0, lower=0.0, upper=1.0)[0] == pytest.approx(1.0, abs=0.05)
    assert reflected_kde(u, 0.0)[0] < 0.6
    assert silverman_bandwidth(x) == pytest.approx(0.9 * 20000 ** -0.2, rel=0.05)


def _gamma_chain(values, spec=ModelSpec("normal")):
    g = np.asarray(values, dtype=float)
    draws = np.column_stack([np.zeros_like(g), np.ones_like(g), g])
    return Chain(draws, np.zeros(g.size), 1.0, 0, spec.param_names(["(Intercept)"]))


def test_savage_dickey_against_known_posterior():
    rng = np.random.default_rng(3)
    g = np.clip(rng.normal(0.2, 0.1, size=20000), -0.99, 0.99)
    bf = savage_dickey_bf(_gamma_chain(g), ModelSpec("normal"))
    assert bf == pytest.approx(stats.norm(0.2, 0.1).pdf(0.0) * math.pi, rel=0.05)


def test_savage_dickey_thinning_invariance():
    rng = np.random.default_rng(9)
    g = np.tanh(rng.normal(0.1, 0.25, size=10000))
    ch = _gamma_chain(g)
    assert savage_dickey_bf(ch.thinned(2), ModelSpec("normal")) == pytest.approx(
        savage_dickey_bf(ch, ModelSpec("normal")), rel=0.2)


def test_savage_dickey_errors():
    with pytest.raises(FitError):
        savage_dickey_bf(_gamma_chain(np.full(10, 0.3)), ModelSpec("normal"))
    with pytest.raises(ValueError):
        savage_dickey_bf(_gamma_chain(np.linspace(0, 1, 10)), SYM_NORMAL)


@pytest.fixture(scope="module")
def location_toy():
    y = np.random.default_rng(21).normal(2.0, 1.5, size=25)
    data = Dataset(np.ones((y.size, 1)), [CensoredObservation.exact(v) for v in y], ["(Intercept)"])
    chain = fit(data, SYM_NORMAL, ChainConfig(n_keep=3000, burn_in=2000, thin=3, seed=4))
    return y, data, chain


def test_is_matches_analytic_evidence(location_toy):
    y, data, chain = location_toy
    est = log_marginal_is(chain, data, SYM_NORMAL, n_is=20000, seed=1)
    assert est.reliable
    assert abs(est.log_marginal - normal_evidence_flat_prior(y)) < 3 * est.mc_se + 1e-3


def test_bayes_factor_self_and_transitivity(location_toy):
    _, data, chain = location_toy
    fits = {"A": (data, SYM_NORMAL, chain), "B": (data, SYM_NORMAL, chain),
            "C": (data, ModelSpec("logistic", two_piece=False),
                  fit(data, ModelSpec("logistic", two_piece=False), ChainConfig(1500, 1000, 3, seed=2)))}
    rows = {r.model_name: r for r in compare(fits, reference="A", n_is=5000, seed=3)}
    assert rows["B"].bf_vs_reference == pytest.approx(1.0, abs=1e-12)
    rows_c = {r.model_name: r for r in compare(fits, reference="C", n_is=5000, seed=3)}
    # BF(A, C) = BF(A, B) * BF(B, C)
    bf_ab = 1.0 / rows["B"].bf_vs_reference
    assert rows_c["A"].bf_vs_reference == pytest.approx(bf_ab * rows_c["B"].bf_vs_reference, rel=1e-12)
    assert rows_c["A"].bf_vs_reference == pytest.approx(1.0 / rows["C"].bf_vs_reference, rel=1e-12)
    text = comparison_text(list(rows.values()))
    assert text.splitlines()[0].split() == ["Model", "A", "B", "C"]
    header = comparison_csv(list(rows.values())).splitlines()[0].split(",")
    assert header[:4] == ["model", "beta[(Intercept)]_median", "beta[(Intercept)]_lower95",
                          "beta[(Intercept)]_upper95"]
    assert header[-1] == "savage_dickey_bf01"


def test_is_flags_poor_proposal(location_toy):
    _, data, chain = location_toy
    # a chain collapsed onto a point gives a far too narrow proposal
    jitter = np.random.default_rng(0).normal(scale=1e-6, size=chain.draws.shape)
    narrow = Chain(chain.draws[:1] + jitter, chain.logpost, 1.0, 0, chain.names)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        est = log_marginal_is(narrow, data, SYM_NORMAL, n_is=4000)
    assert not est.reliable


def _bf01_median(gamma_true, reps, n=500):
    spec = ModelSpec("normal")
    out = []
    for r in range(reps):
        y = tp_sample(n, TwoPieceParams(0.0, 1.0, gamma_true), rng_seed=1000 * r + 17)
        data = Dataset(np.ones((n, 1)), [CensoredObservation.exact(v) for v in y])
        ch = fit(data, spec, ChainConfig(n_keep=600, burn_in=1500, thin=4, seed=r))
        out.append(savage_dickey_bf(ch, spec))
    return float(np.median(out))


@pytest.mark.slow
def test_savage_dickey_identifies_symmetry():
    assert _bf01_median(0.0, 50) > 1.0


@pytest.mark.slow
def test_savage_dickey_identifies_skewness():
    assert _bf01_median(0.75, 50) < 0.1


@settings(max_examples=25, deadline=None)
@given(vals=st.lists(st.floats(-30, 5), min_size=1, max_size=20))
def test_log_cpo_bounded_by_min_and_mean(vals):
    L = np.array(vals)[:, None]
    c = log_cpo(L)[0]
    # harmonic mean lies between the minimum and the arithmetic mean
    assert L.min() - 1e-9 <= c <= np.log(np.mean(np.exp(L))) + 1e-9
