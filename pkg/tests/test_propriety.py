import json
import math

import numpy as np
import pytest
from scipy import integrate

from tpsurv.distributions import Skew
from tpsurv.model import CensoredObservation, Dataset, ModelSpec, gamma_logprior
from tpsurv.propriety import (
    Verdict,
    check_column_space,
    check_condition_iii,
    check_interval_lp,
    check_sample_size,
    gamma_integral,
    propriety_report,
)
from oracles import box_feasible_bruteforce


def test_column_space():
    X = np.column_stack([np.ones(5), np.arange(5.0)])
    assert check_column_space(X @ [1.0, 2.0], X).verdict is Verdict.VIOLATED
    assert check_column_space(X @ [1.0, 2.0] + [0, 0.1, 0, 0, 0], X).verdict is Verdict.SATISFIED
    assert check_column_space(np.zeros(5), X).verdict is Verdict.VIOLATED


@pytest.mark.parametrize(
    "n,p,q,base,verdict",
    [
        (5, 4, 1, "normal", Verdict.SATISFIED),
        (4, 4, 1, "normal", Verdict.VIOLATED),
        (4, 4, 2, "logistic", Verdict.SATISFIED),
        (3, 4, 2, "laplace", Verdict.VIOLATED),
        (3, 4, 0.5, "normal", Verdict.UNKNOWN),
        (9, 4, 2, "student_t", Verdict.UNKNOWN),
    ],
)
def test_sample_size(n, p, q, base, verdict):
    assert check_sample_size(n, p, q, base).verdict is verdict


def test_gamma_integral_matches_direct_quadrature():
    q, n, a0, b0 = 2.0, 10, 2.0, 2.0
    value, ok, _ = gamma_integral("max", Skew.INVERSE_SCALE, q, n, a0, b0)
    assert ok

    def integrand(g):
        a, b = g, 1 / g
        return max(a, b) ** (n + q - 1) / (a + b) ** n * math.exp(gamma_logprior(g, a0, b0, Skew.INVERSE_SCALE))

    ref = integrate.quad(integrand, 0, 1)[0] + integrate.quad(integrand, 1, np.inf)[0]
    assert value == pytest.approx(ref, rel=1e-6)


def test_condition_iii_paths():
    assert check_condition_iii(Skew.EPSILON, 1, 10).verdict is Verdict.SATISFIED
    assert check_condition_iii(Skew.EPSILON, 3, 10).verdict is Verdict.SATISFIED
    assert check_condition_iii(Skew.INVERSE_SCALE, 2, 10, (2, 2)).verdict is Verdict.NUMERICALLY_CHECKED
    # the integrand grows like g^(q-1-b0) at infinity, so it diverges for large q
    assert check_condition_iii(Skew.INVERSE_SCALE, 10, 10).verdict is Verdict.UNKNOWN


def intercept_example(disjoint):
    X = np.ones((2, 1))
    iv = [(1.0, 2.0), (3.0, 4.0)] if disjoint else [(1.0, 3.0), (2.0, 4.0)]
    return X, iv


def test_hand_built_interval_examples():
    X, iv = intercept_example(True)
    assert check_interval_lp(X, iv).verdict is Verdict.SATISFIED
    X, iv = intercept_example(False)
    check = check_interval_lp(X, iv)
    assert check.verdict is Verdict.VIOLATED
    assert "eta" in check.detail


@pytest.mark.parametrize("seed", range(25))
def test_lp_verdict_matches_bruteforce(seed):
    rng = np.random.default_rng(seed)
    p = int(rng.integers(1, 4))
    n = int(rng.integers(p + 1, 7))
    X = np.column_stack([np.ones(n), rng.normal(size=(n, p - 1))])
    lo = rng.normal(size=n)
    hi = lo + rng.uniform(0.05, 1.5, size=n)
    truth = box_feasible_bruteforce(X, lo, hi)
    verdict = check_interval_lp(X, np.column_stack([lo, hi]), log_transform=False).verdict
    assert verdict is (Verdict.VIOLATED if truth else Verdict.SATISFIED)


def test_ncctg_certified(ncctg):
    rep = propriety_report(ncctg, ModelSpec("logistic"))
    assert rep.overall is Verdict.SATISFIED
    assert rep.path.startswith("uncensored")
    assert json.loads(rep.to_json())["overall"] == "satisfied"


def test_all_right_censored_is_unknown():
    X = np.column_stack([np.ones(4), np.arange(4.0)])
    data = Dataset(X, [CensoredObservation.right(v) for v in (1.0, 2.0, 0.5, 3.0)])
    assert propriety_report(data, ModelSpec("normal")).overall is Verdict.UNKNOWN


def test_interval_only_report():
    X = np.column_stack([np.ones(4), [0.0, 1.0, 2.0, 3.0]])
    # a non-monotone pattern no line can thread through
    iv = [(0.0, 0.1), (2.0, 2.1), (0.0, 0.1), (2.0, 2.1)]
    data = Dataset(X, [CensoredObservation.interval(a, b) for a, b in iv])
    rep = propriety_report(data, ModelSpec("normal"))
    assert rep.overall is Verdict.SATISFIED
    assert "interval" in rep.path
    line = [(0.0, 0.1), (1.0, 1.1), (2.0, 2.1), (3.0, 3.1)]
    data = Dataset(X, [CensoredObservation.interval(a, b) for a, b in line])
    assert propriety_report(data, ModelSpec("normal")).overall is not Verdict.SATISFIED


def test_fully_observed_exact_fit_is_violated():
    X = np.column_stack([np.ones(5), np.arange(5.0)])
    data = Dataset(X, [CensoredObservation.exact(v) for v in X @ [1.0, 0.5]])
    assert propriety_report(data, ModelSpec("normal")).overall is Verdict.VIOLATED


@pytest.mark.parametrize("seed", range(10))
def test_monotone_in_information(seed):
    rng = np.random.default_rng(seed)
    n = 8
    X = np.column_stack([np.ones(n), rng.normal(size=n)])
    y = rng.normal(size=n)
    resp = [CensoredObservation.exact(v) if i < 4 else CensoredObservation.right(v) for i, v in enumerate(y)]
    rep = propriety_report(Dataset(X, resp), ModelSpec("normal"))
    more = [CensoredObservation.exact(v) for v in y]
    rep2 = propriety_report(Dataset(X, more), ModelSpec("normal"))
    if rep.overall is Verdict.SATISFIED:
        assert rep2.overall is not Verdict.VIOLATED
