"""Posterior-predictive survival and residual life for AFT fits."""
from __future__ import annotations

import csv
import enum
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np

from .distributions import cdf_ab, logsf_ab, ppf_ab
from .model import ModelSpec, _ab_fast, unpack
from .sampler import Chain

INTERCEPT_NAME = "beta[(Intercept)]"
BRACKET_LIMIT = 1e6


class CentringRule(str, enum.Enum):
    MODE = "mode"
    MEDIAN = "median"


class PredictionError(RuntimeError):
    pass


def _p_of(chain: Chain, spec: ModelSpec) -> int:
    return chain.dim - 1 - int(spec.two_piece) - int(spec.free_delta)


def error_medians(chain: Chain, spec: ModelSpec) -> np.ndarray:
    """Per-draw median of the mode-centred error distribution."""
    _, sigma, gamma, delta = unpack(chain.draws, spec, _p_of(chain, spec))
    a, b = _ab_fast(gamma, spec.parameterisation)
    return ppf_ab(0.5, 0.0, sigma, a, b, spec.baseline, delta)


def recentre(chain: Chain, rule: CentringRule | str, spec: ModelSpec, intercept: int | None = None) -> Chain:
    """Shift the intercept so the error distribution is centred by ``rule``.

    Under the median rule each draw's intercept gains the median ``m`` of its
    error law, so the re-centred error has median 0.  The returned chain is
    tagged with its centring so predictions can undo the shift.
    """
    rule = CentringRule(rule)
    if chain.centring != CentringRule.MODE.value:
        raise ValueError("chain is already re-centred")
    if intercept is None:
        if INTERCEPT_NAME not in chain.names:
            raise PredictionError("re-centring needs an intercept column")
        intercept = chain.names.index(INTERCEPT_NAME)
    if rule is CentringRule.MODE:
        return chain
    draws = chain.draws.copy()
    draws[:, intercept] += error_medians(chain, spec)
    return replace(chain, draws=draws, centring=rule.value, config=dict(chain.config), unconstrained=None)


def relabel(chain: Chain, rule: CentringRule | str) -> Chain:
    """Read the sampled intercept as the intercept of the ``rule``-centred model.

    The draws are not shifted.  Only the error law moves, so its ``rule``
    point sits at 0.  Unlike :func:`recentre` this changes predictions for
    skewed errors: each draw's predictive law moves by minus its error
    median.
    """
    rule = CentringRule(rule)
    if chain.centring != CentringRule.MODE.value:
        raise ValueError("chain is already re-centred")
    if rule is CentringRule.MODE:
        return chain
    return replace(chain, centring=rule.value, config=dict(chain.config))


def _per_draw(chain: Chain, spec: ModelSpec, x):
    """Linear predictor, error location and shape arrays for each draw."""
    p = _p_of(chain, spec)
    beta, sigma, gamma, delta = unpack(chain.draws, spec, p)
    x = np.asarray(x, dtype=float)
    if x.shape != (p,):
        raise ValueError(f"covariate vector has shape {x.shape}, expected ({p},)")
    a, b = _ab_fast(gamma, spec.parameterisation)
    eta = beta @ x
    loc = np.zeros_like(eta)
    if chain.centring == CentringRule.MEDIAN.value:
        loc = -ppf_ab(0.5, 0.0, sigma, a, b, spec.baseline, delta)
    return eta, loc, sigma, a, b, delta


def _grid(t):
    t = np.asarray(t, dtype=float)
    if np.any(~(t > 0)):
        raise ValueError("times must be positive")
    return t


def predictive_cdf(t, x, chain: Chain, spec: ModelSpec, log_time: bool = True):
    """Posterior-predictive CDF of the survival time at ``t``.

    Averages the per-draw closed-form CDF of ``log t - x'beta`` over the
    chain.  With ``log_time=False`` the response is modelled on its own scale.
    """
    eta, loc, s, a, b, df = _per_draw(chain, spec, x)
    tt = np.atleast_1d(_grid(t) if log_time else np.asarray(t, dtype=float))
    y = np.log(tt) if log_time else tt
    out = cdf_ab(y[:, None] - eta[None, :], loc, s, a, b, spec.baseline, df).mean(axis=1)
    return out if np.ndim(t) else float(out[0])


def predictive_log_survival(t, x, chain: Chain, spec: ModelSpec) -> np.ndarray:
    """``log(1 - Pi(t))`` by log-sum-exp over per-draw survival, without cancellation."""
    eta, loc, s, a, b, df = _per_draw(chain, spec, x)
    y = np.log(np.atleast_1d(_grid(t)))
    ls = logsf_ab(y[:, None] - eta[None, :], loc, s, a, b, spec.baseline, df)
    m = ls.max(axis=1, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        return (m[:, 0] + np.log(np.exp(ls - m).mean(axis=1)))


def predictive_survival(t, x, chain: Chain, spec: ModelSpec):
    out = np.exp(predictive_log_survival(t, x, chain, spec))
    return out if np.ndim(t) else float(out[0])


def residual_life_survival(t, T_j: float, x, chain: Chain, spec: ModelSpec):
    """Predictive probability of surviving past ``t`` given survival to ``T_j``.

    Computed as ``S(t) / S(T_j)`` with ``S = 1 - Pi``, which equals
    ``1 - (Pi(t) - Pi(T_j)) / (1 - Pi(T_j))``.
    """
    if not T_j > 0:
        raise ValueError("censoring time must be positive")
    tt = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(tt < T_j):
        raise ValueError("t must be at least T_j")
    ls0 = predictive_log_survival(T_j, x, chain, spec)[0]
    if not math.isfinite(ls0):
        raise PredictionError(f"predictive survival at T_j={T_j} is numerically zero")
    out = np.exp(predictive_log_survival(tt, x, chain, spec) - ls0)
    out = np.minimum(out, 1.0)
    out[tt == T_j] = 1.0
    return out if np.ndim(t) else float(out[0])


def residual_life_quantile(p, T_j: float, x, chain: Chain, spec: ModelSpec,
                           rtol: float = 1e-8, limit: float = BRACKET_LIMIT):
    """Time ``t >= T_j`` at which the residual-life CDF reaches ``p``.

    Brackets by doubling from ``T_j`` and bisects on ``log t``.
    """
    ps = np.atleast_1d(np.asarray(p, dtype=float))
    if np.any((ps <= 0) | (ps >= 1)):
        raise ValueError("p must lie in (0, 1)")
    ls0 = predictive_log_survival(T_j, x, chain, spec)[0]
    if not math.isfinite(ls0):
        raise PredictionError(f"predictive survival at T_j={T_j} is numerically zero")

    def cdf(t):
        return -math.expm1(predictive_log_survival(t, x, chain, spec)[0] - ls0)

    out = []
    for pk in ps:
        lo, hi = float(T_j), 2.0 * T_j
        while cdf(hi) < pk:
            lo, hi = hi, 2.0 * hi
            if hi > limit * T_j:
                shortfall = pk - cdf(limit * T_j)
                raise PredictionError(
                    f"no bracket below {limit:g}*T_j for p={pk}; CDF short by {shortfall:.3g}")
        llo, lhi = math.log(lo), math.log(hi)
        while lhi - llo > rtol:
            mid = 0.5 * (llo + lhi)
            if cdf(math.exp(mid)) < pk:
                llo = mid
            else:
                lhi = mid
        out.append(math.exp(0.5 * (llo + lhi)))
    return np.array(out) if np.ndim(p) else out[0]


def quantile_table(subjects, probs, chain: Chain, spec: ModelSpec, threads: int = 1):
    """Residual-life quantiles for ``subjects = [(label, T_j, x), ...]``.

    Returns ``[(label, [q(p) for p in probs]), ...]`` in input order.
    """
    def one(s):
        label, T_j, x = s
        return label, list(residual_life_quantile(list(probs), T_j, x, chain, spec))

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            return list(ex.map(one, subjects))
    return [one(s) for s in subjects]


def quantile_csv(table, probs) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["subject"] + [f"q{round(100 * p, 6):g}" for p in probs])
    for label, qs in table:
        w.writerow([label] + [repr(float(q)) for q in qs])
    return buf.getvalue()
