"""Linear regression / AFT model with two-piece errors and censoring.

The response of observation ``j`` is ``y_j = x_j' beta + eps_j`` with
``eps_j ~ TP(0, sigma, gamma, delta; f)``; the model is centred at the error
mode.  Responses may be exact, right-, left- or interval-censored.  The prior
is ``pi(beta, sigma, gamma, delta) ∝ pi(gamma) pi(delta) / sigma**q`` with a
flat ``beta`` prior.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy import special

from .distributions import (
    BASELINE_KINDS,
    Baseline,
    Skew,
    ab,
    gamma_in_domain,
    logcdf_ab,
    logpdf_ab,
    logsf_ab,
    cdf_ab,
    symmetry_point,
)

_LOG2 = math.log(2.0)
EXACT, RIGHT, LEFT, INTERVAL = "exact", "right", "left", "interval"
_KINDS = (EXACT, RIGHT, LEFT, INTERVAL)


@dataclass(frozen=True)
class CensoredObservation:
    """One response on the model scale (log-time for AFT fits).

    ``Exact``, ``Right`` and ``Left`` use ``value``; ``Interval`` uses
    ``lower < upper``.
    """

    kind: str
    value: float = math.nan
    lower: float = math.nan
    upper: float = math.nan

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown censoring kind {self.kind!r}")
        if self.kind == INTERVAL:
            if not (math.isfinite(self.lower) and math.isfinite(self.upper)):
                raise ValueError("interval bounds must be finite")
            if not self.lower < self.upper:
                raise ValueError(f"interval needs lower < upper, got [{self.lower}, {self.upper}]")
        elif not math.isfinite(self.value):
            raise ValueError(f"{self.kind} observation needs a finite value")

    @classmethod
    def exact(cls, y):
        return cls(EXACT, float(y))

    @classmethod
    def right(cls, y):
        return cls(RIGHT, float(y))

    @classmethod
    def left(cls, y):
        return cls(LEFT, float(y))

    @classmethod
    def interval(cls, lower, upper):
        return cls(INTERVAL, lower=float(lower), upper=float(upper))


def column_rank(X: np.ndarray, rtol: float = 1e-10) -> int:
    """Numerical rank from the R factor of a column-pivoted QR."""
    from scipy.linalg import qr

    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.size == 0:
        return 0
    r = qr(X, mode="r", pivoting=True)[0]
    d = np.abs(np.diag(r))
    if d.size == 0 or d[0] == 0:
        return 0
    return int(np.sum(d > rtol * d[0]))


class Dataset:
    """Design matrix plus censored responses.

    The constructor checks shapes and full column rank and caches index
    arrays per censoring kind for the likelihood.
    """

    def __init__(self, design, responses: Sequence[CensoredObservation], names=None):
        X = np.array(design, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2:
            raise ValueError("design must be a 2-d matrix")
        n, p = X.shape
        responses = tuple(responses)
        if n < 1 or p < 1:
            raise ValueError("need n >= 1 and p >= 1")
        if len(responses) != n:
            raise ValueError(f"design has {n} rows but {len(responses)} responses were given")
        if not np.all(np.isfinite(X)):
            raise ValueError("design contains non-finite entries")
        if column_rank(X) < p:
            raise ValueError("design matrix is not of full column rank")
        self.X = X
        self.X.flags.writeable = False
        self.responses = responses
        self.names = list(names) if names is not None else [f"x{i}" for i in range(p)]
        if len(self.names) != p:
            raise ValueError("need one name per design column")

        kinds = np.array([r.kind for r in responses])
        self.kinds = kinds
        self.idx = {k: np.flatnonzero(kinds == k) for k in _KINDS}
        self.value = np.array([r.value for r in responses])
        self.lower = np.array([r.lower for r in responses])
        self.upper = np.array([r.upper for r in responses])
        # per-kind blocks so the likelihood never re-indexes the design
        self.blocks = {
            k: (idx, X[idx], self.value[idx], self.lower[idx], self.upper[idx])
            for k, idx in self.idx.items()
            if idx.size
        }

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def count(self, kind: str) -> int:
        return int(self.idx[kind].size)

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        return Dataset(self.X[rows], [self.responses[i] for i in rows], self.names)

    def intercept_column(self) -> int | None:
        ones = np.flatnonzero(np.all(self.X == 1.0, axis=0))
        return int(ones[0]) if ones.size else None

    @classmethod
    def from_survival(cls, times, events, covariates, names=None, log_time=True, intercept=True):
        """Exact / right-censored data from times and event indicators.

        ``events`` is truthy for an observed event.  Times are logged unless
        ``log_time`` is false.
        """
        t = np.asarray(times, dtype=float)
        if log_time:
            if np.any(t <= 0):
                raise ValueError("survival times must be positive")
            t = np.log(t)
        ev = np.asarray(events).astype(bool)
        Z = np.asarray(covariates, dtype=float)
        if Z.ndim == 1:
            Z = Z[:, None]
        names = list(names) if names is not None else [f"x{i + 1}" for i in range(Z.shape[1])]
        if intercept:
            Z = np.column_stack([np.ones(len(t)), Z])
            names = ["(Intercept)"] + names
        resp = [CensoredObservation.exact(v) if e else CensoredObservation.right(v) for v, e in zip(t, ev)]
        return cls(Z, resp, names)

    def ls_start(self) -> tuple[np.ndarray, float]:
        """Least-squares ``beta`` and residual sd treating every response as exact.

        Interval responses use their midpoint.
        """
        y = np.where(self.kinds == INTERVAL, 0.5 * (self.lower + self.upper), self.value)
        beta, *_ = np.linalg.lstsq(self.X, y, rcond=None)
        resid = y - self.X @ beta
        sd = float(np.sqrt(np.sum(resid**2) / max(self.n - self.p, 1)))
        return beta, sd if sd > 0 else 1.0


@dataclass(frozen=True)
class ModelSpec:
    """Error model and prior hyperparameters.

    ``df`` fixes the Student-t degrees of freedom; ``None`` with a
    ``student_t`` baseline makes ``delta`` a free parameter with the
    ``2 d delta / (delta + d)**3`` prior.
    """

    baseline: str = "normal"
    two_piece: bool = True
    parameterisation: Skew = Skew.EPSILON
    q: float = 1.0
    a0: float = 0.5
    b0: float = 0.5
    d: float = 10.0
    df: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "parameterisation", Skew(self.parameterisation))
        if self.baseline not in BASELINE_KINDS:
            raise ValueError(f"unknown baseline {self.baseline!r}")
        if self.q < 0:
            raise ValueError("q must be non-negative")
        if not (self.a0 > 0 and self.b0 > 0 and self.d > 0):
            raise ValueError("a0, b0 and d must be positive")
        if self.df is not None and (self.baseline != "student_t" or not self.df > 0):
            raise ValueError("df is only meaningful (and positive) for student_t")

    @property
    def free_delta(self) -> bool:
        return self.baseline == "student_t" and self.df is None

    @property
    def name(self) -> str:
        base = {"normal": "Normal", "laplace": "Laplace", "logistic": "Logistic", "student_t": "Student-t"}
        return ("TP " if self.two_piece else "") + base[self.baseline]

    def n_params(self, p: int) -> int:
        return p + 1 + int(self.two_piece) + int(self.free_delta)

    def param_names(self, covariates: Sequence[str]) -> list[str]:
        names = [f"beta[{c}]" for c in covariates] + ["sigma"]
        if self.two_piece:
            names.append("gamma")
        if self.free_delta:
            names.append("delta")
        return names

    def baseline_obj(self, delta=None) -> Baseline:
        if self.baseline != "student_t":
            return Baseline(self.baseline)
        return Baseline("student_t", float(delta if delta is not None else self.df))


@dataclass
class ParameterVector:
    beta: np.ndarray
    sigma: float
    gamma: float = 0.0
    delta: float | None = None

    def __post_init__(self):
        self.beta = np.atleast_1d(np.asarray(self.beta, dtype=float))

    def validate(self, spec: ModelSpec, p: int | None = None):
        if p is not None and self.beta.shape != (p,):
            raise ValueError(f"beta has shape {self.beta.shape}, expected ({p},)")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if not gamma_in_domain(self.gamma, spec.parameterisation):
            raise ValueError(f"gamma={self.gamma} outside its domain")
        if spec.free_delta and not (self.delta is not None and self.delta > 0):
            raise ValueError("free-shape student_t model needs delta > 0")
        return self

    def to_array(self, spec: ModelSpec) -> np.ndarray:
        parts = [self.beta, [self.sigma]]
        if spec.two_piece:
            parts.append([self.gamma])
        if spec.free_delta:
            parts.append([self.delta])
        return np.concatenate(parts).astype(float)

    @classmethod
    def from_array(cls, x, spec: ModelSpec, p: int) -> "ParameterVector":
        x = np.asarray(x, dtype=float)
        k = p + 1
        gamma = symmetry_point(spec.parameterisation)
        if spec.two_piece:
            gamma = float(x[k])
            k += 1
        delta = float(x[k]) if spec.free_delta else None
        return cls(x[:p].copy(), float(x[p]), gamma, delta)


# ---------------------------------------------------------------------------
# likelihood


def _shape(theta: ParameterVector, spec: ModelSpec):
    if spec.baseline != "student_t":
        return None
    return theta.delta if spec.free_delta else spec.df


def _ab_fast(gamma, parameterisation):
    if parameterisation is Skew.EPSILON:
        return 1.0 - gamma, 1.0 + gamma
    return gamma, 1.0 / gamma


def pointwise_loglik(theta: ParameterVector, data: Dataset, spec: ModelSpec) -> np.ndarray:
    """Per-observation log-likelihood contributions (density or probability)."""
    if theta.beta.shape != (data.p,):
        raise ValueError(f"beta has length {theta.beta.size}, design has {data.p} columns")
    gamma = theta.gamma if spec.two_piece else symmetry_point(spec.parameterisation)
    a, b = _ab_fast(gamma, spec.parameterisation)
    return _pointwise(data, theta.beta[None, :], np.array([theta.sigma]), np.array([a]),
                      np.array([b]), spec.baseline, _shape_array(theta, spec))[0]


def _shape_array(theta, spec):
    s = _shape(theta, spec)
    return None if s is None else np.array([s])


def _pointwise(data: Dataset, beta, sigma, a, b, kind, df):
    """Log contributions for ``M`` parameter draws at once -> ``(M, n)``.

    ``beta`` is ``(M, p)``; the other parameters are length-``M`` arrays.
    """
    M = beta.shape[0]
    out = np.empty((M, data.n))
    s, aa, bb = sigma[:, None], a[:, None], b[:, None]
    dd = None if df is None else np.asarray(df, dtype=float)[:, None]
    for k, (idx, Xk, v, lo, hi) in data.blocks.items():
        loc = beta @ Xk.T
        if k == EXACT:
            out[:, idx] = logpdf_ab(v - loc, 0.0, s, aa, bb, kind, dd)
        elif k == RIGHT:
            out[:, idx] = logsf_ab(v - loc, 0.0, s, aa, bb, kind, dd)
        elif k == LEFT:
            out[:, idx] = logcdf_ab(v - loc, 0.0, s, aa, bb, kind, dd)
        else:
            out[:, idx] = _log_interval(lo - loc, hi - loc, s, aa, bb, kind, dd)
    return out


def _log_interval(lo, hi, s, a, b, kind, df):
    # difference of CDFs below the median, of survival functions above it
    Gl = cdf_ab(lo, 0.0, s, a, b, kind, df)
    Gu = cdf_ab(hi, 0.0, s, a, b, kind, df)
    Sl = np.exp(logsf_ab(lo, 0.0, s, a, b, kind, df))
    Su = np.exp(logsf_ab(hi, 0.0, s, a, b, kind, df))
    diff = np.where(Gl > 0.5, Sl - Su, Gu - Gl)
    with np.errstate(divide="ignore"):
        return np.log(np.maximum(diff, 0.0))


def loglikelihood(theta: ParameterVector, data: Dataset, spec: ModelSpec) -> float:
    """Censoring-aware log-likelihood; ``-inf`` if a contribution underflows."""
    ll = pointwise_loglik(theta, data, spec)
    if np.any(np.isnan(ll)):
        return -math.inf
    return float(np.sum(ll))


# ---------------------------------------------------------------------------
# priors


def gamma_logprior(gamma, a0=0.5, b0=0.5, parameterisation: Skew = Skew.EPSILON):
    """Log of the prior on ``gamma`` induced by a Beta(a0, b0) on ``a / (a + b)``.

    Normalized over the parameterisation's domain; with the epsilon-skew
    parameterisation and ``a0 = b0 = 1/2`` it is ``1 / (pi sqrt(1 - gamma**2))``.
    """
    parameterisation = Skew(parameterisation)
    a, b = ab(gamma, parameterisation)
    g = np.asarray(gamma, dtype=float)
    if parameterisation is Skew.EPSILON:
        log_jac = math.log(2.0)
    else:
        log_jac = math.log(2.0) - np.log(g)
    out = (
        log_jac
        + (a0 - 1.0) * np.log(a)
        + (b0 - 1.0) * np.log(b)
        - (a0 + b0) * np.log(np.asarray(a) + b)
        - special.betaln(a0, b0)
    )
    return float(out) if np.ndim(out) == 0 else out


def delta_logprior(delta, d=10.0):
    """``log(2 d delta / (delta + d)**3)``; mode at ``d / 2``."""
    delta = np.asarray(delta, dtype=float)
    if not np.all(delta > 0) or not d > 0:
        raise ValueError("delta and d must be positive")
    out = np.log(2.0 * d * delta) - 3.0 * np.log(delta + d)
    return float(out) if out.ndim == 0 else out


def logprior(theta: ParameterVector, spec: ModelSpec) -> float:
    lp = -spec.q * math.log(theta.sigma)
    if spec.two_piece:
        lp += gamma_logprior(theta.gamma, spec.a0, spec.b0, spec.parameterisation)
    if spec.free_delta:
        lp += delta_logprior(theta.delta, spec.d)
    return lp


def logposterior(theta: ParameterVector, data: Dataset, spec: ModelSpec) -> float:
    """Unnormalized log posterior (improper-prior constants omitted)."""
    ll = loglikelihood(theta, data, spec)
    if ll == -math.inf:
        return -math.inf
    return ll + logprior(theta, spec)


# ---------------------------------------------------------------------------
# unconstrained parameterisation


def to_unconstrained(theta: ParameterVector, spec: ModelSpec) -> np.ndarray:
    parts = [theta.beta, [math.log(theta.sigma)]]
    if spec.two_piece:
        if spec.parameterisation is Skew.EPSILON:
            parts.append([math.atanh(theta.gamma)])
        else:
            parts.append([math.log(theta.gamma)])
    if spec.free_delta:
        parts.append([math.log(theta.delta)])
    return np.concatenate(parts).astype(float)


def from_unconstrained(u, spec: ModelSpec, p: int) -> tuple[ParameterVector, float]:
    """Inverse of :func:`to_unconstrained` plus the log absolute Jacobian."""
    u = np.asarray(u, dtype=float)
    beta = u[:p].copy()
    sigma = math.exp(u[p])
    logjac = u[p]
    k = p + 1
    gamma = symmetry_point(spec.parameterisation)
    if spec.two_piece:
        if spec.parameterisation is Skew.EPSILON:
            gamma = math.tanh(u[k])
            # log(1 - tanh^2 x) = 2 (log 2 - x - softplus(-2x))
            logjac += 2.0 * (math.log(2.0) - u[k] - np.logaddexp(0.0, -2.0 * u[k]))
        else:
            gamma = math.exp(u[k])
            logjac += u[k]
        k += 1
    delta = None
    if spec.free_delta:
        delta = math.exp(u[k])
        logjac += u[k]
    return ParameterVector(beta, sigma, gamma, delta), float(logjac)


def constrain_draws(U: np.ndarray, spec: ModelSpec, p: int) -> np.ndarray:
    """Vectorized back-transform of unconstrained rows to the natural scale."""
    X = np.array(U, dtype=float, copy=True)
    X[:, p] = np.exp(X[:, p])
    k = p + 1
    if spec.two_piece:
        X[:, k] = np.tanh(X[:, k]) if spec.parameterisation is Skew.EPSILON else np.exp(X[:, k])
        k += 1
    if spec.free_delta:
        X[:, k] = np.exp(X[:, k])
    return X


class Posterior:
    """Log posterior of a (data, spec) pair on the unconstrained scale.

    Calling the object evaluates ``log p(theta(u) | data) + log|J(u)|``; this
    is the density the samplers target.  It returns ``-inf`` outside the
    support or when the likelihood underflows.
    """

    def __init__(self, data: Dataset, spec: ModelSpec):
        self.data = data
        self.spec = spec
        self.p = data.p
        self.dim = spec.n_params(data.p)
        self.names = spec.param_names(data.names)
        self._betaln = float(special.betaln(spec.a0, spec.b0))

    def __call__(self, u) -> float:
        return self._evaluate(u, True)

    def loglik_unconstrained(self, u) -> float:
        """Log-likelihood at ``theta(u)`` (no prior, no Jacobian)."""
        return self._evaluate(u, False)

    def _evaluate(self, u, with_prior):
        # inlined from_unconstrained + logposterior; this is the sampler hot path
        spec, p = self.spec, self.p
        ls = float(u[p])
        if not -300.0 < ls < 300.0:
            return -math.inf
        sigma = math.exp(ls)
        lp = ls - spec.q * ls
        k = p + 1
        gamma = symmetry_point(spec.parameterisation)
        if spec.two_piece:
            x = float(u[k])
            if spec.parameterisation is Skew.EPSILON:
                if abs(x) > 18.0:
                    return -math.inf
                gamma = math.tanh(x)
                lp += 2.0 * (_LOG2 - x - np.logaddexp(0.0, -2.0 * x))
            else:
                if not -300.0 < x < 300.0:
                    return -math.inf
                gamma = math.exp(x)
                lp += x
            lp += self._log_gamma_prior(gamma)
            k += 1
        df = self.spec.df
        if spec.free_delta:
            x = float(u[k])
            if not -300.0 < x < 300.0:
                return -math.inf
            df = math.exp(x)
            lp += x + math.log(2.0 * spec.d * df) - 3.0 * math.log(df + spec.d)
        a, b = _ab_fast(gamma, spec.parameterisation)
        beta = np.asarray(u[:p], dtype=float)[None, :]
        with np.errstate(all="ignore"):
            ll = _pointwise(self.data, beta, np.array([sigma]), np.array([a]), np.array([b]),
                            spec.baseline, None if df is None else np.array([df])).sum()
        if not math.isfinite(ll):
            return -math.inf
        return float(ll + lp) if with_prior else float(ll)

    def _log_gamma_prior(self, gamma):
        spec = self.spec
        a, b = _ab_fast(gamma, spec.parameterisation)
        if spec.parameterisation is Skew.EPSILON:
            lj = _LOG2
        else:
            lj = _LOG2 - math.log(gamma)
        return (lj + (spec.a0 - 1.0) * math.log(a) + (spec.b0 - 1.0) * math.log(b)
                - (spec.a0 + spec.b0) * math.log(a + b) - self._betaln)

    def loglik_matrix(self, draws: np.ndarray) -> np.ndarray:
        """``(M, n)`` pointwise log-likelihoods for natural-scale draws."""
        beta, sigma, gamma, delta = unpack(draws, self.spec, self.p)
        a, b = _ab_fast(gamma, self.spec.parameterisation)
        df = delta if self.spec.free_delta else (
            None if self.spec.df is None else np.full(len(sigma), self.spec.df))
        with np.errstate(all="ignore"):
            return _pointwise(self.data, beta, sigma, np.asarray(a, float), np.asarray(b, float),
                              self.spec.baseline, df)


def unconstrain_draws(D: np.ndarray, spec: ModelSpec, p: int) -> np.ndarray:
    """Vectorized inverse of :func:`constrain_draws`."""
    U = np.array(D, dtype=float, copy=True)
    U[:, p] = np.log(U[:, p])
    k = p + 1
    if spec.two_piece:
        U[:, k] = np.arctanh(U[:, k]) if spec.parameterisation is Skew.EPSILON else np.log(U[:, k])
        k += 1
    if spec.free_delta:
        U[:, k] = np.log(U[:, k])
    return U


def log_jacobian(U: np.ndarray, spec: ModelSpec, p: int) -> np.ndarray:
    """Row-wise log absolute Jacobian of :func:`constrain_draws`."""
    U = np.atleast_2d(U)
    lj = U[:, p].copy()
    k = p + 1
    if spec.two_piece:
        x = U[:, k]
        if spec.parameterisation is Skew.EPSILON:
            lj += 2.0 * (_LOG2 - x - np.logaddexp(0.0, -2.0 * x))
        else:
            lj += x
        k += 1
    if spec.free_delta:
        lj += U[:, k]
    return lj


def unpack(draws: np.ndarray, spec: ModelSpec, p: int):
    """Split natural-scale draws into ``(beta, sigma, gamma, delta)`` arrays.

    ``gamma`` is the symmetry point for symmetric models; ``delta`` is the
    fixed ``df`` (or ``None``) unless it is free.
    """
    draws = np.atleast_2d(np.asarray(draws, dtype=float))
    M = draws.shape[0]
    beta = draws[:, :p]
    sigma = draws[:, p]
    k = p + 1
    if spec.two_piece:
        gamma = draws[:, k]
        k += 1
    else:
        gamma = np.full(M, symmetry_point(spec.parameterisation))
    if spec.free_delta:
        delta = draws[:, k]
    elif spec.baseline == "student_t":
        delta = np.full(M, float(spec.df))
    else:
        delta = None
    return beta, sigma, gamma, delta


def with_spec(spec: ModelSpec, **changes) -> ModelSpec:
    return replace(spec, **changes)
