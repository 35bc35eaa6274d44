"""Two-piece scale mixtures of normals.

A two-piece density glues the left half of a symmetric baseline ``f`` scaled
by ``sigma * b(gamma)`` to the right half scaled by ``sigma * a(gamma)``::

    g(z) = 2 / (sigma (a + b)) * f((z - mu) / (sigma b))   z <  mu
         = 2 / (sigma (a + b)) * f((z - mu) / (sigma a))   z >= mu

``mu`` is the mode and ``P[Z <= mu] = b / (a + b)``.  Four baselines are
supported (normal, Laplace, logistic, Student-t) with closed-form density,
distribution and quantile functions.

The array kernels (``logpdf_ab``, ``logcdf_ab``, ...) take the scale factors
``a`` and ``b`` directly and broadcast over every argument; the likelihood
code calls them in its hot path.  The ``tp_*`` functions wrap them around a
validated :class:`TwoPieceParams`.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

__all__ = [
    "Baseline",
    "Skew",
    "TwoPieceParams",
    "NORMAL",
    "LAPLACE",
    "LOGISTIC",
    "student_t",
    "ab",
    "symmetry_point",
    "gamma_in_domain",
    "tp_logpdf",
    "tp_pdf",
    "tp_cdf",
    "tp_sf",
    "tp_logcdf",
    "tp_logsf",
    "tp_quantile",
    "tp_sample",
    "tp_median",
]

_LOG2 = math.log(2.0)
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)

BASELINE_KINDS = ("normal", "laplace", "logistic", "student_t")


class Skew(str, enum.Enum):
    """Parameterisation of the two scale factors ``(a, b)``.

    ``EPSILON``: ``a = 1 - gamma``, ``b = 1 + gamma`` on ``(-1, 1)``.
    ``INVERSE_SCALE``: ``a = gamma``, ``b = 1 / gamma`` on ``(0, inf)``.
    """

    EPSILON = "epsilon"
    INVERSE_SCALE = "inverse_scale"


@dataclass(frozen=True)
class Baseline:
    """Symmetric, unimodal baseline density with mode 0.

    ``df`` is the Student-t degrees of freedom; it must be ``None`` for the
    other kinds.
    """

    kind: str
    df: float | None = None

    def __post_init__(self):
        if self.kind not in BASELINE_KINDS:
            raise ValueError(f"unknown baseline {self.kind!r}; expected one of {BASELINE_KINDS}")
        if self.kind == "student_t":
            if self.df is None or not self.df > 0:
                raise ValueError("student_t baseline needs df > 0")
        elif self.df is not None:
            raise ValueError(f"{self.kind} baseline takes no shape parameter")

    @property
    def label(self) -> str:
        if self.kind == "student_t":
            return f"student_t({self.df:g})"
        return self.kind


NORMAL = Baseline("normal")
LAPLACE = Baseline("laplace")
LOGISTIC = Baseline("logistic")


def student_t(df: float) -> Baseline:
    return Baseline("student_t", float(df))


# ---------------------------------------------------------------------------
# standardized baselines; ``df`` is ignored except for student_t and may be an
# array broadcasting against ``w``


def base_logpdf(w, kind, df=None):
    w = np.asarray(w, dtype=float)
    if kind == "normal":
        return -0.5 * w * w - _HALF_LOG_2PI
    if kind == "laplace":
        return -np.abs(w) - _LOG2
    if kind == "logistic":
        aw = np.abs(w)
        return -aw - 2.0 * np.log1p(np.exp(-aw))
    if kind == "student_t":
        df = np.asarray(df, dtype=float)
        return (
            special.gammaln(0.5 * (df + 1.0))
            - special.gammaln(0.5 * df)
            - 0.5 * np.log(df * math.pi)
            - 0.5 * (df + 1.0) * np.log1p(w * w / df)
        )
    raise ValueError(kind)


def base_cdf(w, kind, df=None):
    w = np.asarray(w, dtype=float)
    if kind == "normal":
        return special.ndtr(w)
    if kind == "laplace":
        e = 0.5 * np.exp(-np.abs(w))
        return np.where(w < 0, e, 1.0 - e)
    if kind == "logistic":
        return special.expit(w)
    if kind == "student_t":
        return special.stdtr(df, w)
    raise ValueError(kind)


def base_logcdf(w, kind, df=None):
    w = np.asarray(w, dtype=float)
    if kind == "normal":
        return special.log_ndtr(w)
    if kind == "laplace":
        e = 0.5 * np.exp(-np.abs(w))
        return np.where(w < 0, np.minimum(w, 0.0) - _LOG2, np.log1p(-e))
    if kind == "logistic":
        return -np.logaddexp(0.0, -w)
    if kind == "student_t":
        # stdtr is accurate in the lower tail; use the symmetric form for w > 0
        with np.errstate(divide="ignore"):
            lower = np.log(special.stdtr(df, -np.abs(w)))
        return np.where(w < 0, lower, np.log1p(-np.exp(lower)))
    raise ValueError(kind)


def base_ppf(p, kind, df=None):
    p = np.asarray(p, dtype=float)
    if kind == "normal":
        return special.ndtri(p)
    if kind == "laplace":
        return np.where(p < 0.5, np.log(2.0 * p), -np.log(2.0 * (1.0 - p)))
    if kind == "logistic":
        return special.logit(p)
    if kind == "student_t":
        return special.stdtrit(df, p)
    raise ValueError(kind)


# ---------------------------------------------------------------------------
# skew parameterisations


def ab(gamma, parameterisation: Skew = Skew.EPSILON):
    """Return the scale factors ``(a(gamma), b(gamma))``.

    Raises ``ValueError`` if any ``gamma`` lies outside the domain.
    """
    parameterisation = Skew(parameterisation)
    g = np.asarray(gamma, dtype=float)
    if not np.all(gamma_in_domain(g, parameterisation)):
        raise ValueError(f"gamma={gamma!r} outside the {parameterisation.value} domain")
    if parameterisation is Skew.EPSILON:
        a, b = 1.0 - g, 1.0 + g
    else:
        a, b = g, 1.0 / g
    if a.ndim == 0:
        return float(a), float(b)
    return a, b


def gamma_in_domain(gamma, parameterisation: Skew = Skew.EPSILON):
    g = np.asarray(gamma, dtype=float)
    if Skew(parameterisation) is Skew.EPSILON:
        return (g > -1.0) & (g < 1.0)
    return (g > 0.0) & np.isfinite(g)


def symmetry_point(parameterisation: Skew = Skew.EPSILON) -> float:
    return 0.0 if Skew(parameterisation) is Skew.EPSILON else 1.0


# ---------------------------------------------------------------------------
# broadcasting kernels in terms of (a, b)


def logpdf_ab(z, mu, sigma, a, b, kind, df=None):
    d = np.asarray(z, dtype=float) - mu
    scale = np.where(d < 0, b, a)
    return base_logpdf(d / (sigma * scale), kind, df) - np.log(sigma) + (_LOG2 - np.log(a + b))


def cdf_ab(z, mu, sigma, a, b, kind, df=None):
    d = np.asarray(z, dtype=float) - mu
    left = d < 0
    w = d / (sigma * np.where(left, b, a))
    F = base_cdf(w, kind, df)
    # right branch written as b + a(2F - 1) so that G(mu) == b/(a+b) exactly
    g = np.where(left, 2.0 * b * F, b + a * (2.0 * F - 1.0)) / (a + b)
    return np.clip(g, 0.0, 1.0)


def logcdf_ab(z, mu, sigma, a, b, kind, df=None):
    d = np.asarray(z, dtype=float) - mu
    left = d < 0
    w = d / (sigma * np.where(left, b, a))
    lo = np.log(2.0 * b / (a + b)) + base_logcdf(w, kind, df)
    # right branch: log(1 - 2a/(a+b) S(w)), S(w) = F(-w)
    with np.errstate(divide="ignore", invalid="ignore"):
        hi = np.log1p(-np.exp(np.log(2.0 * a / (a + b)) + base_logcdf(-w, kind, df)))
    return np.where(left, lo, hi)


def logsf_ab(z, mu, sigma, a, b, kind, df=None):
    d = np.asarray(z, dtype=float) - mu
    left = d < 0
    w = d / (sigma * np.where(left, b, a))
    hi = np.log(2.0 * a / (a + b)) + base_logcdf(-w, kind, df)
    with np.errstate(divide="ignore", invalid="ignore"):
        lo = np.log1p(-np.exp(np.log(2.0 * b / (a + b)) + base_logcdf(w, kind, df)))
    return np.where(left, lo, hi)


def ppf_ab(p, mu, sigma, a, b, kind, df=None):
    p = np.asarray(p, dtype=float)
    pg = b / (a + b)
    lower = p < pg
    with np.errstate(divide="ignore", invalid="ignore"):
        ql = mu + sigma * b * base_ppf(np.clip(p * (a + b) / (2.0 * b), 0.0, 1.0), kind, df)
        qr = mu + sigma * a * base_ppf(np.clip((p * (a + b) - b + a) / (2.0 * a), 0.0, 1.0), kind, df)
    return np.where(lower, ql, qr)


# ---------------------------------------------------------------------------
# parameter bundle and public API


@dataclass(frozen=True)
class TwoPieceParams:
    """Location ``mu`` (the mode), scale ``sigma``, skewness ``gamma``.

    Fields may be arrays that broadcast against each other; validation is
    elementwise.
    """

    mu: float = 0.0
    sigma: float = 1.0
    gamma: float = 0.0
    baseline: Baseline = NORMAL
    parameterisation: Skew = Skew.EPSILON

    def __post_init__(self):
        object.__setattr__(self, "parameterisation", Skew(self.parameterisation))
        if not np.all(np.asarray(self.sigma) > 0):
            raise ValueError("sigma must be positive")
        if not np.all(np.isfinite(self.mu)):
            raise ValueError("mu must be finite")
        if not np.all(gamma_in_domain(self.gamma, self.parameterisation)):
            raise ValueError(
                f"gamma={self.gamma!r} outside the {self.parameterisation.value} domain"
            )

    @property
    def scales(self):
        return ab(self.gamma, self.parameterisation)

    @property
    def mode_mass(self):
        """``P[Z <= mu] = b / (a + b)``."""
        a, b = self.scales
        return b / (a + b)

    def _args(self):
        a, b = self.scales
        return self.mu, self.sigma, a, b, self.baseline.kind, self.baseline.df


def _as_output(x):
    x = np.asarray(x)
    return float(x) if x.ndim == 0 else x


def _finite(z):
    z = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z)):
        raise ValueError("z must be finite")
    return z


def tp_logpdf(z, params: TwoPieceParams):
    """Log density of the two-piece distribution at ``z`` (finite)."""
    return _as_output(logpdf_ab(_finite(z), *params._args()))


def tp_pdf(z, params: TwoPieceParams):
    return _as_output(np.exp(logpdf_ab(_finite(z), *params._args())))


def tp_cdf(z, params: TwoPieceParams):
    """Distribution function; ``+-inf`` map to 1 and 0."""
    z = np.asarray(z, dtype=float)
    if np.any(np.isnan(z)):
        raise ValueError("z must not be NaN")
    return _as_output(cdf_ab(z, *params._args()))


def tp_sf(z, params: TwoPieceParams):
    return _as_output(np.exp(logsf_ab(np.asarray(z, dtype=float), *params._args())))


def tp_logcdf(z, params: TwoPieceParams):
    return _as_output(logcdf_ab(np.asarray(z, dtype=float), *params._args()))


def tp_logsf(z, params: TwoPieceParams):
    """``log(1 - G(z))`` computed through the complementary branch."""
    return _as_output(logsf_ab(np.asarray(z, dtype=float), *params._args()))


def tp_quantile(p, params: TwoPieceParams):
    """Closed-form inverse of :func:`tp_cdf` for ``0 < p < 1``."""
    p = np.asarray(p, dtype=float)
    if not np.all((p > 0) & (p < 1)):
        raise ValueError("p must lie in (0, 1)")
    return _as_output(ppf_ab(p, *params._args()))


def tp_median(params: TwoPieceParams):
    return tp_quantile(0.5, params)


def tp_sample(n: int, params: TwoPieceParams, rng_seed=None) -> np.ndarray:
    """Draw ``n`` variates by inverting the distribution function.

    ``rng_seed`` is an integer seed or a ``numpy.random.Generator``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(rng_seed)
    u = rng.random(n)
    # random() can return exactly 0.0
    u = np.where(u == 0.0, np.nextafter(0.0, 1.0), u)
    return np.asarray(ppf_ab(u, *params._args()), dtype=float)
