"""Model comparison: BIC, LPML, Savage-Dickey and importance-sampling Bayes factors."""
from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, stats
from scipy.special import logsumexp

from .distributions import symmetry_point
from .fitting import initial_point, natural_logpost
from .model import (
    Dataset,
    ModelSpec,
    ParameterVector,
    Posterior,
    constrain_draws,
    from_unconstrained,
    gamma_logprior,
    log_jacobian,
    to_unconstrained,
    unconstrain_draws,
)
from .sampler import Chain, summarize


class FitError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# maximum likelihood and BIC


def mle_fit(data: Dataset, spec: ModelSpec, start: ParameterVector | None = None,
            xatol: float = 1e-8, max_restarts: int = 10):
    """Maximize the log-likelihood by Nelder-Mead on the unconstrained scale.

    Each run stops once the simplex diameter drops below ``xatol``; the
    search is restarted from its own optimum until a restart no longer
    improves the objective.  Returns ``(theta_hat, max_loglik)``.
    """
    post = Posterior(data, spec)
    theta0 = start if start is not None else initial_point(data, spec)
    u = to_unconstrained(theta0, spec)
    f0 = post.loglik_unconstrained(u)
    if not math.isfinite(f0):
        raise FitError("log-likelihood is not finite at the starting point")

    def objective(v):
        val = post.loglik_unconstrained(v)
        return -val if math.isfinite(val) else 1e300

    best = -f0
    opts = {"xatol": xatol, "fatol": np.inf, "maxiter": 4000 * u.size, "maxfev": 8000 * u.size}
    for _ in range(max_restarts + 1):
        res = optimize.minimize(objective, u, method="Nelder-Mead", options=opts)
        improved = best - res.fun
        if res.fun <= best:
            u, best = res.x, res.fun
        if improved < 1e-9:
            break
    theta, _ = from_unconstrained(u, spec, data.p)
    return theta, float(-best)


def bic_value(max_loglik: float, k: int, n: int) -> float:
    return k * math.log(n) - 2.0 * max_loglik


def bic(data: Dataset, spec: ModelSpec, start: ParameterVector | None = None) -> float:
    """``k log n - 2 max loglik`` with ``n`` counting censored rows too."""
    _, ll = mle_fit(data, spec, start)
    return bic_value(ll, spec.n_params(data.p), data.n)


# ---------------------------------------------------------------------------
# LPML


def log_cpo(loglik: np.ndarray) -> np.ndarray:
    """Log conditional predictive ordinates from an ``(M, n)`` log-likelihood matrix.

    ``CPO_i`` is the harmonic mean of ``L_i(theta_m)`` over draws.
    """
    M = loglik.shape[0]
    with np.errstate(over="ignore", invalid="ignore"):
        out = math.log(M) - logsumexp(-loglik, axis=0)
    return np.where(np.isnan(out), -np.inf, out)


def lpml(chain: Chain, data: Dataset, spec: ModelSpec) -> float:
    """Sum of log CPOs; ``-inf`` (with a warning) if a contribution is zero."""
    if chain.n_keep == 0:
        raise ValueError("empty chain")
    ll = Posterior(data, spec).loglik_matrix(chain.draws)
    lc = log_cpo(ll)
    bad = np.flatnonzero(~np.isfinite(lc))
    for i in bad:
        warnings.warn(f"observation {i}: zero likelihood under some draw; CPO is 0", RuntimeWarning)
    return float(lc.sum()) if bad.size == 0 else -math.inf


# ---------------------------------------------------------------------------
# Savage-Dickey


def silverman_bandwidth(x: np.ndarray) -> float:
    x = np.asarray(x, dtype=float)
    sd = x.std(ddof=1)
    iqr = np.subtract(*np.quantile(x, [0.75, 0.25]))
    spread = min(sd, iqr / 1.34) if iqr > 0 else sd
    return 0.9 * spread * x.size ** (-0.2)


def reflected_kde(x: np.ndarray, at, lower=None, upper=None, bandwidth=None) -> np.ndarray:
    """Gaussian KDE evaluated at ``at`` with reflection at finite domain edges."""
    x = np.asarray(x, dtype=float)
    at = np.atleast_1d(np.asarray(at, dtype=float))
    h = silverman_bandwidth(x) if bandwidth is None else float(bandwidth)
    if not h > 0:
        raise ValueError("degenerate sample: zero bandwidth")
    centres = [x]
    if lower is not None and math.isfinite(lower):
        centres.append(2.0 * lower - x)
    if upper is not None and math.isfinite(upper):
        centres.append(2.0 * upper - x)
    c = np.concatenate(centres)
    dens = stats.norm.pdf((at[:, None] - c[None, :]) / h).sum(axis=1) / (x.size * h)
    return dens


def savage_dickey_bf(chain: Chain, spec: ModelSpec, bandwidth=None, reflect: bool = True) -> float:
    """``BF_01`` for the symmetric null: posterior over prior density of ``gamma``
    at its symmetry point."""
    if not spec.two_piece:
        raise ValueError("Savage-Dickey ratio needs a two-piece model with free gamma")
    g = chain.column("gamma")
    if np.ptp(g) == 0:
        raise FitError("gamma chain has zero variance")
    g0 = symmetry_point(spec.parameterisation)
    if reflect:
        lo, hi = (-1.0, 1.0) if spec.parameterisation.value == "epsilon" else (0.0, None)
    else:
        lo = hi = None
    post_dens = float(reflected_kde(g, g0, lo, hi, bandwidth)[0])
    prior_dens = math.exp(gamma_logprior(g0, spec.a0, spec.b0, spec.parameterisation))
    return post_dens / prior_dens


# ---------------------------------------------------------------------------
# importance-sampling marginal likelihood


@dataclass
class MarginalEstimate:
    log_marginal: float
    mc_se: float  # standard error of the log estimate (delta method)
    ess: float
    n_is: int
    reliable: bool


def log_marginal_is(chain: Chain, data: Dataset, spec: ModelSpec, n_is: int = 20_000,
                    seed: int = 0, df: float = 5.0, cov_scale: float = 2.0) -> MarginalEstimate:
    """Importance-sampling estimate of the log marginal likelihood.

    The proposal is a multivariate t with ``df`` degrees of freedom centred
    at the posterior mean of the unconstrained draws with ``cov_scale`` times
    their covariance.  The value is defined up to the constant shared by all
    models with the same improper ``(beta, sigma)`` prior.
    """
    U = chain.unconstrained if chain.unconstrained is not None else unconstrain_draws(chain.draws, spec, data.p)
    if U.shape[0] < 2 * U.shape[1] + 2:
        raise ValueError("chain too short to fit the proposal")
    mean = U.mean(axis=0)
    cov = np.atleast_2d(np.cov(U, rowvar=False)) * cov_scale
    if np.linalg.eigvalsh(cov).min() <= 1e-12 * max(np.trace(cov), 1e-300):
        raise FitError("posterior draws are degenerate; run a longer chain before importance sampling")
    prop = stats.multivariate_t(loc=mean, shape=cov, df=df)
    rng = np.random.default_rng(seed)
    Z = np.atleast_2d(prop.rvs(size=n_is, random_state=rng))
    if Z.shape[0] != n_is:
        Z = Z.T
    post = Posterior(data, spec)
    logq = prop.logpdf(Z)
    logt = np.empty(n_is)
    for i in range(0, n_is, 2000):
        blk = Z[i:i + 2000]
        with np.errstate(all="ignore"):
            D = constrain_draws(blk, spec, data.p)
            logt[i:i + 2000] = natural_logpost(post, D) + log_jacobian(blk, spec, data.p)
    logw = logt - logq
    logw = np.where(np.isnan(logw), -np.inf, logw)
    lz = float(logsumexp(logw) - math.log(n_is))
    w = np.exp(logw - logw.max())
    ess_w = float(w.sum() ** 2 / np.sum(w**2))
    se = float(np.std(w, ddof=1) / (np.mean(w) * math.sqrt(n_is)))
    return MarginalEstimate(lz, se, ess_w, n_is, ess_w >= 0.01 * n_is)


# ---------------------------------------------------------------------------
# comparison tables


@dataclass
class ComparisonRow:
    model_name: str
    bic: float
    lpml: float
    log_marginal: float
    bf_vs_reference: float
    summary: dict = field(default_factory=dict)
    log_marginal_se: float = float("nan")
    savage_dickey_bf01: float | None = None


def compare(fits, reference: str | None = None, n_is: int = 20_000, seed: int = 0) -> list[ComparisonRow]:
    """Comparison rows for ``{name: (data, spec, chain)}``.

    Bayes factors are ``exp(log m(model) - log m(reference))``; the reference
    defaults to the model with the smallest BIC.
    """
    rows = []
    for name, (data, spec, chain) in fits.items():
        med = ParameterVector.from_array(np.median(chain.draws, axis=0), spec, data.p)
        _, ll = mle_fit(data, spec, start=med)
        lm = log_marginal_is(chain, data, spec, n_is=n_is, seed=seed)
        sd = savage_dickey_bf(chain, spec) if spec.two_piece else None
        rows.append(ComparisonRow(
            model_name=name,
            bic=bic_value(ll, spec.n_params(data.p), data.n),
            lpml=lpml(chain, data, spec),
            log_marginal=lm.log_marginal,
            bf_vs_reference=float("nan"),
            summary=summarize(chain),
            log_marginal_se=lm.mc_se,
            savage_dickey_bf01=sd,
        ))
    if reference is None:
        reference = min(rows, key=lambda r: r.bic).model_name
    ref = next(r for r in rows if r.model_name == reference)
    for r in rows:
        r.bf_vs_reference = math.exp(r.log_marginal - ref.log_marginal)
    return rows


def _param_names(rows):
    names = []
    for r in rows:
        for k in r.summary:
            if k not in names:
                names.append(k)
    return names


def comparison_csv(rows: list[ComparisonRow]) -> str:
    names = _param_names(rows)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    header = ["model"]
    for n in names:
        header += [f"{n}_median", f"{n}_lower95", f"{n}_upper95"]
    header += ["bic", "bayes_factor", "log_marginal", "log_marginal_se", "lpml", "savage_dickey_bf01"]
    w.writerow(header)
    for r in rows:
        line = [r.model_name]
        for n in names:
            s = r.summary.get(n)
            line += [repr(s["median"]), repr(s["lower95"]), repr(s["upper95"])] if s else ["", "", ""]
        line += [repr(r.bic), repr(r.bf_vs_reference), repr(r.log_marginal), repr(r.log_marginal_se),
                 repr(r.lpml), "" if r.savage_dickey_bf01 is None else repr(r.savage_dickey_bf01)]
        w.writerow(line)
    return buf.getvalue()


def comparison_text(rows: list[ComparisonRow]) -> str:
    names = _param_names(rows)
    width = 26
    out = ["Model".ljust(18) + "".join(r.model_name.rjust(width) for r in rows)]
    for n in names:
        cells = []
        for r in rows:
            s = r.summary.get(n)
            cells.append(f"{s['median']:.3f} ({s['lower95']:.3f},{s['upper95']:.3f})" if s else "--")
        out.append(n.ljust(18) + "".join(c.rjust(width) for c in cells))
    out.append("BIC".ljust(18) + "".join(f"{r.bic:.2f}".rjust(width) for r in rows))
    out.append("Bayes factor".ljust(18) + "".join(f"{r.bf_vs_reference:.3g}".rjust(width) for r in rows))
    out.append("LPML".ljust(18) + "".join(f"{r.lpml:.3f}".rjust(width) for r in rows))
    return "\n".join(out) + "\n"
