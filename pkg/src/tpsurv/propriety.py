"""Posterior propriety certificates.

The checks mechanize the sufficient conditions for models with two-piece
scale-mixture-of-normal errors under ``pi(gamma) pi(delta) / sigma**q``:

* uncensored data: ``y`` outside the column space of ``X``, a sample-size
  condition, and finiteness of ``∫ H(gamma)^(n+q-1) / (a+b)^n pi(gamma)``
  with ``H = max(a, b)``;
* censored data: the same checks on the uncensored sub-sample;
* no uncensored data: disjointness of the interval-censored box and the
  column space of the interval design (an LP feasibility problem), plus the
  sample-size and integral conditions on the interval-censored rows.

The conditions are sufficient, not necessary (except for fully uncensored
data), so a failed sufficient path yields ``unknown`` rather than
``violated``.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import integrate, special

from .distributions import Skew
from .model import EXACT, INTERVAL, Dataset, ModelSpec, column_rank
from .simplex import DEGENERATE, INFEASIBLE, ITERATION_LIMIT, box_feasibility

NLL_BASELINES = ("normal", "logistic", "laplace")

CAVEAT_NUMERIC = (
    "numerically_checked: the integral stabilised on a widening domain; this is "
    "evidence of finiteness, not a proof"
)


class Verdict(str, enum.Enum):
    SATISFIED = "satisfied"
    VIOLATED = "violated"
    NUMERICALLY_CHECKED = "numerically_checked"
    UNKNOWN = "unknown"


@dataclass
class Check:
    verdict: Verdict
    detail: str = ""


@dataclass
class Condition:
    name: str
    verdict: Verdict
    detail: str
    required: bool = True


@dataclass
class ProprietyReport:
    conditions: list[Condition] = field(default_factory=list)
    overall: Verdict = Verdict.UNKNOWN
    path: str = ""
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "overall": self.overall.value,
            "path": self.path,
            "conditions": [
                {**asdict(c), "verdict": c.verdict.value} for c in self.conditions
            ],
            "notes": list(self.notes),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_text(self) -> str:
        lines = [f"posterior propriety: {self.overall.value.upper()}", f"path: {self.path}"]
        for c in self.conditions:
            tag = "" if c.required else " (necessary condition, informational)"
            lines.append(f"  [{c.verdict.value:>19}] {c.name}{tag}: {c.detail}")
        lines.extend(f"  note: {n}" for n in self.notes)
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# individual checks


def check_column_space(y_o, X_o, tol: float = 1e-8) -> Check:
    """``y_o`` outside the column space of ``X_o`` (relative residual > tol)."""
    y = np.asarray(y_o, dtype=float)
    X = np.atleast_2d(np.asarray(X_o, dtype=float))
    if X.shape[0] != y.size:
        X = X.reshape(y.size, -1)
    if column_rank(X) < X.shape[1]:
        return Check(Verdict.UNKNOWN, f"design of rank {column_rank(X)} < {X.shape[1]} columns")
    ynorm = float(np.linalg.norm(y))
    if ynorm == 0.0:
        return Check(Verdict.VIOLATED, "y is the zero vector, which lies in every column space")
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    rel = float(np.linalg.norm(y - X @ beta)) / ynorm
    if rel > tol:
        return Check(Verdict.SATISFIED, f"relative least-squares residual {rel:.3g} > {tol:g}")
    return Check(Verdict.VIOLATED, f"relative least-squares residual {rel:.3g} <= {tol:g}: y lies in C(X)")


def check_sample_size(n_o: int, p: int, q: float, baseline: str) -> Check:
    """``n > p`` for ``q = 1``; ``n > p + 1 - q`` for ``q >= 1`` and normal,
    logistic or Laplace baselines; unknown otherwise."""
    if q == 1:
        ok = n_o > p
        return Check(Verdict.SATISFIED if ok else Verdict.VIOLATED, f"n={n_o} {'>' if ok else '<='} p={p}")
    if q > 1 and baseline in NLL_BASELINES:
        bound = p + 1 - q
        ok = n_o > bound
        return Check(Verdict.SATISFIED if ok else Verdict.VIOLATED,
                     f"n={n_o} {'>' if ok else '<='} p+1-q={bound:g}")
    return Check(Verdict.UNKNOWN, f"no sample-size result for q={q:g} with a {baseline} baseline")


def _log_terms(t, parameterisation):
    """``log a, log b, log(a+b), log|dgamma/dt|`` on the unconstrained scale."""
    if parameterisation is Skew.EPSILON:
        lse = np.logaddexp(t, -t)
        la = math.log(2.0) - t - lse
        lb = math.log(2.0) + t - lse
        return la, lb, math.log(2.0), la + lb
    return t, -t, np.logaddexp(t, -t), t


def _log_integrand(t, which, parameterisation, q, n, a0, b0):
    la, lb, lab, ljac = _log_terms(t, parameterisation)
    lH = max(la, lb) if which == "max" else min(la, lb)
    if parameterisation is Skew.EPSILON:
        lprior_jac = math.log(2.0)
    else:
        lprior_jac = math.log(2.0) - t  # |a'b - ab'| = 2 / gamma
    lprior = lprior_jac + (a0 - 1) * la + (b0 - 1) * lb - (a0 + b0) * lab - special.betaln(a0, b0)
    return (n + q - 1) * lH - n * lab + lprior + ljac


def gamma_integral(which, parameterisation, q, n, a0, b0, rtol=1e-8, max_doublings=10):
    """Integral of ``K(gamma)^(n+q-1) / (a+b)^n pi(gamma)`` over widening domains.

    ``which`` is ``"max"`` (condition iii) or ``"min"`` (condition ii).  The
    integral runs over ``t`` with ``gamma = tanh t`` or ``gamma = exp t``,
    on ``[-T, T]`` for ``T = 1, 2, 4, ...``.  Returns ``(value, stabilised,
    history)``.
    """
    parameterisation = Skew(parameterisation)
    f_log = lambda t: _log_integrand(t, which, parameterisation, q, n, a0, b0)  # noqa: E731
    shift = max(f_log(t) for t in np.linspace(-4, 4, 81))
    f = lambda t: math.exp(min(f_log(t) - shift, 700.0))  # noqa: E731

    total, prev_T = 0.0, 0.0
    history = []
    for k in range(max_doublings + 1):
        T = 2.0**k
        if prev_T == 0.0:
            piece = integrate.quad(f, -T, T, limit=200)[0]
        else:
            piece = (integrate.quad(f, prev_T, T, limit=200)[0]
                     + integrate.quad(f, -T, -prev_T, limit=200)[0])
        old = total
        total += piece
        prev_T = T
        history.append(total)
        if not math.isfinite(total):
            return math.inf, False, history
        if k >= 2 and total > 0 and abs(total - old) <= rtol * total:
            return total * math.exp(shift), True, history
    return total * math.exp(shift), False, history


def _check_gamma_condition(which, parameterisation, q, n, gamma_prior) -> Check:
    parameterisation = Skew(parameterisation)
    a0, b0 = gamma_prior
    label = "H=max(a,b)" if which == "max" else "h=min(a,b)"
    if q == 1:
        return Check(Verdict.SATISFIED, "q = 1: holds for any parameterisation")
    if parameterisation is Skew.EPSILON and q > 1:
        return Check(Verdict.SATISFIED, "a(gamma), b(gamma) bounded and q > 1")
    value, ok, hist = gamma_integral(which, parameterisation, q, n, a0, b0)
    if ok:
        return Check(Verdict.NUMERICALLY_CHECKED,
                     f"integral with {label} stabilised at {value:.6g} ({len(hist)} widenings); "
                     + CAVEAT_NUMERIC)
    return Check(Verdict.UNKNOWN, f"integral with {label} did not stabilise (last value {value:.6g})")


def check_condition_iii(parameterisation, q: float, n: int, gamma_prior=(0.5, 0.5)) -> Check:
    """Sufficient integral condition with ``H(gamma) = max(a, b)``."""
    return _check_gamma_condition("max", parameterisation, q, n, gamma_prior)


def check_condition_ii(parameterisation, q: float, n: int, gamma_prior=(0.5, 0.5)) -> Check:
    """Necessary integral condition with ``h(gamma) = min(a, b)``."""
    return _check_gamma_condition("min", parameterisation, q, n, gamma_prior)


def check_interval_lp(X_I, intervals, log_transform: bool = True) -> Check:
    """Disjointness of the interval box and the column space of ``X_I``.

    ``intervals`` are ``(l, u)`` pairs on the original time scale (logged
    here) unless ``log_transform`` is false.  The LP ``X eta = xi``,
    ``l <= xi <= u`` is infeasible exactly when the sets are disjoint.
    """
    X = np.atleast_2d(np.asarray(X_I, dtype=float))
    iv = np.asarray(intervals, dtype=float).reshape(-1, 2)
    if iv.shape[0] != X.shape[0]:
        raise ValueError("need one interval per row of X_I")
    lo, hi = iv[:, 0], iv[:, 1]
    if not np.all(lo < hi) or not np.all(np.isfinite(hi)):
        raise ValueError("intervals need finite upper bounds and l < u")
    if log_transform:
        if not np.all(lo > 0):
            raise ValueError("interval lower bounds must be positive on the time scale")
        lo, hi = np.log(lo), np.log(hi)
    res = box_feasibility(X, lo, hi)
    if res.status == INFEASIBLE:
        return Check(Verdict.SATISFIED,
                     f"LP infeasible (phase-one objective {res.phase_one_objective:.3g}): "
                     "box and column space are disjoint")
    if res.status in (DEGENERATE, ITERATION_LIMIT):
        return Check(Verdict.UNKNOWN, f"simplex status {res.status} "
                     f"(phase-one objective {res.phase_one_objective:.3g})")
    return Check(Verdict.VIOLATED, f"LP feasible at eta={np.round(res.x, 6).tolist()}")


# ---------------------------------------------------------------------------
# report


def _overall(conds: list[Condition]) -> Verdict:
    req = [c.verdict for c in conds if c.required]
    if req and all(v in (Verdict.SATISFIED, Verdict.NUMERICALLY_CHECKED) for v in req):
        return Verdict.SATISFIED
    return Verdict.UNKNOWN


def propriety_report(data: Dataset, spec: ModelSpec, tol: float = 1e-8) -> ProprietyReport:
    """Route the data to the applicable sufficient-condition path and aggregate verdicts."""
    q, prior = spec.q, (spec.a0, spec.b0)
    n_o = data.count(EXACT)
    n_I = data.count(INTERVAL)
    fully_observed = n_o == data.n
    rep = ProprietyReport()

    def add(name, check, required=True):
        rep.conditions.append(Condition(name, check.verdict, check.detail, required))

    if n_o > 0:
        rep.path = "uncensored sub-sample" if not fully_observed else "fully observed data"
        rows = data.idx[EXACT]
        add("y_o not in C(X_o)", check_column_space(data.value[rows], data.X[rows], tol))
        add("sample size", check_sample_size(n_o, data.p, q, spec.baseline))
        if spec.two_piece:
            add("condition (iii)", check_condition_iii(spec.parameterisation, q, n_o, prior))
            add("condition (ii)", check_condition_ii(spec.parameterisation, q, n_o, prior), required=False)
    elif n_I > 0:
        rep.path = "interval-censored sub-sample"
        rows = data.idx[INTERVAL]
        add("interval box disjoint from C(X_I)",
            check_interval_lp(data.X[rows], np.column_stack([data.lower[rows], data.upper[rows]]),
                              log_transform=False))
        add("sample size", check_sample_size(n_I, data.p, q, spec.baseline))
        if spec.two_piece:
            add("condition (iii)", check_condition_iii(spec.parameterisation, q, n_I, prior))
    else:
        rep.path = "none"
        rep.notes.append("no uncensored or interval-censored observations: no sufficient condition applies")
        rep.overall = Verdict.UNKNOWN
        return rep

    rep.overall = _overall(rep.conditions)
    if fully_observed and rep.overall is not Verdict.SATISFIED:
        # with no censoring these conditions are also necessary
        if any(c.verdict is Verdict.VIOLATED for c in rep.conditions):
            rep.overall = Verdict.VIOLATED
    if any(c.verdict is Verdict.NUMERICALLY_CHECKED for c in rep.conditions if c.required):
        rep.notes.append(CAVEAT_NUMERIC)
    return rep
