"""Repeated-sampling calibration of the posterior under known truths."""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .distributions import Baseline, Skew, TwoPieceParams, tp_sample
from .fitting import fit
from .model import Dataset, ModelSpec, ParameterVector
from .sampler import ChainConfig, summarize
from .selection import mle_fit, savage_dickey_bf

STANDARD_NORMAL = "standard_normal"
RIGHT_HALF_NORMAL = "right_half_normal"


@dataclass(frozen=True)
class Scenario:
    """Data-generating truth for one simulation cell.

    ``delta_true`` set means two-piece Student-t errors (fitted with a free
    ``delta``); otherwise two-piece normal.  ``censor_above`` applies on the
    original response scale, before the log when ``log_scale_response``.
    """

    name: str = "scenario1"
    n: int = 100
    gamma_true: float = 0.0
    beta_true: tuple = (1.0, 2.0, 3.0)
    sigma_true: float = 1.0
    delta_true: float | None = None
    covariate_law: str = STANDARD_NORMAL
    covariate_scale: float = 1.0
    censor_above: float | None = None
    log_scale_response: bool = False

    def __post_init__(self):
        object.__setattr__(self, "beta_true", tuple(float(b) for b in self.beta_true))
        if self.n < len(self.beta_true) + 2:
            raise ValueError("n too small for the number of coefficients")
        if not -1 < self.gamma_true < 1:
            raise ValueError("gamma_true must lie in (-1, 1)")
        if not self.sigma_true > 0:
            raise ValueError("sigma_true must be positive")
        if self.covariate_law not in (STANDARD_NORMAL, RIGHT_HALF_NORMAL):
            raise ValueError(f"unknown covariate law {self.covariate_law!r}")

    @property
    def error_params(self) -> TwoPieceParams:
        base = Baseline("normal") if self.delta_true is None else Baseline("student_t", self.delta_true)
        return TwoPieceParams(0.0, self.sigma_true, self.gamma_true, base, Skew.EPSILON)

    @property
    def fit_spec(self) -> ModelSpec:
        return ModelSpec("normal" if self.delta_true is None else "student_t", two_piece=True)

    def truth(self) -> dict[str, float]:
        names = ["(Intercept)"] + [f"x{i}" for i in range(1, len(self.beta_true))]
        out = {f"beta[{c}]": b for c, b in zip(names, self.beta_true)}
        out["sigma"] = self.sigma_true
        out["gamma"] = self.gamma_true
        if self.delta_true is not None:
            out["delta"] = self.delta_true
        return out


def scenario(k: int, n: int = 100, gamma: float = 0.0, delta: float | None = None) -> Scenario:
    """Preset cells: 1 two-piece normal, 2 and 3 two-piece t with 2 and 5 df
    (``delta`` overrides), 4 log-scale response with half-normal covariates
    censored above 17.5."""
    if k == 1:
        return Scenario("scenario1", n, gamma)
    if k in (2, 3):
        return Scenario(f"scenario{k}", n, gamma, delta_true=delta or (2.0 if k == 2 else 5.0))
    if k == 4:
        return Scenario("scenario4", n, gamma, sigma_true=0.25, covariate_law=RIGHT_HALF_NORMAL,
                        covariate_scale=1.0 / 3.0, censor_above=17.5, log_scale_response=True)
    raise ValueError("scenario must be 1, 2, 3 or 4")


def generate(sc: Scenario, seed) -> Dataset:
    """Simulate one data set; deterministic in ``seed``."""
    rng = np.random.default_rng(seed)
    k = len(sc.beta_true) - 1
    Z = rng.standard_normal((sc.n, k))
    if sc.covariate_law == RIGHT_HALF_NORMAL:
        Z = np.abs(Z)
    Z *= sc.covariate_scale
    eps = tp_sample(sc.n, sc.error_params, rng)
    y = sc.beta_true[0] + Z @ np.asarray(sc.beta_true[1:]) + eps
    names = [f"x{i}" for i in range(1, k + 1)]
    if sc.log_scale_response:
        t = np.exp(y)
        events = np.ones(sc.n, bool) if sc.censor_above is None else t <= sc.censor_above
        return Dataset.from_survival(np.where(events, t, sc.censor_above), events, Z, names, log_time=True)
    events = np.ones(sc.n, bool) if sc.censor_above is None else y <= sc.censor_above
    return Dataset.from_survival(np.where(events, y, sc.censor_above), events, Z, names, log_time=False)


def censored_fraction(data: Dataset) -> float:
    return 1.0 - data.count("exact") / data.n


# ---------------------------------------------------------------------------
# replications


def replication_seeds(master_seed: int, rep: int) -> tuple[int, int]:
    """Independent (data, chain) seeds for replication ``rep``."""
    ss = np.random.SeedSequence(master_seed, spawn_key=(rep,))
    a, b = ss.generate_state(2)
    return int(a), int(b)


@dataclass
class Replication:
    rep: int
    ok: bool
    error: str = ""
    censored_fraction: float = float("nan")
    bf01: float = float("nan")
    estimates: dict = field(default_factory=dict)  # name -> median/map/lower95/upper95/mle


def run_replication(sc: Scenario, rep: int, config: ChainConfig, master_seed: int = 0) -> Replication:
    data_seed, chain_seed = replication_seeds(master_seed, rep)
    try:
        data = generate(sc, data_seed)
        spec = sc.fit_spec
        cfg = ChainConfig(**{**asdict(config), "seed": chain_seed})
        chain = fit(data, spec, cfg)
        summ = summarize(chain)
        start = ParameterVector.from_array([summ[n]["median"] for n in chain.names], spec, data.p)
        theta, _ = mle_fit(data, spec, start)
        mle = dict(zip(chain.names, theta.to_array(spec)))
        for name in chain.names:
            summ[name]["mle"] = float(mle[name])
        bf = savage_dickey_bf(chain, spec)
        return Replication(rep, True, "", censored_fraction(data), float(bf), summ)
    except Exception as exc:  # recorded and excluded from the summaries
        return Replication(rep, False, f"{type(exc).__name__}: {exc}")


def _rep_job(args):
    return run_replication(*args)


@dataclass
class StudyRow:
    scenario: str
    parameter: str
    truth: float
    coverage: float
    median_of_medians: float
    median_map: float
    median_mle: float
    median_bf01: float
    n_used: int
    n_failed: int


@dataclass
class StudyTable:
    scenario: Scenario
    rows: list[StudyRow]
    replications: list[Replication]
    median_censored_fraction: float

    def row(self, parameter: str) -> StudyRow:
        return next(r for r in self.rows if r.parameter == parameter)

    def to_csv(self) -> str:
        buf = io.StringIO()
        cols = list(StudyRow.__dataclass_fields__)
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for r in self.rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in (getattr(r, c) for c in cols)])
        return buf.getvalue()

    def replications_csv(self) -> str:
        names = list(self.scenario.truth())
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        stats_ = ("median", "map", "lower95", "upper95", "mle")
        w.writerow(["rep", "ok", "error", "censored_fraction", "bf01"]
                   + [f"{n}_{s}" for n in names for s in stats_])
        for r in self.replications:
            vals = [repr(r.estimates[n][s]) if r.ok else "" for n in names for s in stats_]
            w.writerow([r.rep, int(r.ok), r.error, repr(r.censored_fraction), repr(r.bf01)] + vals)
        return buf.getvalue()


def summarize_study(sc: Scenario, reps: list[Replication]) -> StudyTable:
    good = [r for r in reps if r.ok]
    failed = len(reps) - len(good)
    bf = float(np.median([r.bf01 for r in good])) if good else math.nan
    rows = []
    for name, true in sc.truth().items():
        if good:
            e = [r.estimates[name] for r in good]
            cov = float(np.mean([x["lower95"] <= true <= x["upper95"] for x in e]))
            vals = [float(np.median([x[k] for x in e])) for k in ("median", "map", "mle")]
        else:
            cov, vals = math.nan, [math.nan] * 3
        rows.append(StudyRow(sc.name, name, float(true), cov, *vals, bf, len(good), failed))
    cf = float(np.median([r.censored_fraction for r in good])) if good else math.nan
    return StudyTable(sc, rows, reps, cf)


DEFAULT_STUDY_CHAIN = ChainConfig(n_keep=2000, burn_in=5000, thin=25)


def run_study(sc: Scenario, n_reps: int = 200, fit_config: ChainConfig = DEFAULT_STUDY_CHAIN,
              master_seed: int = 0, threads: int = 1) -> StudyTable:
    """Fit ``n_reps`` simulated data sets and tabulate coverage and point estimates.

    Results depend only on ``(sc, master_seed, n_reps, fit_config)``; with
    ``threads > 1`` replications run in worker processes and are reduced in
    replication order.
    """
    if n_reps < 1:
        raise ValueError("n_reps must be at least 1")
    jobs = [(sc, r, fit_config, master_seed) for r in range(n_reps)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            reps = list(ex.map(_rep_job, jobs, chunksize=max(1, n_reps // (4 * threads))))
    else:
        reps = [_rep_job(j) for j in jobs]
    return summarize_study(sc, reps)
