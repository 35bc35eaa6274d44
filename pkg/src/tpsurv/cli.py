"""Command-line interface: ``tpsurv check|fit|compare|predict|simulate``.

Settings come from an optional flat ``key = value`` file (``--config``) and
are overridden by ``--set key=value`` or the dedicated flags.  Exit codes:
0 success (or a satisfied propriety check), 1 malformed input or a failed
run, 2 propriety violated, 3 propriety unknown.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .distributions import Skew
from .fitting import fit
from .model import RIGHT, CensoredObservation, Dataset, ModelSpec
from .prediction import CentringRule, PredictionError, quantile_csv, quantile_table, recentre, relabel
from .propriety import Verdict, propriety_report
from .sampler import ChainConfig, SamplerStartError, diagnostics, load_chain, save_chain, summarize
from .selection import FitError, comparison_csv, comparison_text, compare
from .simstudy import DEFAULT_STUDY_CHAIN, run_study, scenario

OUTPUT_ENV = "TPSURV_OUTPUT_DIR"
EVENT1_CENSOR0 = "event1_censor0"
EVENT2_CENSOR1 = "event2_censor1"
STATUS_CONVENTIONS = (EVENT1_CENSOR0, EVENT2_CENSOR1)

EXIT_OK, EXIT_ERROR, EXIT_VIOLATED, EXIT_UNKNOWN = 0, 1, 2, 3


class InputError(ValueError):
    pass


def _bool(s) -> bool:
    if isinstance(s, bool):
        return s
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise InputError(f"not a boolean: {s!r}")


def _opt_float(s):
    return None if s in (None, "", "none", "None") else float(s)


def _list(s):
    if isinstance(s, (list, tuple)):
        return list(s)
    return [x.strip() for x in str(s).split(",") if x.strip()]


@dataclass
class RunConfig:
    # data
    data: str = ""
    time_col: str = "time"
    status_col: str = "status"
    upper_col: str = ""
    covariates: list = field(default_factory=list)
    status_convention: str = EVENT1_CENSOR0
    log_time: bool = True
    intercept: bool = True
    # model
    baseline: str = "normal"
    two_piece: bool = True
    parameterisation: str = "epsilon"
    q: float = 1.0
    a0: float = 0.5
    b0: float = 0.5
    d: float = 10.0
    df: float | None = None
    # chain
    n_keep: int = 10_000
    burn_in: int = 50_000
    thin: int = 25
    seed: int = 0
    algorithm: str = "twalk"
    n_chains: int = 1
    # checks and outputs
    tol: float = 1e-8
    output_dir: str = ""

    _casts = {
        "covariates": _list, "log_time": _bool, "intercept": _bool, "two_piece": _bool,
        "q": float, "a0": float, "b0": float, "d": float, "df": _opt_float, "tol": float,
        "n_keep": int, "burn_in": int, "thin": int, "seed": int, "n_chains": int,
    }

    @classmethod
    def keys(cls):
        return [f.name for f in fields(cls)]

    def update(self, values: dict):
        for k, v in values.items():
            if k not in self.keys():
                raise InputError(f"unknown config key {k!r}")
            cast = self._casts.get(k, str)
            try:
                setattr(self, k, cast(v))
            except (TypeError, ValueError) as exc:
                raise InputError(f"bad value for {k}: {v!r} ({exc})") from None
        return self

    def dump(self) -> str:
        lines = []
        for k in self.keys():
            v = getattr(self, k)
            if isinstance(v, list):
                v = ",".join(v)
            elif v is None:
                v = "none"
            lines.append(f"{k} = {v}")
        return "\n".join(lines) + "\n"

    def model_spec(self) -> ModelSpec:
        try:
            return ModelSpec(self.baseline, self.two_piece, Skew(self.parameterisation),
                             self.q, self.a0, self.b0, self.d, self.df)
        except ValueError as exc:
            raise InputError(str(exc)) from None

    def chain_config(self) -> ChainConfig:
        try:
            return ChainConfig(self.n_keep, self.burn_in, self.thin, self.seed, self.algorithm)
        except ValueError as exc:
            raise InputError(str(exc)) from None

    def out_dir(self) -> Path:
        d = Path(self.output_dir or os.environ.get(OUTPUT_ENV, "tpsurv_out"))
        d.mkdir(parents=True, exist_ok=True)
        return d


def parse_config_file(path) -> dict:
    out = {}
    for i, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"{path}:{i}: expected 'key = value'")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


# ---------------------------------------------------------------------------
# data ingestion


@dataclass
class LoadedData:
    dataset: Dataset
    times: np.ndarray
    rows: list  # file row numbers (1-based, header excluded) kept in order


def load_data(cfg: RunConfig) -> LoadedData:
    """Read the CSV named by ``cfg.data`` into a :class:`Dataset`.

    Status 'event' rows are exact, 'censored' rows right-censored, and rows
    with a non-empty ``upper_col`` value are interval-censored on
    ``[time, upper]``.
    """
    if not cfg.data:
        raise InputError("no data file given")
    if cfg.status_convention not in STATUS_CONVENTIONS:
        raise InputError(f"status_convention must be one of {STATUS_CONVENTIONS}")
    try:
        with open(cfg.data, newline="") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
            records = list(reader)
    except OSError as exc:
        raise InputError(f"cannot read {cfg.data}: {exc}") from None
    needed = [cfg.time_col, cfg.status_col] + list(cfg.covariates) + ([cfg.upper_col] if cfg.upper_col else [])
    missing = [c for c in needed if c not in header]
    if missing:
        raise InputError(f"column(s) not found in {cfg.data}: {', '.join(missing)}")
    if not records:
        raise InputError("data file has no rows")
    event_code, censor_code = ("1", "0") if cfg.status_convention == EVENT1_CENSOR0 else ("2", "1")

    def num(rec, col, i):
        try:
            v = float(rec[col])
        except (TypeError, ValueError):
            raise InputError(f"row {i} column {col!r}: cannot parse {rec[col]!r} as a number") from None
        if not np.isfinite(v):
            raise InputError(f"row {i} column {col!r}: non-finite value")
        return v

    def resp(v, i, col):
        if cfg.log_time:
            if v <= 0:
                raise InputError(f"row {i} column {col!r}: times must be positive for log_time")
            return float(np.log(v))
        return v

    X, responses, times = [], [], []
    for i, rec in enumerate(records, 1):
        t = num(rec, cfg.time_col, i)
        status = str(rec[cfg.status_col]).strip()
        try:
            status = str(int(float(status)))
        except ValueError:
            pass
        upper = rec.get(cfg.upper_col, "") if cfg.upper_col else ""
        if upper not in ("", None) and str(upper).strip() not in ("", "NA"):
            u = num(rec, cfg.upper_col, i)
            if u <= t:
                raise InputError(f"row {i}: interval upper bound must exceed {cfg.time_col}")
            obs = CensoredObservation.interval(resp(t, i, cfg.time_col), resp(u, i, cfg.upper_col))
        elif status == event_code:
            obs = CensoredObservation.exact(resp(t, i, cfg.time_col))
        elif status == censor_code:
            obs = CensoredObservation.right(resp(t, i, cfg.time_col))
        else:
            raise InputError(f"row {i} column {cfg.status_col!r}: status {rec[cfg.status_col]!r} "
                             f"is not valid under {cfg.status_convention}")
        X.append([num(rec, c, i) for c in cfg.covariates])
        responses.append(obs)
        times.append(t)
    Z = np.array(X, dtype=float).reshape(len(records), len(cfg.covariates))
    names = list(cfg.covariates)
    if cfg.intercept:
        Z = np.column_stack([np.ones(len(records)), Z])
        names = ["(Intercept)"] + names
    try:
        ds = Dataset(Z, responses, names)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    return LoadedData(ds, np.array(times), list(range(1, len(records) + 1)))


# ---------------------------------------------------------------------------
# commands


def _write(path: Path, text: str):
    path.write_text(text)
    return path


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def cmd_check(cfg: RunConfig, out=sys.stdout) -> int:
    data = load_data(cfg).dataset
    rep = propriety_report(data, cfg.model_spec(), cfg.tol)
    _write(cfg.out_dir() / "propriety.json", rep.to_json() + "\n")
    print(rep.to_text(), file=out)
    return _verdict_code(rep.overall)


def _verdict_code(v: Verdict) -> int:
    if v in (Verdict.SATISFIED, Verdict.NUMERICALLY_CHECKED):
        return EXIT_OK
    return EXIT_VIOLATED if v is Verdict.VIOLATED else EXIT_UNKNOWN


def _guard(data, spec, cfg, force, out) -> int:
    rep = propriety_report(data, spec, cfg.tol)
    code = _verdict_code(rep.overall)
    if code != EXIT_OK and not force:
        print(rep.to_text(), file=out)
        print("propriety not certified; pass --force to sample anyway", file=out)
    return EXIT_OK if force else code


def _summary_rows(chain):
    return [{"parameter": k, **v} for k, v in summarize(chain).items()]


def _fit_and_save(cfg: RunConfig, data, spec, threads, prefix="chain"):
    chains = fit(data, spec, cfg.chain_config(), n_chains=cfg.n_chains, threads=threads)
    chains = chains if isinstance(chains, list) else [chains]
    d = cfg.out_dir()
    for i, c in enumerate(chains):
        save_chain(c, d / (f"{prefix}.csv" if len(chains) == 1 else f"{prefix}_{i}.csv"))
    return chains


def cmd_fit(cfg: RunConfig, force=False, threads=1, out=sys.stdout) -> int:
    data = load_data(cfg).dataset
    spec = cfg.model_spec()
    code = _guard(data, spec, cfg, force, out)
    if code != EXIT_OK:
        return code
    chains = _fit_and_save(cfg, data, spec, threads)
    pooled = chains[0]
    if len(chains) > 1:
        pooled = type(pooled)(np.vstack([c.draws for c in chains]), np.concatenate([c.logpost for c in chains]),
                              float(np.mean([c.acceptance_rate for c in chains])), cfg.seed, pooled.names,
                              pooled.config)
    rows = _summary_rows(pooled)
    d = cfg.out_dir()
    summary = {"model": spec.name, "n": data.n, "n_censored": data.n - data.count("exact"),
               "acceptance_rate": [c.acceptance_rate for c in chains], "parameters": rows}
    if len(chains) > 1:
        summary["diagnostics"] = diagnostics(chains)
    _write(d / "summary.json", _dump_json(summary))
    buf = ["parameter,median,lower95,upper95,map"]
    buf += [f"{r['parameter']},{r['median']!r},{r['lower95']!r},{r['upper95']!r},{r['map']!r}" for r in rows]
    _write(d / "summary.csv", "\n".join(buf) + "\n")
    print(f"{spec.name}: {pooled.n_keep} draws, acceptance {pooled.acceptance_rate:.3f}", file=out)
    for r in rows:
        print(f"  {r['parameter']:<22} {r['median']:10.4f}  ({r['lower95']:.4f}, {r['upper95']:.4f})", file=out)
    return EXIT_OK


MODEL_ALIASES = {
    "tp_normal": ("normal", True), "normal": ("normal", False),
    "tp_laplace": ("laplace", True), "laplace": ("laplace", False),
    "tp_logistic": ("logistic", True), "logistic": ("logistic", False),
    "tp_student_t": ("student_t", True), "student_t": ("student_t", False),
}


def _spec_for(cfg: RunConfig, alias: str) -> RunConfig:
    key = alias.strip().lower().replace(" ", "_").replace("-", "_")
    if key not in MODEL_ALIASES:
        raise InputError(f"unknown model {alias!r}; choose from {', '.join(MODEL_ALIASES)}")
    base, tp = MODEL_ALIASES[key]
    c = RunConfig(**asdict(cfg))
    c.baseline, c.two_piece = base, tp
    if base != "student_t":
        c.df = None
    return c


def cmd_compare(cfg: RunConfig, models, reference=None, n_is=20_000, force=False, threads=1,
                out=sys.stdout) -> int:
    data = load_data(cfg).dataset
    fits = {}
    for m in models:
        c = _spec_for(cfg, m)
        spec = c.model_spec()
        code = _guard(data, spec, c, force, out)
        if code != EXIT_OK:
            return code
        chain = fit(data, spec, c.chain_config())
        save_chain(chain, cfg.out_dir() / f"chain_{spec.name.lower().replace(' ', '_')}.csv")
        fits[spec.name] = (data, spec, chain)
    ref = None if reference is None else _spec_for(cfg, reference).model_spec().name
    rows = compare(fits, reference=ref, n_is=n_is, seed=cfg.seed)
    d = cfg.out_dir()
    _write(d / "comparison.csv", comparison_csv(rows))
    text = comparison_text(rows)
    _write(d / "comparison.txt", text)
    print(text, file=out, end="")
    return EXIT_OK


def cmd_predict(cfg: RunConfig, subjects=None, n_first=5, quantiles=(0.05, 0.25, 0.5, 0.75, 0.95),
                centring="median", chain_path=None, force=False, threads=1, out=sys.stdout,
                intercept_as="shifted") -> int:
    loaded = load_data(cfg)
    data = loaded.dataset
    spec = cfg.model_spec()
    if chain_path:
        chain = load_chain(chain_path)
    else:
        code = _guard(data, spec, cfg, force, out)
        if code != EXIT_OK:
            return code
        chain = _fit_and_save(cfg, data, spec, threads)[0]
    right = [i for i in range(data.n) if data.kinds[i] == RIGHT]
    if subjects:
        idx = []
        for s in subjects:
            i = int(s) - 1
            if not 0 <= i < data.n or data.kinds[i] != "right":
                raise InputError(f"row {s} is not a right-censored subject")
            idx.append(i)
    else:
        idx = right[:n_first]
    if not idx:
        raise InputError("no right-censored subjects to predict")
    if intercept_as == "sampled":
        chain = relabel(chain, CentringRule(centring))
    else:
        chain = recentre(chain, CentringRule(centring), spec)
    subj = [(f"row{loaded.rows[i]}", float(loaded.times[i]), data.X[i]) for i in idx]
    table = quantile_table(subj, list(quantiles), chain, spec, threads=threads)
    text = quantile_csv(table, list(quantiles))
    _write(cfg.out_dir() / "residual_life.csv", text)
    print(text, file=out, end="")
    return EXIT_OK


def cmd_simulate(cfg: RunConfig, which=1, n=100, gamma=0.0, delta=None, reps=200, threads=1,
                 out=sys.stdout) -> int:
    sc = scenario(which, n, gamma, delta)
    chain_cfg = cfg.chain_config()
    table = run_study(sc, reps, chain_cfg, master_seed=cfg.seed, threads=threads)
    d = cfg.out_dir()
    _write(d / "study.csv", table.to_csv())
    _write(d / "study_replications.csv", table.replications_csv())
    print(table.to_csv(), file=out, end="")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument handling

_FLAG_KEYS = ("data", "time_col", "status_col", "upper_col", "covariates", "status_convention",
              "baseline", "parameterisation", "n_keep", "burn_in", "thin", "seed", "algorithm",
              "n_chains", "output_dir", "df", "tol")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value file")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any config key")
    for k in _FLAG_KEYS:
        common.add_argument("--" + k.replace("_", "-"), dest=k, default=None)
    common.add_argument("--symmetric", action="store_true", help="fix gamma at its symmetry point")
    common.add_argument("--no-log", action="store_true", help="model the response on its own scale")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--force", action="store_true", help="sample even without a propriety certificate")
    common.add_argument("--dump-config", metavar="PATH", help="write the resolved config and continue")

    p = argparse.ArgumentParser(prog="tpsurv", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("check", parents=[common], help="certify posterior propriety")
    sub.add_parser("fit", parents=[common], help="sample the posterior")
    c = sub.add_parser("compare", parents=[common], help="BIC, LPML and Bayes factors")
    c.add_argument("--models", default="tp_logistic,tp_normal,logistic,normal")
    c.add_argument("--reference", default=None)
    c.add_argument("--n-is", type=int, default=20_000)
    r = sub.add_parser("predict", parents=[common], help="residual-life quantiles")
    r.add_argument("--subjects", default="", help="comma-separated 1-based data rows")
    r.add_argument("--first", type=int, default=5, help="first N right-censored rows when --subjects is empty")
    r.add_argument("--quantiles", default="0.05,0.25,0.5,0.75,0.95")
    r.add_argument("--centring", default="median", choices=[c.value for c in CentringRule])
    r.add_argument("--chain", default=None, help="reuse a saved chain CSV")
    r.add_argument("--intercept-as", default="shifted", choices=["shifted", "sampled"],
                   help="shift the intercept by the error median, or keep the sampled intercept")
    s = sub.add_parser("simulate", parents=[common], help="simulation-study calibration")
    s.add_argument("--scenario", type=int, default=1, choices=[1, 2, 3, 4])
    s.add_argument("--n", type=int, default=100)
    s.add_argument("--gamma", type=float, default=0.0)
    s.add_argument("--delta", type=float, default=None)
    s.add_argument("--reps", type=int, default=200)
    return p


def resolve_config(args) -> RunConfig:
    cfg = RunConfig()
    if args.command == "simulate":
        cfg.update({k: getattr(DEFAULT_STUDY_CHAIN, k) for k in ("n_keep", "burn_in", "thin")})
    if args.config:
        cfg.update(parse_config_file(args.config))
    flags = {k: getattr(args, k) for k in _FLAG_KEYS if getattr(args, k) is not None}
    if args.symmetric:
        flags["two_piece"] = False
    if args.no_log:
        flags["log_time"] = False
    for item in args.set:
        if "=" not in item:
            raise InputError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        flags[k.strip()] = v.strip()
    return cfg.update(flags)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        if args.dump_config:
            Path(args.dump_config).write_text(cfg.dump())
        if args.command == "check":
            return cmd_check(cfg)
        if args.command == "fit":
            return cmd_fit(cfg, args.force, args.threads)
        if args.command == "compare":
            return cmd_compare(cfg, _list(args.models), args.reference, args.n_is, args.force, args.threads)
        if args.command == "predict":
            qs = [float(x) for x in _list(args.quantiles)]
            return cmd_predict(cfg, _list(args.subjects), args.first, qs, args.centring, args.chain,
                               args.force, args.threads, intercept_as=args.intercept_as)
        return cmd_simulate(cfg, args.scenario, args.n, args.gamma, args.delta, args.reps, args.threads)
    except (InputError, PredictionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (SamplerStartError, FitError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
