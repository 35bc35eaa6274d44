"""MCMC over an unconstrained parameter vector.

Two kernels are provided:

``twalk``
    The two-point t-walk of Christen and Fox: a pair of points ``(x, x')`` is
    updated one at a time with a mixture of traverse, walk, blow and hop moves.
    Only log-density evaluations are needed and no tuning is exposed beyond
    the published defaults.

``rwm``
    Gaussian random-walk Metropolis whose proposal covariance is the running
    empirical covariance scaled by a factor adapted towards an acceptance rate
    of 0.234.  Adaptation runs only during burn-in, so the kept draws come
    from a fixed kernel.

Both runs are deterministic given ``ChainConfig.seed``: every iteration draws
its random numbers in the same order regardless of ``thin``, so thinning by
``k`` selects every ``k``-th draw of an unthinned run.
"""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

TWALK = "twalk"
RWM = "rwm"
ALGORITHMS = (TWALK, RWM)

# t-walk defaults: move probabilities (traverse, walk, blow, hop) and shape constants
TW_MOVE_CDF = (0.4918, 0.9836, 0.9918, 1.0)
TW_AW = 1.5
TW_AT = 6.0
TW_N1PHI = 4.0
_LOG_2PI = math.log(2.0 * math.pi)


class SamplerStartError(RuntimeError):
    pass


@dataclass
class ChainConfig:
    n_keep: int = 10_000
    burn_in: int = 50_000
    thin: int = 25
    seed: int = 0
    algorithm: str = TWALK
    rwm_init_scale: float = 0.1
    target_accept: float = 0.234

    def __post_init__(self):
        if self.n_keep < 1 or self.thin < 1 or self.burn_in < 0:
            raise ValueError("need n_keep >= 1, thin >= 1, burn_in >= 0")
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}")

    @property
    def n_iter(self) -> int:
        return self.burn_in + self.n_keep * self.thin


@dataclass
class Chain:
    """Kept draws on the natural scale with their log posterior values."""

    draws: np.ndarray
    logpost: np.ndarray
    acceptance_rate: float
    seed: int
    names: list[str]
    config: dict = field(default_factory=dict)
    centring: str = "mode"
    unconstrained: np.ndarray | None = None

    @property
    def n_keep(self) -> int:
        return self.draws.shape[0]

    @property
    def dim(self) -> int:
        return self.draws.shape[1]

    def column(self, name: str) -> np.ndarray:
        return self.draws[:, self.names.index(name)]

    def thinned(self, k: int) -> "Chain":
        sl = slice(k - 1, None, k)
        return Chain(self.draws[sl], self.logpost[sl], self.acceptance_rate, self.seed, list(self.names),
                     dict(self.config), self.centring,
                     None if self.unconstrained is None else self.unconstrained[sl])


def twalk_companion(x) -> np.ndarray:
    """Second t-walk starting point: each coordinate moved by 10% of its size
    (by 0.1 where the coordinate is zero)."""
    x = np.asarray(x, dtype=float)
    return x + np.where(x != 0.0, 0.1 * np.abs(x), 0.1)


# ---------------------------------------------------------------------------
# t-walk


def _simh1(rng, at=TW_AT):
    if rng.random() < (at - 1.0) / (2.0 * at):
        return rng.random() ** (1.0 / (at + 1.0))
    return rng.random() ** (1.0 / (1.0 - at))


def _twalk_propose(c, o, rng, n, pphi):
    """Propose a new value for ``c`` with ``o`` held fixed.

    Returns ``(y, log_q_ratio, moved)`` where ``log_q_ratio`` is the
    correction added to ``L(y) - L(c)`` in the acceptance ratio.
    """
    ker = rng.random()
    phi = rng.random(n) < pphi
    nphi = int(phi.sum())
    if nphi == 0:
        return c, 0.0, False
    y = c.copy()
    if ker < TW_MOVE_CDF[0]:  # traverse
        beta = _simh1(rng)
        y[phi] = o[phi] + beta * (o[phi] - c[phi])
        return y, (nphi - 2) * math.log(beta), True
    if ker < TW_MOVE_CDF[1]:  # walk
        u = rng.random(nphi)
        z = (TW_AW / (1.0 + TW_AW)) * (TW_AW * u * u + 2.0 * u - 1.0)
        y[phi] = c[phi] + (c[phi] - o[phi]) * z
        return y, 0.0, True
    if ker < TW_MOVE_CDF[2]:  # blow: centred at the other point
        s_fwd = np.max(np.abs(o[phi] - c[phi]))
        if s_fwd == 0.0:
            return c, 0.0, False
        y[phi] = o[phi] + s_fwd * rng.standard_normal(nphi)
        s_rev = np.max(np.abs(o[phi] - y[phi]))
        w_fwd = nphi * math.log(s_fwd) + 0.5 * np.sum((y[phi] - o[phi]) ** 2) / s_fwd**2
        w_rev = nphi * math.log(s_rev) + 0.5 * np.sum((c[phi] - o[phi]) ** 2) / s_rev**2
        return y, w_fwd - w_rev, True
    # hop: centred at the current point, a third of the spread
    s_fwd = np.max(np.abs(o[phi] - c[phi])) / 3.0
    if s_fwd == 0.0:
        return c, 0.0, False
    y[phi] = c[phi] + s_fwd * rng.standard_normal(nphi)
    s_rev = np.max(np.abs(o[phi] - y[phi])) / 3.0
    w_fwd = nphi * math.log(s_fwd) + 0.5 * np.sum((y[phi] - c[phi]) ** 2) / s_fwd**2
    w_rev = nphi * math.log(s_rev) + 0.5 * np.sum((c[phi] - y[phi]) ** 2) / s_rev**2
    return y, w_fwd - w_rev, True


def _run_twalk(target, x0, xp0, config: ChainConfig, rng):
    n = x0.size
    pphi = min(n, TW_N1PHI) / n
    pts = [np.array(x0, dtype=float), np.array(xp0, dtype=float)]
    L = [target(pts[0]), target(pts[1])]
    if np.any(pts[0] == pts[1]):
        raise SamplerStartError("t-walk starting points must differ in every coordinate")
    keep_u = np.empty((config.n_keep, n))
    keep_l = np.empty(config.n_keep)
    accepted = 0
    k = 0
    for it in range(1, config.n_iter + 1):
        i = 0 if rng.random() < 0.5 else 1
        c, o = pts[i], pts[1 - i]
        y, corr, moved = _twalk_propose(c, o, rng, n, pphi)
        la = math.log(rng.random())
        if moved:
            Ly = target(y)
            if Ly > -math.inf and la < Ly - L[i] + corr:
                pts[i], L[i] = y, Ly
                accepted += 1
        if it > config.burn_in and (it - config.burn_in) % config.thin == 0:
            keep_u[k] = pts[0]
            keep_l[k] = L[0]
            k += 1
    return keep_u, keep_l, accepted / config.n_iter


# ---------------------------------------------------------------------------
# adaptive random-walk Metropolis


def _run_rwm(target, x0, config: ChainConfig, rng):
    d = x0.size
    x = np.array(x0, dtype=float)
    Lx = target(x)
    mean = x.copy()
    m2 = np.zeros((d, d))
    base = np.eye(d) * config.rwm_init_scale**2
    log_lam = 0.0
    chol = np.linalg.cholesky(base)
    keep_u = np.empty((config.n_keep, d))
    keep_l = np.empty(config.n_keep)
    accepted = 0
    k = 0
    for it in range(1, config.n_iter + 1):
        y = x + math.exp(0.5 * log_lam) * (chol @ rng.standard_normal(d))
        la = math.log(rng.random())
        Ly = target(y)
        alpha = 0.0
        if Ly > -math.inf:
            alpha = math.exp(min(0.0, Ly - Lx))
            if la < Ly - Lx:
                x, Lx = y, Ly
                accepted += 1
        if it <= config.burn_in:
            log_lam += (alpha - config.target_accept) / it**0.6
            delta = x - mean
            mean += delta / (it + 1)
            m2 += np.outer(delta, x - mean)
            if it % 50 == 0 and it >= 10 * d:
                cov = m2 / it * (2.38**2 / d) + 1e-10 * np.eye(d)
                try:
                    chol = np.linalg.cholesky(cov)
                except np.linalg.LinAlgError:
                    pass
        if it > config.burn_in and (it - config.burn_in) % config.thin == 0:
            keep_u[k] = x
            keep_l[k] = Lx
            k += 1
    return keep_u, keep_l, accepted / config.n_iter


# ---------------------------------------------------------------------------
# public API


def run_chain(
    target: Callable[[np.ndarray], float],
    config: ChainConfig,
    init,
    transform: Callable[[np.ndarray], np.ndarray] | None = None,
    names: Sequence[str] | None = None,
) -> Chain:
    """Run one chain on the unconstrained scale.

    ``init`` is a starting vector, or for the t-walk optionally a pair of
    vectors (the second defaults to :func:`twalk_companion` of the first).
    ``transform`` maps kept unconstrained rows to the natural scale.
    """
    rng = np.random.default_rng(config.seed)
    if config.algorithm == TWALK:
        if isinstance(init, (tuple, list)) and len(init) == 2 and np.ndim(init[0]) == 1:
            x0, xp0 = (np.asarray(v, dtype=float) for v in init)
        else:
            x0 = np.asarray(init, dtype=float)
            xp0 = twalk_companion(x0)
        l0, l1 = target(x0), target(xp0)
        if not (math.isfinite(l0) or math.isfinite(l1)):
            raise SamplerStartError("target is -inf at every initial point")
        if not math.isfinite(l0):
            x0 = twalk_companion(xp0)
        elif not math.isfinite(l1):
            xp0 = x0 + 0.01 * np.where(x0 != 0.0, np.abs(x0), 1.0)
        if not (math.isfinite(target(x0)) and math.isfinite(target(xp0))):
            raise SamplerStartError("could not find two t-walk starting points inside the support")
        U, L, acc = _run_twalk(target, x0, xp0, config, rng)
    else:
        x0 = np.asarray(init[0] if isinstance(init, (tuple, list)) and np.ndim(init[0]) == 1 else init,
                        dtype=float)
        if not math.isfinite(target(x0)):
            raise SamplerStartError("target is -inf at the initial point")
        U, L, acc = _run_rwm(target, x0, config, rng)
    draws = transform(U) if transform is not None else U.copy()
    names = list(names) if names is not None else [f"theta[{i}]" for i in range(U.shape[1])]
    return Chain(draws, L, float(acc), config.seed, names, asdict(config), unconstrained=U)


def _run_chain_job(args):
    return run_chain(*args)


def run_chains(target, configs: Sequence[ChainConfig], init, transform=None, names=None,
               threads: int = 1) -> list[Chain]:
    """Run several chains, in worker processes when ``threads > 1``.

    Results are ordered by seed.
    """
    jobs = [(target, c, init, transform, names) for c in sorted(configs, key=lambda c: c.seed)]
    if threads <= 1 or len(jobs) == 1:
        return [_run_chain_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(_run_chain_job, jobs))


def summarize(chain: Chain) -> dict[str, dict[str, float]]:
    """Posterior median, MAP draw and equal-tailed 95% interval per parameter."""
    if chain.n_keep == 0:
        raise ValueError("empty chain")
    D = chain.draws
    med = np.median(D, axis=0)
    lo, hi = np.quantile(D, [0.025, 0.975], axis=0)
    imap = int(np.argmax(chain.logpost))
    return {
        name: {"median": float(med[j]), "map": float(D[imap, j]),
               "lower95": float(lo[j]), "upper95": float(hi[j])}
        for j, name in enumerate(chain.names)
    }


def _autocov(x):
    n = x.size
    x = x - x.mean()
    m = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, m)
    ac = np.fft.irfft(f * np.conj(f), m)[:n]
    return ac / n


def ess(draws: np.ndarray) -> float:
    """Effective sample size of ``(m, n)`` chains of one scalar.

    Autocorrelations are combined across chains and summed over Geyer's
    initial monotone sequence; ESS is capped at ``N log10 N``.
    """
    draws = np.atleast_2d(np.asarray(draws, dtype=float))
    m, n = draws.shape
    if n < 4:
        return float("nan")
    acov = np.array([_autocov(c) for c in draws])
    chain_var = acov[:, 0] * n / (n - 1.0)
    W = chain_var.mean()
    var_plus = W * (n - 1.0) / n
    if m > 1:
        var_plus += draws.mean(axis=1).var(ddof=1)
    if var_plus <= 0:
        return float("nan")
    rho = 1.0 - (W - acov.mean(axis=0)) / var_plus
    rho[0] = 1.0
    pairs = []
    for t in range(0, n - 1, 2):
        s = rho[t] + rho[t + 1]
        if s < 0:
            break
        pairs.append(s)
    pairs = np.minimum.accumulate(np.array(pairs)) if pairs else np.array([0.0])
    tau = -1.0 + 2.0 * pairs.sum()
    N = m * n
    tau = max(tau, 1.0 / math.log10(N))
    return float(N / tau)


def split_rhat(draws: np.ndarray) -> float:
    """Potential scale reduction over the two halves of each chain."""
    draws = np.atleast_2d(np.asarray(draws, dtype=float))
    m, n = draws.shape
    h = n // 2
    halves = np.vstack([draws[:, :h], draws[:, n - h:]])
    means = halves.mean(axis=1)
    W = halves.var(axis=1, ddof=1).mean()
    B = h * means.var(ddof=1)
    if W == 0:
        return 1.0 if B == 0 else math.inf
    var_plus = (h - 1.0) / h * W + B / h
    return float(math.sqrt(var_plus / W))


def diagnostics(chains: Sequence[Chain]) -> dict[str, dict[str, float]]:
    """Split R-hat (needs two or more chains) and ESS per coordinate."""
    chains = list(chains)
    if not chains:
        raise ValueError("no chains")
    n = chains[0].n_keep
    if any(c.n_keep != n for c in chains):
        raise ValueError("chains must have equal length")
    out = {}
    for j, name in enumerate(chains[0].names):
        D = np.array([c.draws[:, j] for c in chains])
        row = {"ess": ess(D)}
        if len(chains) >= 2:
            row["split_rhat"] = split_rhat(D)
        out[name] = row
    return out


# ---------------------------------------------------------------------------
# persistence: CSV of draws plus a JSON sidecar


def save_chain(chain: Chain, path) -> tuple[Path, Path]:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(list(chain.names) + ["logpost"])
        for row, lp in zip(chain.draws, chain.logpost):
            w.writerow([repr(float(v)) for v in row] + [repr(float(lp))])
    side = path.with_suffix(".json")
    meta = {
        "names": list(chain.names),
        "n_keep": chain.n_keep,
        "seed": chain.seed,
        "acceptance_rate": chain.acceptance_rate,
        "centring": chain.centring,
        "config": chain.config,
    }
    side.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return path, side


def load_chain(path) -> Chain:
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], np.array(rows[1:], dtype=float)
    if header[:-1] != meta["names"]:
        raise ValueError("chain CSV header does not match its sidecar")
    return Chain(body[:, :-1], body[:, -1], meta["acceptance_rate"], meta["seed"], meta["names"],
                 meta["config"], meta.get("centring", "mode"))
