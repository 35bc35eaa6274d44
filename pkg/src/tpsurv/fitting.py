"""Posterior sampling for a (data, spec) pair."""
from __future__ import annotations

import numpy as np

from .distributions import gamma_in_domain, symmetry_point
from .model import (
    Dataset,
    ModelSpec,
    ParameterVector,
    Posterior,
    constrain_draws,
    delta_logprior,
    gamma_logprior,
    to_unconstrained,
    unpack,
)
from .sampler import ChainConfig, run_chain, run_chains


def initial_point(data: Dataset, spec: ModelSpec) -> ParameterVector:
    """Least-squares ``beta``, residual sd for ``sigma``, symmetric ``gamma``, ``delta = 5``."""
    beta, sd = data.ls_start()
    return ParameterVector(beta, sd, symmetry_point(spec.parameterisation),
                           5.0 if spec.free_delta else None)


def natural_logpost(post: Posterior, draws: np.ndarray) -> np.ndarray:
    """Unnormalized log posterior of natural-scale draws (no Jacobian)."""
    spec = post.spec
    draws = np.atleast_2d(draws)
    beta, sigma, gamma, delta = unpack(draws, spec, post.p)
    ok = (sigma > 0) & np.isfinite(sigma) & gamma_in_domain(gamma, spec.parameterisation)
    if spec.free_delta:
        ok &= (delta > 0) & np.isfinite(delta)
    lp = np.full(draws.shape[0], -np.inf)
    if not ok.any():
        return lp
    d = draws[ok]
    beta, sigma, gamma, delta = unpack(d, spec, post.p)
    val = post.loglik_matrix(d).sum(axis=1) - spec.q * np.log(sigma)
    if spec.two_piece:
        val = val + gamma_logprior(gamma, spec.a0, spec.b0, spec.parameterisation)
    if spec.free_delta:
        val = val + delta_logprior(delta, spec.d)
    lp[ok] = np.where(np.isnan(val), -np.inf, val)
    return lp


class _Constrain:
    # picklable transform for worker processes
    def __init__(self, spec, p):
        self.spec, self.p = spec, p

    def __call__(self, U):
        return constrain_draws(U, self.spec, self.p)


def fit(data: Dataset, spec: ModelSpec, config: ChainConfig, init: ParameterVector | None = None,
        n_chains: int = 1, threads: int = 1):
    """Sample the posterior; returns one :class:`Chain` or a list if ``n_chains > 1``.

    Chain ``i`` uses seed ``config.seed + i``.  Stored ``logpost`` values are
    on the natural scale so the MAP is the natural-scale mode.
    """
    post = Posterior(data, spec)
    theta0 = init if init is not None else initial_point(data, spec)
    u0 = to_unconstrained(theta0.validate(spec, data.p), spec)
    tr = _Constrain(spec, data.p)
    if n_chains == 1:
        chains = [run_chain(post, config, u0, tr, post.names)]
    else:
        cfgs = [ChainConfig(**{**config.__dict__, "seed": config.seed + i}) for i in range(n_chains)]
        chains = run_chains(post, cfgs, u0, tr, post.names, threads=threads)
    for c in chains:
        c.logpost = natural_logpost(post, c.draws)
        c.config = {**c.config, "model": spec.name}
    return chains[0] if n_chains == 1 else chains
