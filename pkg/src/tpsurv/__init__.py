"""Bayesian linear and AFT regression with two-piece scale-mixture-of-normal errors."""
from .distributions import (
    LAPLACE,
    LOGISTIC,
    NORMAL,
    Baseline,
    Skew,
    TwoPieceParams,
    student_t,
    tp_cdf,
    tp_logpdf,
    tp_median,
    tp_pdf,
    tp_quantile,
    tp_sample,
    tp_sf,
)
from .fitting import fit, initial_point
from .model import (
    CensoredObservation,
    Dataset,
    ModelSpec,
    ParameterVector,
    Posterior,
    gamma_logprior,
    loglikelihood,
    logposterior,
)
from .prediction import (
    CentringRule,
    predictive_cdf,
    recentre,
    relabel,
    residual_life_quantile,
    residual_life_survival,
)
from .propriety import Verdict, propriety_report
from .sampler import Chain, ChainConfig, load_chain, run_chain, save_chain, summarize
from .selection import bic, compare, log_marginal_is, lpml, mle_fit, savage_dickey_bf
from .simstudy import Scenario, generate, run_study, scenario

__version__ = "0.1.0"
