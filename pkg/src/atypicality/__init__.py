"""Detection of atypical subsequences by comparing codelengths.

A subsequence is atypical when a universal coder describes it, including
the cost of saying where it starts and how long it is, in fewer bits than
the code built for typical data.
"""

from .codelength import (
    AtypicalityError,
    DefaultCoder,
    DegenerateStateError,
    InvalidArgumentError,
    ModelRoster,
    NotYetDefinedError,
    RosterEntry,
    SequentialCoder,
    default_bits,
    log_star,
    min_codelength,
    mixture_codelength,
    subsequence_overhead,
)
from .engine import (
    AsymptoticModel,
    Detection,
    EngineConfig,
    GaussianTypical,
    LPCTypical,
    asymptotic_score,
    build_roster,
    intrinsic_atypicality_bounds,
    montecarlo_p_a,
    precode,
    scan,
    train_typical_lpc,
)
from .evaluation import EvalReport, Interval, precision_recall, tau_sweep
from .filterbank import DAUB4, HAAR, FilterPair, analyze, synthesize, tree_bits
from .linear_prediction import LinearPredictionCoder, lp_coder_chain, nlm_lp_step
from .scalar import (
    GaussianStats,
    MeanVarianceNLMCoder,
    MeanVarianceSSMCoder,
    PredictiveMDLCoder,
    VarianceNLMCoder,
    VarianceSSMCoder,
    nlm_meanvar_step,
    nlm_var_step,
    redundancy_experiment,
    ssm_meanvar_step,
    ssm_var_step,
)
from .sparse import sparse_block_bits, sparse_series_bits
from .synthetic import LabeledSeries, generate
from .vector import (
    VectorCoder,
    VectorStats,
    log_multivariate_gamma,
    nlm_cov_step,
    nlm_meanvar_vec_step,
    ssm_cov_step,
    ssm_meanvar_vec_step,
    vec_mean_step,
)

__version__ = "0.1.0"
