"""Parallel cluster sampling for Bayesian inverse problems with GMM priors.

The pipeline: fit a Gaussian mixture to a prior ensemble by EM with AIC
model selection, build the posterior of a Gaussian-noise observation under
a forward operator, and sample it with one Markov chain per mixture
component, run in parallel and gathered deterministically. A Tikhonov
baseline with L-curve tuning and an analytical parallel-cost model round
out the toolkit.
"""

from .cost_model import CostModelInput, CostReport, predict_cost, step_cost
from .errors import (
    ConfigError,
    DegenerateComponent,
    DimensionMismatch,
    ImageIoError,
    InsufficientSamples,
    NotPositiveDefinite,
    ZeroReference,
)
from .forward_models import (
    GaussianBlurOperator,
    IdentityOperator,
    ImageGrid,
    MatrixOperator,
    SaturationWrapper,
    blur_jacobian_structure_check,
    gaussian_kernel1d,
    read_pgm,
    write_pgm,
)
from .gmm import Ensemble, GaussianMixture, em_fit, select_model_aic
from .linalg_rng import (
    RngStream,
    SpdMatrix,
    cholesky,
    sample_mvn,
    sample_standard_normal,
    weighted_norm_sq,
)
from .mc_scheduler import (
    ChainPlan,
    SchedulerPlan,
    WorkerPool,
    allocate_budgets,
    benchmark_speedup,
    build_plan,
    run_mc_mcmc,
)
from .posterior import PosteriorModel, conjugate_posterior
from .samplers import (
    ChainConfig,
    ChainResult,
    GaussianProposal,
    HmcParams,
    chain_diagnostics,
    hmc_step,
    leapfrog,
    mh_step,
    run_chain,
)
from .tikhonov import (
    TikhonovProblem,
    discrete_laplacian,
    lcurve_select_alpha,
    solve_tikhonov,
    tikhonov_objective,
)

__version__ = "0.1.0"

__all__ = [
    "ChainConfig",
    "ChainPlan",
    "ChainResult",
    "ConfigError",
    "CostModelInput",
    "CostReport",
    "DegenerateComponent",
    "DimensionMismatch",
    "Ensemble",
    "GaussianBlurOperator",
    "GaussianMixture",
    "GaussianProposal",
    "HmcParams",
    "IdentityOperator",
    "ImageGrid",
    "ImageIoError",
    "InsufficientSamples",
    "MatrixOperator",
    "NotPositiveDefinite",
    "PosteriorModel",
    "RngStream",
    "SaturationWrapper",
    "SchedulerPlan",
    "SpdMatrix",
    "TikhonovProblem",
    "WorkerPool",
    "ZeroReference",
    "allocate_budgets",
    "benchmark_speedup",
    "blur_jacobian_structure_check",
    "build_plan",
    "chain_diagnostics",
    "cholesky",
    "conjugate_posterior",
    "discrete_laplacian",
    "em_fit",
    "gaussian_kernel1d",
    "hmc_step",
    "lcurve_select_alpha",
    "leapfrog",
    "mh_step",
    "predict_cost",
    "read_pgm",
    "run_chain",
    "run_mc_mcmc",
    "sample_mvn",
    "sample_standard_normal",
    "select_model_aic",
    "solve_tikhonov",
    "step_cost",
    "tikhonov_objective",
    "weighted_norm_sq",
    "write_pgm",
]
