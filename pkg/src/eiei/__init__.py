"""Expected improvement and the EIEI stepwise-uncertainty-reduction criterion for GP-based optimization."""
from .acquisition import (
    CandidateSet,
    Gaussian2,
    eei,
    eiei,
    expected_improvement,
    integrated_ei,
    multi_point_ei_mc,
    two_point_ei,
)
from .benchlab import TestbedConfig, aggregate, beta_from_dimension, fig2_function, generate_testbed, run_benchmark
from .gp import GPPosterior, MaternKernel, condition, posterior_mean_cov, sample_paths, update
from .special import DomainError, bvn_cdf, matern_correlation, std_normal_cdf, std_normal_pdf
from .strategy import OptimizationTrace, Policy, PolicyKind, extract_estimators, run_optimization

__version__ = "0.1.0"
