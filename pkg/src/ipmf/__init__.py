"""Closed-form iterative proportional Markovian fitting on Gaussians.

Layers:

* :mod:`ipmf.gaussian` - exact Gaussian algebra (conditioning, KL,
  Bures-Wasserstein, precision cross block);
* :mod:`ipmf.scalar` - the 1D theory engine (optimality coefficient,
  Markovian/proportional fitting steps, contraction factors, rate
  certificates);
* :mod:`ipmf.chain` - D-dimensional discrete-time projections and the
  fixed-point solver;
* :mod:`ipmf.montecarlo` / :mod:`ipmf.sinkhorn` - independent
  verification (trajectory sampling, grid entropic plans);
* :mod:`ipmf.experiments` / :mod:`ipmf.cli` - reproducible experiment
  runners with CSV/JSON artifacts.
"""

from .gaussian import (
    Gaussian1D,
    GaussianConditional,
    GaussianND,
    JointGaussian,
    SingularMatrixError,
    bw2,
    compose,
    condition,
    kl_gaussian,
    precision_cross_block,
)
from .scalar import (
    FormulaDomainError,
    RateCertificate,
    ScalarIterate,
    ScalarProblem,
    certificate,
    chi_improvement_factor,
    chi_of,
    continuous_correlation_update,
    discrete_correlation_update,
    gamma_c,
    gamma_d,
    grid_correlation_update,
    imf_step_continuous,
    imf_step_discrete,
    ipf_step,
    ipmf_round,
    p_inverse,
    rho_star,
    xi,
)
from .chain import (
    ConvergenceError,
    DiscreteGaussProcess,
    MatrixProblem,
    StartCoupling,
    TimeGrid,
    ipf_project,
    ipmf_round_nd,
    make_start,
    markov_project,
    optimality_certificate,
    reciprocal_project,
    sb_oracle,
    wiener_joint,
)
from .montecarlo import TrajectoryBatch, empirical_moments, sample_bridge, sample_process
from .sinkhorn import GridPlan, SinkhornError, plan_correlation, sinkhorn_plan

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
