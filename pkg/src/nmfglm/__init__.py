"""Naive mean-field variational inference for Bayesian canonical GLMs with product priors."""

from .errors import (
    CapacityError,
    DegenerateTiltError,
    DomainError,
    InvalidStateError,
    NmfGlmError,
    NumericError,
    PairingError,
    ParameterError,
    ShapeError,
    UnsupportedPriorError,
)
from .families import (
    Dataset,
    GlmFamily,
    GlmModel,
    PriorSpec,
    binomial,
    discrete_prior,
    hamiltonian,
    hamiltonian_grad,
    linear,
    logistic,
    simulate_response,
    standard_gaussian_prior,
    three_point_prior,
    validate,
)
from .montecarlo import MCConfig
from .tilt import ProductTilt, TiltParams, c_ddot, c_dot, c_pi, h_inverse, kl_tilt_vs_prior, tilt_quantile
from .tilt_solver import TiltFit, TiltState, elbo_tilt, f_j_estimate, fit_tilt, stationarity_residual, tilt_update
from .gauss import GaussFit, GaussState, elbo_gauss_mc, fit_gauss, grad_gauss_mc
from .jj import GaussianPrior, JJFit, JJState, fit_jj, jj_bound, jj_objective_mc, jj_step, lambda_fn
from .gibbs import gibbs_sweep, init_chains, posterior_mean, run_chains
from .oracle import elbo1_identity_check, enumerate_logz, enumerate_posterior, exact_product_elbo, quadrature_logz
from .diagnostics import (
    DiagnosticsReport,
    build_A,
    diagnose,
    entry_tail,
    frob_tail,
    make_block_design,
    make_gaussian_design,
    opnorm,
    trace_A_sq,
)
from .metrics import (
    average_coverage,
    classification_error,
    coordwise_w1,
    credible_intervals,
    disagreement_probability,
    mse,
    wasserstein1_1d,
)

__version__ = "0.1.0"
