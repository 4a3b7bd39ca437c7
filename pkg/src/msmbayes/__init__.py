"""Bayesian inference for panel-observed multi-state models.

Latent continuous-time paths are imputed with a Markov-bridge
Metropolis-Hastings step inside a Gibbs sampler, which supports Weibull
semi-Markov and Gompertz time-inhomogeneous Markov models as well as plain
Markov chains.
"""
from .bridge import (
    UnreachableError,
    sample_conditioned_segment,
    sample_full_proposal,
    sample_jump_count,
    sample_segment_to_absorption,
)
from .ctmc import (
    ConvergenceError,
    RateMatrix,
    build_rate_matrix,
    transition_probability,
    uniformize,
)
from .gibbs import (
    PosteriorDraws,
    PriorSpec,
    SamplerConfig,
    SamplerError,
    build_proposal_rate_matrix,
    run_gibbs,
)
from .mh import TrajectoryState, log_accept_ratio, mh_update
from .models import (
    GompertzIMParams,
    MarkovParams,
    PanelSeries,
    Trajectory,
    WeibullSMParams,
    log_density,
    simulate_forward,
)

__version__ = "0.1.0"
