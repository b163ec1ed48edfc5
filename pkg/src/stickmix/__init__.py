"""Stick-breaking Dirichlet process mixture sampler for profile regression.

Fits an infinite mixture jointly to discrete covariate profiles and a
Bernoulli response (with global fixed effects), keeping the full
stick-breaking representation in the sampled state.  Includes
label-switching Metropolis moves, marginal partition posterior
diagnostics for cross-chain convergence monitoring, and post-processing
(posterior similarity matrix, optimal partition, Rao-Blackwellised
predictions).
"""

from stickmix.model import (
    ChainState,
    ClusterParams,
    HyperParams,
    ProfileDataset,
    SweepRecord,
    cluster_counts,
    log_likelihood_obs,
    stick_weights,
)
from stickmix.rng import RngStream
from stickmix.sampler import Sampler, SamplerConfig

__all__ = [
    "ChainState",
    "ClusterParams",
    "HyperParams",
    "ProfileDataset",
    "RngStream",
    "Sampler",
    "SamplerConfig",
    "SweepRecord",
    "cluster_counts",
    "log_likelihood_obs",
    "stick_weights",
]

__version__ = "0.1.0"
