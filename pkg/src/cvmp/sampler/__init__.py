"""Gibbs and Metropolis-Hastings sampling for the polar model."""

from .chain import (PolarParcelChain, PosteriorSummary, SamplerConfig,
                    initialize_state, run_chain)
from .diagnostics import batch_means_mcse
from .phase import PhaseProjector

__all__ = ["PolarParcelChain", "PosteriorSummary", "SamplerConfig",
           "initialize_state", "run_chain", "batch_means_mcse",
           "PhaseProjector"]
