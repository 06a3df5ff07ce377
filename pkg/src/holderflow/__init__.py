"""Moderately interacting particle systems driven by Hölder noise and their
stochastic compressible Euler limit: simulation, Young calculus, Besov
analysis and convergence-rate experiments at desk scale."""

from .noise import NoiseSpec, SampledPath, sample_fbm
from .kernels import KernelFamily
from .fields import FluidState, Grid, SigmaField
from .particles import ParticleEnsemble
from .convergence import ExperimentConfig

__version__ = "0.1.0"

__all__ = [
    "NoiseSpec",
    "SampledPath",
    "sample_fbm",
    "KernelFamily",
    "FluidState",
    "Grid",
    "SigmaField",
    "ParticleEnsemble",
    "ExperimentConfig",
    "__version__",
]
