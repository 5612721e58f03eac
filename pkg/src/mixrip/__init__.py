"""Weighted Fourier sketches of separated mixtures and their restricted isometry bounds."""
from .errors import ConfigurationError, PreconditionError, SeparationError
from .kernels import KernelSpec, coherence_threshold, mutual_coherence
from .mixtures import Dipole, LocationFamily, Mixture, SignedMixture, mmd_norm
from .frequencies import FrequencyMatrix, WeightFunction, sample_frequencies
from .sketch import SketchOperator, sketch_signed_mixture
from .ripbounds import RipReport, assemble_bound, rip_report, sketch_size
from .experiments import ExperimentConfig, ExperimentResult

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError", "PreconditionError", "SeparationError",
    "KernelSpec", "coherence_threshold", "mutual_coherence",
    "Dipole", "LocationFamily", "Mixture", "SignedMixture", "mmd_norm",
    "FrequencyMatrix", "WeightFunction", "sample_frequencies",
    "SketchOperator", "sketch_signed_mixture",
    "RipReport", "assemble_bound", "rip_report", "sketch_size",
    "ExperimentConfig", "ExperimentResult",
]
