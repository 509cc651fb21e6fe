"""Monte Carlo passive-tracer transport in synthetic incompressible random flows."""

from .ensemble import DispersionSeries, ExperimentConfig, effective_diffusivity, run
from .field import FieldRealization, generate
from .integrator import SchemeConfig
from .spectrum import Diffusion, SpectrumSpec, classify_diffusion, spec_from_tag
from .stats import diffusivity_limit, power_law_fit, psi_decay_fit

__version__ = "0.1.0"

__all__ = [
    "DispersionSeries",
    "Diffusion",
    "ExperimentConfig",
    "FieldRealization",
    "SchemeConfig",
    "SpectrumSpec",
    "classify_diffusion",
    "diffusivity_limit",
    "effective_diffusivity",
    "generate",
    "power_law_fit",
    "psi_decay_fit",
    "run",
    "spec_from_tag",
]
