"""Zone control of impulsively controlled linear systems.

Admissible sets via polynomial positivity certificates, impulsive
equilibrium and invariant sets, zone MPC and hybrid simulation.
"""
from .config import ProblemConfig, example_config
from .geometry import Polytope
from .lti import ImpulsiveSystem, discretize, modal_decompose, rationalize_spectrum

__version__ = "0.1.0"

__all__ = [
    "ImpulsiveSystem",
    "Polytope",
    "ProblemConfig",
    "discretize",
    "example_config",
    "modal_decompose",
    "rationalize_spectrum",
]
