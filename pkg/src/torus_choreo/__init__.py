"""Computer-assisted existence proofs for spatial torus-knot choreographies."""

from .problem import ProblemParams, StateX, check_resonance, compute_s1
from .validator import Certificate, validate

__all__ = ["Certificate", "ProblemParams", "StateX", "check_resonance", "compute_s1", "validate"]
__version__ = "0.1.0"
