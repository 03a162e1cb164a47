"""Finite-volume simulator for coupled active/passive crowd densities.

The active population moves by a generalized Forchheimer (non-Darcy)
law with a degenerate time term, the passive one by plain diffusion;
the two exchange mass through a sublinear power-law term.  A built-in
energy monitor evaluates the a-priori growth bounds on every
trajectory.
"""

__version__ = "0.1.0"

from .constitutive import CouplingLaw, ForchheimerPolynomial
from .errors import ConfigError, ForchflowError, NumericError, StepError
from .grid import NEUMANN, ROBIN, StructuredGrid
from .solver import ModelParameters, SimulationState, StepperConfig, coupled_step, run

__all__ = [
    "ConfigError",
    "CouplingLaw",
    "ForchflowError",
    "ForchheimerPolynomial",
    "ModelParameters",
    "NEUMANN",
    "NumericError",
    "ROBIN",
    "SimulationState",
    "StepError",
    "StepperConfig",
    "StructuredGrid",
    "coupled_step",
    "run",
    "__version__",
]
