"""nemflow: pseudo-spectral non-isothermal nematic liquid crystal toolkit."""

__version__ = "0.1.0"

from .coefficients import CoefficientSet, ThetaPoly
from .grid import Grid, ScalarField, TensorField, VectorField
from .solver import SimState, SolverConfig, run

__all__ = [
    "CoefficientSet",
    "Grid",
    "ScalarField",
    "SimState",
    "SolverConfig",
    "TensorField",
    "ThetaPoly",
    "VectorField",
    "run",
    "__version__",
]
