"""poiseflow: spectral simulation and verification toolkit for 2D
perturbations of plane Poiseuille flow.

Evolves the per-frequency linearized vorticity equation and the truncated
nonlinear system on a Chebyshev grid, evaluates the weighted energy and
dissipation functionals with their frequency multipliers, and ships a CLI
for decay-rate sweeps, identity verification and stability-threshold
experiments.
"""

__version__ = "0.1.0"

from .errors import BlowUpError, ConfigError, NumericalError, ShapeError
from .grid import (Grid1D, antiderivative_stream, build_grid, diff_y, inner,
                   laplacian_k, solve_poisson, weighted_norm)
from .multipliers import (EnergyConstants, MultiplierSet, bracket,
                          epsilon_weights, eval_multipliers, time_weight_M)
from .state import Field, ModeState

__all__ = [
    "__version__",
    "BlowUpError", "ConfigError", "NumericalError", "ShapeError",
    "Grid1D", "build_grid", "diff_y", "laplacian_k", "solve_poisson",
    "antiderivative_stream", "weighted_norm", "inner",
    "MultiplierSet", "EnergyConstants", "eval_multipliers", "time_weight_M",
    "bracket", "epsilon_weights",
    "ModeState", "Field",
]
