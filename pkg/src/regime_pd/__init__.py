"""Default probabilities under regime-switching Levy models with synchronous jumps.

The probability that log-asset value ends below a barrier is computed two
ways: by radial basis function collocation of the forward partial
integro-differential system (``pide_operator`` + ``time_stepper``) and by
Fourier inversion of the regime-switching characteristic function
(``fourier_oracle``).
"""
__version__ = "0.1.0"

from .fourier_oracle import InversionNotConverged, default_probability, regime_cf
from .levy_measures import (GtsParams, RegimeModel, SyncJumpSpec, cgmy_params, kobol_params,
                            vg_params)
from .model import SwitchingModel
from .pide_operator import QuadratureConfig, assemble_blocks
from .rbf_basis import BasisKind, CollocationGrid, uniform_grid
from .regime_chain import transition_matrix, validate_generator
from .time_stepper import SolutionSurface, SolverConfig, solve

__all__ = [
    "BasisKind", "CollocationGrid", "GtsParams", "InversionNotConverged", "QuadratureConfig",
    "RegimeModel", "SolutionSurface", "SolverConfig", "SwitchingModel", "SyncJumpSpec",
    "assemble_blocks", "cgmy_params", "default_probability", "kobol_params", "regime_cf",
    "solve", "transition_matrix", "uniform_grid", "validate_generator", "vg_params",
]
