"""Comparison models: the stationarity-restricted mixture and a two-regime TAR."""
from .stationary import (StationaryComponent, StationaryDraws, StationaryState, fit_stationary,
                         invariant_density, stationary_transition_density)
from .tar import TarDraws, TarParams, TarPriors, fit_tar

__all__ = [
    "StationaryComponent", "StationaryDraws", "StationaryState", "fit_stationary",
    "invariant_density", "stationary_transition_density",
    "TarDraws", "TarParams", "TarPriors", "fit_tar",
]
