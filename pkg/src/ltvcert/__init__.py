"""Stability certification for piecewise linear time-varying systems."""

from .analysis import (frozen_time_margins, lyapunov_monitor, simulate,
                       spectral_abscissa, verify_certificate_grid)
from .cert import (DecayRates, NominalCertificate, RobustCertificate,
                   beta_of_delta, build_nominal, build_robust, delta_of_beta,
                   solve_nominal, solve_robust)
from .margin import MarginOptions, MarginResult, max_uncertainty
from .model import (PiecewiseLTVSystem, TimeGrid, UncertainPiecewiseLTVSystem,
                    load_system, save_system)

__version__ = "0.1.0"

__all__ = [
    "TimeGrid",
    "PiecewiseLTVSystem",
    "UncertainPiecewiseLTVSystem",
    "load_system",
    "save_system",
    "DecayRates",
    "NominalCertificate",
    "RobustCertificate",
    "beta_of_delta",
    "delta_of_beta",
    "build_nominal",
    "build_robust",
    "solve_nominal",
    "solve_robust",
    "MarginOptions",
    "MarginResult",
    "max_uncertainty",
    "simulate",
    "lyapunov_monitor",
    "verify_certificate_grid",
    "spectral_abscissa",
    "frozen_time_margins",
]
