"""Free-knot polynomial spline approximation of sampled stochastic-process paths."""

__version__ = "0.1.0"

from .core import (ApproxParams, KnotSchedule, Spline, aggregate, beta, build_spline,
                   build_spline_eps, gamma_k, phi_star_error, piece_errors, spline_error,
                   stopping_times)
from .diffusion import (DiffusionApproxResult, build_drift_spline, build_martingale_spline,
                        composite_approximation, diffusion_rate_study, direct_approximation)
from .estimators import FreeKnotSpline, VariableKnotSpline
from .exceptions import (ConfigError, InvalidArgumentError, NumericFailure,
                         OutOfRangeError)
from .experiments import (EstimateWithError, McConfig, RateFit, StudyResult,
                          avg_knot_rate_study, b_constant, estimate_eta_kappa, estimate_tau,
                          fit_loglog, negative_moment_study, rate_study,
                          small_deviation_study, xi_structure_check)
from .paths import (IwpState, RngStream, SampledPath, SdeCoefficients, extend_path,
                    sde_preset, simulate_brownian_bridge, simulate_diffusion,
                    simulate_integrated_wiener, simulate_wiener)
from .polyfit import FitResult, Polynomial, best_poly, delta, lp_norm

__all__ = [
    "ApproxParams", "ConfigError", "DiffusionApproxResult", "EstimateWithError",
    "FitResult", "FreeKnotSpline", "InvalidArgumentError", "IwpState", "KnotSchedule",
    "McConfig", "NumericFailure", "OutOfRangeError", "Polynomial", "RateFit", "RngStream",
    "SampledPath", "SdeCoefficients", "Spline", "StudyResult", "VariableKnotSpline",
    "aggregate", "avg_knot_rate_study", "b_constant", "best_poly", "beta",
    "build_drift_spline", "build_martingale_spline", "build_spline", "build_spline_eps",
    "composite_approximation", "delta", "diffusion_rate_study", "direct_approximation",
    "estimate_eta_kappa", "estimate_tau", "extend_path", "fit_loglog", "gamma_k", "lp_norm",
    "negative_moment_study", "phi_star_error", "piece_errors", "rate_study", "sde_preset",
    "simulate_brownian_bridge", "simulate_diffusion", "simulate_integrated_wiener",
    "simulate_wiener", "small_deviation_study", "spline_error", "stopping_times",
    "xi_structure_check",
]
