"""Localization from RSSI samples of a single rotating, directional transmit antenna."""

from .bounds import CrlbReport, crlb_biased, crlb_report, crlb_unbiased, distance_bias, fim, g_variance
from .channel import MeasurementSet, Scenario, mean_rssi, sample_measurements, snr_to_sigma
from .errors import (
    ConfigError,
    DegenerateError,
    NoIntersections,
    PatternLocateError,
    SingularFim,
    ZeroNoise,
)
from .estimators import (
    Estimate,
    Knowns,
    Method,
    estimate_cid,
    estimate_eqsolve,
    estimate_mle,
    estimate_theta_similarity,
    gain_ratio_curve,
    locate_unknown_receiver,
    two_position_fix,
)
from .montecarlo import SweepAxis, SweepConfig, SweepResult, run_sweep, true_position_sampler
from .patterns import RadiationPattern, asymmetric_dipole, dipole, omnidirectional, tabulated

__all__ = [
    "ConfigError",
    "CrlbReport",
    "DegenerateError",
    "Estimate",
    "Knowns",
    "MeasurementSet",
    "Method",
    "NoIntersections",
    "PatternLocateError",
    "RadiationPattern",
    "Scenario",
    "SingularFim",
    "SweepAxis",
    "SweepConfig",
    "SweepResult",
    "ZeroNoise",
    "asymmetric_dipole",
    "crlb_biased",
    "crlb_report",
    "crlb_unbiased",
    "dipole",
    "distance_bias",
    "estimate_cid",
    "estimate_eqsolve",
    "estimate_mle",
    "estimate_theta_similarity",
    "fim",
    "g_variance",
    "gain_ratio_curve",
    "locate_unknown_receiver",
    "mean_rssi",
    "omnidirectional",
    "run_sweep",
    "sample_measurements",
    "snr_to_sigma",
    "tabulated",
    "true_position_sampler",
    "two_position_fix",
]
