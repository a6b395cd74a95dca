"""Fisher information and Cramer-Rao bounds for rotating-pattern RSSI.

With ``K_i = (10 / ln 10) G'_T / G_T`` evaluated at ``theta + dphi_i``
(per radian) and ``c = -10 n / (d ln 10)``, the Fisher information of
``(d, theta)`` is::

    J = 1/sigma^2 * [[N c^2,        c sum K ],
                     [c sum K,      sum K^2 ]]

Its inverse has the closed form implemented in :func:`crlb_unbiased`; the
denominator ``N sum K^2 - (sum K)^2`` equals ``N * sum (K - mean K)^2`` and
vanishes exactly when every ``K_i`` is equal.

Bearing bounds are in rad^2 (``*_deg2`` helpers convert).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, NamedTuple

import numpy as np

from .channel import Scenario, sample_measurements
from .errors import SingularFim, ZeroNoise
from .estimators import Knowns, estimate_mle
from .solver import GridSpec

LN10 = math.log(10.0)
RAD2_TO_DEG2 = (180.0 / math.pi) ** 2
# Relative size of N sum K^2 - (sum K)^2 below which J is treated as singular.
_SINGULAR_REL = 1e-12


def k_values(scenario: Scenario, theta_deg: float | None = None) -> np.ndarray:
    """Scaled log-gain slopes ``K_i`` at each rotation (dB per radian)."""
    theta = scenario.true_theta_deg if theta_deg is None else theta_deg
    rot = np.asarray(scenario.rotations_deg)
    return 10.0 / LN10 * scenario.tx_pattern.log_gain_slope(theta + rot)


def _at(scenario: Scenario, at):
    if at is None:
        return scenario.true_d_m, scenario.true_theta_deg
    return float(at[0]), float(at[1])


def _sigma(scenario: Scenario) -> float:
    if not scenario.sigma_db > 0:
        raise ZeroNoise("Fisher information is unbounded for sigma = 0")
    return scenario.sigma_db


def fim(scenario: Scenario, at: tuple[float, float] | None = None) -> np.ndarray:
    """2x2 Fisher information of ``(d [m], theta [rad])`` at ``at`` (default: truth)."""
    d, theta = _at(scenario, at)
    sigma = _sigma(scenario)
    k = k_values(scenario, theta)
    n_rot = len(k)
    c = -10.0 * scenario.path_loss_n / (d * LN10)
    j11 = 100.0 * scenario.path_loss_n**2 * n_rot / (sigma**2 * (d * LN10) ** 2)
    j12 = c * np.sum(k) / sigma**2
    j22 = np.sum(k**2) / sigma**2
    return np.array([[j11, j12], [j12, j22]])


class UnbiasedBound(NamedTuple):
    var_d_m2: float
    var_theta_rad2: float
    cov_d_theta: float

    @property
    def var_theta_deg2(self) -> float:
        return self.var_theta_rad2 * RAD2_TO_DEG2

    def matrix(self) -> np.ndarray:
        return np.array([[self.var_d_m2, self.cov_d_theta], [self.cov_d_theta, self.var_theta_rad2]])


def crlb_unbiased(scenario: Scenario, at: tuple[float, float] | None = None) -> UnbiasedBound:
    """Closed-form inverse Fisher information.

    Raises:
        ZeroNoise: ``sigma_db == 0``.
        SingularFim: all ``K_i`` equal (bearing unobservable).
    """
    d, theta = _at(scenario, at)
    sigma = _sigma(scenario)
    n = scenario.path_loss_n
    k = k_values(scenario, theta)
    n_rot = len(k)
    sk, sk2 = float(np.sum(k)), float(np.sum(k**2))
    denom = n_rot * sk2 - sk**2
    assert denom >= -_SINGULAR_REL * n_rot * sk2, "Cauchy-Schwarz violated"
    if not denom > _SINGULAR_REL * n_rot * sk2 or not np.isfinite(denom):
        raise SingularFim("all K_i equal: Fisher information is singular")
    var_d = sigma**2 * d**2 * LN10**2 / (100.0 * n**2) * sk2 / denom
    var_theta = n_rot * sigma**2 / denom
    cov = sigma**2 * d * LN10 / (10.0 * n) * sk / denom
    return UnbiasedBound(var_d, var_theta, cov)


def distance_bias(scenario: Scenario) -> float:
    """Multiplicative bias ``E[d_hat] / d`` of the profile distance when the
    bearing estimate is exact: ``10 ** (sigma^2 ln 10 / (200 n^2 N))``."""
    n = scenario.path_loss_n
    return 10.0 ** (scenario.sigma_db**2 * LN10 / (200.0 * n**2 * scenario.n_rotations))


def default_bias_terms(scenario: Scenario, at: tuple[float, float] | None = None):
    """Bias vector and bias Jacobian used when none is supplied.

    ``beta = (d (f - 1), 0)`` and ``d beta / d alpha = [[f - 1, 0], [0, 0]]``
    with ``f`` from :func:`distance_bias`; the bearing is taken as unbiased.
    """
    d, _ = _at(scenario, at)
    f = distance_bias(scenario)
    beta = np.array([d * (f - 1.0), 0.0])
    grad = np.array([[f - 1.0, 0.0], [0.0, 0.0]])
    return beta, grad


def crlb_biased(
    scenario: Scenario,
    at: tuple[float, float] | None = None,
    bias_gradients: np.ndarray | None = None,
    beta: np.ndarray | None = None,
) -> np.ndarray:
    """Biased-estimator bound ``beta beta^T + (I + B) J^{-1} (I + B)^T``.

    ``bias_gradients`` is ``B = d beta / d alpha`` (rows: d, theta; columns:
    d, theta [rad]).  Omitted terms come from :func:`default_bias_terms`.
    """
    inv = crlb_unbiased(scenario, at).matrix()
    beta_def, grad_def = default_bias_terms(scenario, at)
    beta = beta_def if beta is None else np.asarray(beta, dtype=float)
    grad = grad_def if bias_gradients is None else np.asarray(bias_gradients, dtype=float)
    jac = np.eye(2) + grad
    return np.outer(beta, beta) + jac @ inv @ jac.T


def bias_terms_mc(
    scenario: Scenario,
    at: tuple[float, float] | None = None,
    trials: int = 2000,
    seed: int = 0,
    h_d: float = 1e-2,
    h_theta_deg: float = 0.5,
    grid: GridSpec = GridSpec(),
):
    """Monte-Carlo bias vector and bias Jacobian of the profile MLE.

    Central differences of ``E[alpha_hat]`` in each parameter, with common
    random numbers across the perturbed scenarios.  Noise draws use
    ``(seed, trial)`` keys, so the result is independent of evaluation order.
    """
    d, theta = _at(scenario, at)
    sigma = _sigma(scenario)

    def mean_estimate(d0, th0):
        sc = scenario.with_(true_d_m=d0, true_theta_deg=th0)
        kn = Knowns.from_scenario(sc)
        est = np.empty((trials, 2))
        for t in range(trials):
            e = estimate_mle(sample_measurements(sc, (seed, t)), kn, sigma, grid)
            est[t] = e.d_hat, math.radians(e.theta_hat)
        return est.mean(axis=0)

    center = mean_estimate(d, theta)
    beta = center - np.array([d, math.radians(theta)])
    col_d = (mean_estimate(d + h_d, theta) - mean_estimate(d - h_d, theta)) / (2 * h_d)
    col_t = (mean_estimate(d, theta + h_theta_deg) - mean_estimate(d, theta - h_theta_deg)) / (
        2 * math.radians(h_theta_deg)
    )
    jac = np.column_stack([col_d, col_t])
    return beta, jac - np.eye(2)


def g_variance(scenario: Scenario, at_theta: float | None = None) -> float:
    """Population variance of ``G'_T / G_T`` over the rotations (1/rad^2)."""
    theta = scenario.true_theta_deg if at_theta is None else at_theta
    slopes = scenario.tx_pattern.log_gain_slope(theta + np.asarray(scenario.rotations_deg))
    return float(np.var(slopes))


@dataclass(frozen=True, eq=False)
class CrlbReport:
    """Every bound-related quantity for one scenario and evaluation point."""

    k: np.ndarray
    h_sum: float
    g_variance: float
    fim: np.ndarray
    fim_inv: np.ndarray
    bias_factor: float
    bias_d: float
    crlb_biased: np.ndarray
    crlb_unbiased_d: float
    crlb_unbiased_theta: float

    @property
    def crlb_unbiased_theta_deg2(self) -> float:
        return self.crlb_unbiased_theta * RAD2_TO_DEG2

    @property
    def crlb_biased_theta_deg2(self) -> float:
        return float(self.crlb_biased[1, 1]) * RAD2_TO_DEG2


def crlb_report(scenario: Scenario, at: tuple[float, float] | None = None) -> CrlbReport:
    k = k_values(scenario, _at(scenario, at)[1])
    bound = crlb_unbiased(scenario, at)
    beta, _ = default_bias_terms(scenario, at)
    return CrlbReport(
        k=k,
        h_sum=float(np.sum(k)),
        g_variance=g_variance(scenario, _at(scenario, at)[1]),
        fim=fim(scenario, at),
        fim_inv=bound.matrix(),
        bias_factor=distance_bias(scenario),
        bias_d=float(beta[0]),
        crlb_biased=crlb_biased(scenario, at),
        crlb_unbiased_d=bound.var_d_m2,
        crlb_unbiased_theta=bound.var_theta_rad2,
    )


CRLB_CSV_COLUMNS = [
    "scenario",
    "snr_db",
    "sigma_db",
    "crlb_d_m2",
    "crlb_theta_rad2",
    "crlb_theta_deg2",
    "crlb_biased_d_m2",
    "crlb_biased_theta_deg2",
    "bias_factor",
    "g_variance",
]


def write_crlb_csv(rows: Iterable[tuple[str, float, CrlbReport, float]], path: str | Path) -> None:
    """Rows of ``(scenario name, snr_db, report, sigma_db)``."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CRLB_CSV_COLUMNS)
        for name, snr, rep, sigma in rows:
            w.writerow(
                [
                    name,
                    repr(float(snr)),
                    repr(float(sigma)),
                    repr(rep.crlb_unbiased_d),
                    repr(rep.crlb_unbiased_theta),
                    repr(rep.crlb_unbiased_theta_deg2),
                    repr(float(rep.crlb_biased[0, 0])),
                    repr(rep.crlb_biased_theta_deg2),
                    repr(rep.bias_factor),
                    repr(rep.g_variance),
                ]
            )
