"""Position estimators for a single rotating transmit antenna.

Known receiver gain:

* :func:`estimate_eqsolve` - least-squares consistency of the N distance
  expressions obtained by inverting each measurement.
* :func:`estimate_cid` - curve intersection detection: pairwise crossings
  of the N target curves, averaged.
* :func:`estimate_mle` - Gaussian maximum likelihood, searched as a profile
  likelihood in bearing with the distance in closed form.

Unknown receiver gain:

* :func:`gain_ratio_curve` + :func:`estimate_theta_similarity` give the
  bearing from RSSI differences alone; :func:`two_position_fix`
  triangulates distance from bearings taken at two transmitter positions.

Bearings are in degrees, distances in meters, RSSI in dBm.  Partial
derivatives with respect to bearing are per radian.
"""

from __future__ import annotations

import csv
import enum
import functools
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .channel import MeasurementSet, Scenario
from .errors import (
    ConfigError,
    DegenerateBaseline,
    DegenerateError,
    DegenerateOverlap,
    InsufficientMeasurements,
    MissingReference,
    NoIntersections,
)
from .patterns import RadiationPattern
from .solver import GridSpec, Maximum1D, Polyline, maximize_1d, maximize_2d, polyline_crossings, shared_grid_crossings

LN10 = math.log(10.0)
DEFAULT_CID_STEP_DEG = 0.1
# objective spread below this (relative) means the bearing is unobservable
_FLAT_TOL = 1e-12


class Method(str, enum.Enum):
    EQSOLVE = "eqsolve"
    CID = "cid"
    MLE = "mle"
    SIMILARITY = "similarity"


@dataclass(frozen=True)
class Knowns:
    """Quantities the receiver-known estimators treat as given.

    ``a_sq`` is ``P_T lambda^2 / (4 pi)^2`` in watts * m^2 and ``rx_gain``
    the linear receiver gain ``G_R(phi_R)``.
    """

    a_sq: float
    path_loss_n: float
    tx_pattern: RadiationPattern
    rx_gain: float = 1.0

    @classmethod
    def from_scenario(cls, scenario: Scenario) -> Knowns:
        return cls(scenario.a_sq, scenario.path_loss_n, scenario.tx_pattern, scenario.rx_gain)


@dataclass(frozen=True)
class Estimate:
    """Estimated position plus solver diagnostics.

    ``count`` is the number of retained intersections for CID and the number
    of objective evaluations otherwise.  ``residual`` is method specific:
    the least-squares cost for EqSolve (m^2), the RMS dB residual for MLE,
    the squared dB misfit of the first-position template for Similarity,
    and the normalized RMS spread of the retained intersection points for
    CID.
    """

    d_hat: float
    theta_hat: float
    method: Method
    residual: float
    count: int
    score_norm: float | None = None


class GainRatioCurve(NamedTuple):
    delta_phi_deg: np.ndarray
    ratio: np.ndarray


# -- forward-model helpers --------------------------------------------------


@functools.lru_cache(maxsize=128)
def _tx_gain_db_cached(pattern: RadiationPattern, theta_bytes: bytes, dphi: tuple[float, ...]) -> np.ndarray:
    theta = np.frombuffer(theta_bytes, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        table = 10.0 * np.log10(pattern.gain(theta[:, None] + np.array(dphi), strict=False))
    table.setflags(write=False)
    return table


def _tx_gain_db(pattern: RadiationPattern, theta: np.ndarray, dphi: np.ndarray, cache: bool = False) -> np.ndarray:
    """``10 log10 G_T(theta + dphi)`` with shape ``theta.shape + (N,)``; NaN off support."""
    theta = np.asarray(theta, dtype=float)
    if cache and theta.ndim == 1:
        return _tx_gain_db_cached(pattern, theta.tobytes(), tuple(dphi.tolist()))
    with np.errstate(divide="ignore", invalid="ignore"):
        return 10.0 * np.log10(pattern.gain(theta[..., None] + dphi, strict=False))


def _offset_db(knowns: Knowns) -> float:
    """``10 log10(A^2 G_R) + 30``: the theta-independent part of the model mean."""
    return 10.0 * math.log10(knowns.a_sq * knowns.rx_gain) + 30.0


def _log_residuals(ms: MeasurementSet, knowns: Knowns, theta, cache: bool = False) -> np.ndarray:
    """``r_i(theta) = R_i - 30 - 10 log10(A^2 G_T G_R) = -10 n log10 d_i(theta)``."""
    g_db = _tx_gain_db(knowns.tx_pattern, theta, ms.delta_phi_deg, cache=cache)
    return (ms.rssi_dbm - _offset_db(knowns)) - g_db


def model_mean_rssi(knowns: Knowns, d, theta, delta_phi_deg) -> np.ndarray:
    """Mean RSSI ``M_i(d, theta)`` in dBm (broadcasting; NaN off support)."""
    d = np.asarray(d, dtype=float)
    g_db = _tx_gain_db(knowns.tx_pattern, theta, np.asarray(delta_phi_deg, dtype=float))
    return _offset_db(knowns) + g_db - 10.0 * knowns.path_loss_n * np.log10(d)[..., None]


def _require_pairs(ms: MeasurementSet) -> None:
    if len(ms) < 2:
        raise InsufficientMeasurements(f"need at least 2 rotations, got {len(ms)}")


def _is_flat(values: np.ndarray) -> bool:
    finite = values[np.isfinite(values)]
    if finite.size == 0:
        return True
    return float(np.ptp(finite)) <= _FLAT_TOL * max(1.0, float(np.max(np.abs(finite))))


# -- target curves -------------------------------------------------------------


def target_curve(
    delta_phi_deg: float, rssi_dbm: float, knowns: Knowns, theta_grid: Sequence[float]
) -> Polyline:
    """Distances consistent with one measurement, as a function of bearing.

    The shadowing term is unknown at inference time and taken as 0.
    Bearings where the pattern is undefined are dropped from the polyline.
    """
    theta = np.asarray(theta_grid, dtype=float)
    ms = MeasurementSet(np.array([delta_phi_deg]), np.array([rssi_dbm]))
    d = _distances(ms, knowns, theta)[:, 0]
    ok = np.isfinite(d)
    return Polyline(theta[ok], d[ok])


def _distances(ms: MeasurementSet, knowns: Knowns, theta, cache: bool = False) -> np.ndarray:
    return 10.0 ** (-_log_residuals(ms, knowns, theta, cache=cache) / (10.0 * knowns.path_loss_n))


# -- equation solving ------------------------------------------------------------


def estimate_eqsolve(ms: MeasurementSet, knowns: Knowns, grid: GridSpec = GridSpec()) -> Estimate:
    """Bearing at which the N inverted distance equations agree best.

    Minimizes ``sum_i (d_i(theta) - mean_j d_j(theta))^2`` over theta and
    returns the mean distance there.

    Raises:
        InsufficientMeasurements: fewer than two rotations.
        DegenerateError: all curves are flat in theta (no pattern diversity).
    """
    _require_pairs(ms)

    def spread(theta, cache=False):
        d = _distances(ms, knowns, theta, cache=cache)
        return np.sum((d - d.mean(axis=-1, keepdims=True)) ** 2, axis=-1)

    def objective(theta):
        cache = theta.size == grid.coarse_steps[1]
        cost = spread(theta, cache=cache)
        return np.where(np.isfinite(cost), -cost, -np.inf)

    coarse = objective(grid.theta_grid)
    if _is_flat(coarse):
        raise DegenerateError("distance equations do not depend on bearing")
    t_lo, t_hi = grid.theta_range
    best = maximize_1d(
        objective, t_lo, t_hi, grid.coarse_steps[1], grid.refine_iters, grid.refine_shrink, allow_infeasible=True
    )
    d = _distances(ms, knowns, np.array(best.x))
    return Estimate(float(np.mean(d)), best.x, Method.EQSOLVE, -best.value, best.n_evals)


# -- curve intersection detection ------------------------------------------------------


def _illinois(f, lo: np.ndarray, hi: np.ndarray, iters: int = 60, xtol: float = 1e-13) -> np.ndarray:
    """Vectorized Illinois (modified regula falsi) root polish on brackets."""
    a, b = lo.copy(), hi.copy()
    fa, fb = f(a), f(b)
    side = np.zeros(len(a), dtype=int)
    for _ in range(iters):
        width = b - a
        if np.all(width <= xtol):
            break
        denom = fb - fa
        c = np.where(denom != 0, (a * fb - b * fa) / np.where(denom != 0, denom, 1.0), 0.5 * (a + b))
        c = np.clip(c, np.minimum(a, b), np.maximum(a, b))
        fc = f(c)
        left = np.sign(fc) == np.sign(fa)
        # root in [c, b]
        a = np.where(left, c, a)
        fa = np.where(left, fc, fa)
        fb = np.where(left & (side == 1), fb * 0.5, fb)
        # root in [a, c]
        b = np.where(~left, c, b)
        fb = np.where(~left, fc, fb)
        fa = np.where(~left & (side == -1), fa * 0.5, fa)
        side = np.where(left, 1, -1)
        done = fc == 0
        a = np.where(done, c, a)
        b = np.where(done, c, b)
    fa, fb = f(a), f(b)
    return np.where(np.abs(fa) <= np.abs(fb), a, b)


def _point_distance(points: np.ndarray, ref: np.ndarray) -> np.ndarray:
    # bearing in radians, distance relative to the reference distance
    dt = np.radians(points[..., 0] - ref[0])
    dd = (points[..., 1] - ref[1]) / ref[1]
    return np.hypot(dt, dd)


def estimate_cid(
    ms: MeasurementSet,
    knowns: Knowns,
    theta_grid: Sequence[float] | None = None,
    polish: bool = True,
) -> Estimate:
    """Curve Intersection Detection.

    Builds one target curve per measurement on ``theta_grid`` (default
    -70..70 deg in 0.1 deg steps), intersects every pair, and averages the
    retained crossing points.  Pairs with one crossing contribute it;
    pairs with several contribute the one nearest the median of the
    single-crossing points (or, if there are none, of all crossings).
    With ``polish`` each crossing is refined on the exact curves inside its
    bracketing segment.

    Raises:
        InsufficientMeasurements: fewer than two rotations.
        DegenerateError: curves carry no bearing information.
        NoIntersections: no pair of curves crosses in the grid range.
    """
    _require_pairs(ms)
    theta = np.linspace(-70.0, 70.0, 1401) if theta_grid is None else np.asarray(theta_grid, dtype=float)
    dist = _distances(ms, knowns, theta, cache=True)
    n = len(ms)
    if all(_is_flat(dist[:, i]) for i in range(n)):
        raise DegenerateError("target curves are flat: no bearing information")

    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    per_pair: list[tuple[int, int, list]] = []
    dist = _fill_interior_gaps(theta, dist)
    # NaN left at a grid end shortens that curve's span; segments touching it
    # fail every sign test, which matches intersecting the shortened polylines
    if np.all(np.isfinite(dist).sum(axis=0) >= 2):
        try:
            found_all = shared_grid_crossings(theta, dist, pairs)
        except DegenerateOverlap as exc:
            raise DegenerateError("two target curves coincide") from exc
        per_pair = [(i, j, found) for (i, j), found in zip(pairs, found_all) if found]
    else:
        curves = []
        for i in range(n):
            ok = np.isfinite(dist[:, i])
            curves.append(Polyline(theta[ok], dist[ok, i]) if ok.sum() >= 2 else None)
        for i, j in pairs:
            if curves[i] is None or curves[j] is None:
                continue
            try:
                found = polyline_crossings(curves[i], curves[j])
            except DegenerateOverlap as exc:
                raise DegenerateError(f"target curves {i} and {j} coincide") from exc
            if found:
                per_pair.append((i, j, found))
    if not per_pair:
        raise NoIntersections("no pair of target curves crosses in the search range")

    if polish:
        per_pair = _polish_crossings(ms, knowns, per_pair)

    singles = [pts[0] for _, _, pts in per_pair if len(pts) == 1]
    multis = [np.array(pts) for _, _, pts in per_pair if len(pts) > 1]
    if singles:
        ref = np.median(np.array(singles), axis=0)
    else:
        ref = np.median(np.vstack(multis), axis=0)
    kept = list(singles) + [m[int(np.argmin(_point_distance(m, ref)))] for m in multis]
    kept = np.array(kept, dtype=float)
    mean = kept.mean(axis=0)
    spread = float(np.sqrt(np.mean(_point_distance(kept, mean) ** 2)))
    return Estimate(float(mean[1]), float(mean[0]), Method.CID, spread, len(kept))


def _fill_interior_gaps(theta: np.ndarray, dist: np.ndarray) -> np.ndarray:
    """Bridge isolated off-support grid points (pattern nulls) linearly.

    This is what a polyline through the finite vertices does anyway; gaps
    touching either end of the grid are left as NaN.
    """
    bad = ~np.isfinite(dist)
    if not bad.any():
        return dist
    dist = dist.copy()
    for i in np.flatnonzero(bad.any(axis=0)):
        ok = ~bad[:, i]
        if ok.sum() >= 2 and ok[0] and ok[-1]:
            dist[~ok, i] = np.interp(theta[~ok], theta[ok], dist[ok, i])
    return dist


def _polish_crossings(ms, knowns, per_pair):
    flat = [(p, k, i, j, c) for p, (i, j, cs) in enumerate(per_pair) for k, c in enumerate(cs)]
    polish = [item for item in flat if item[4].hi > item[4].lo]
    points = {(p, k): (c.theta, c.d) for p, k, _, _, c in flat}
    if polish:
        ii = np.array([it[2] for it in polish])
        jj = np.array([it[3] for it in polish])
        lo = np.array([it[4].lo for it in polish])
        hi = np.array([it[4].hi for it in polish])
        dphi = ms.delta_phi_deg
        rel = ms.rssi_dbm - _offset_db(knowns)
        scale = -1.0 / (10.0 * knowns.path_loss_n)
        pattern = knowns.tx_pattern

        def dist(t, idx):
            with np.errstate(divide="ignore", invalid="ignore"):
                g_db = 10.0 * np.log10(pattern.gain(t + dphi[idx], strict=False))
            return 10.0 ** (scale * (rel[idx] - g_db))

        roots = _illinois(lambda t: dist(t, ii) - dist(t, jj), lo, hi)
        d_root = 0.5 * (dist(roots, ii) + dist(roots, jj))
        good = np.isfinite(roots) & np.isfinite(d_root)
        for (p, k, _, _, c), t, d, g in zip(polish, roots, d_root, good):
            if g:
                points[(p, k)] = (float(t), float(d))
    out = []
    for p, (i, j, cs) in enumerate(per_pair):
        out.append((i, j, [points[(p, k)] for k in range(len(cs))]))
    return out


# -- maximum likelihood ---------------------------------------------------------------


def log_likelihood(ms: MeasurementSet, d, theta, knowns: Knowns, sigma_db: float):
    """Gaussian log-likelihood of the RSSI samples at candidate ``(d, theta)``.

    ``d`` and ``theta`` broadcast against each other; NaN where the pattern
    is undefined.
    """
    if not sigma_db > 0:
        raise ConfigError("log-likelihood needs sigma_db > 0")
    if np.any(np.asarray(d) <= 0):
        raise ConfigError("candidate distance must be > 0")
    d, theta = np.broadcast_arrays(np.asarray(d, dtype=float), np.asarray(theta, dtype=float))
    resid = ms.rssi_dbm - model_mean_rssi(knowns, d, theta, ms.delta_phi_deg)
    n = len(ms)
    out = -0.5 * n * math.log(2.0 * math.pi * sigma_db**2) - np.sum(resid**2, axis=-1) / (2.0 * sigma_db**2)
    return float(out) if out.ndim == 0 else out


def score(ms: MeasurementSet, d: float, theta: float, knowns: Knowns, sigma_db: float) -> np.ndarray:
    """Gradient of :func:`log_likelihood`: ``(d/dd, d/dtheta)``, theta per radian."""
    resid = ms.rssi_dbm - model_mean_rssi(knowns, d, theta, ms.delta_phi_deg)
    dm_dd = -10.0 * knowns.path_loss_n / (d * LN10)
    dm_dtheta = 10.0 / LN10 * knowns.tx_pattern.log_gain_slope(theta + ms.delta_phi_deg)
    return np.array([np.sum(resid * dm_dd), np.sum(resid * dm_dtheta)]) / sigma_db**2


def profile_distance(ms: MeasurementSet, knowns: Knowns, theta_deg):
    """Likelihood-maximizing distance for a fixed bearing (closed form).

    Setting the distance score to zero makes the mean residual vanish, so
    ``log10 d = -mean_i r_i(theta) / (10 n)``.
    """
    r = _log_residuals(ms, knowns, np.asarray(theta_deg, dtype=float))
    out = 10.0 ** (-r.mean(axis=-1) / (10.0 * knowns.path_loss_n))
    return float(out) if np.ndim(out) == 0 else out


def profile_log_likelihood(ms: MeasurementSet, knowns: Knowns, theta, sigma_db: float, cache: bool = False):
    """Log-likelihood maximized over distance, as a function of bearing."""
    r = _log_residuals(ms, knowns, theta, cache=cache)
    r = r - r.mean(axis=-1, keepdims=True)
    n = len(ms)
    return -0.5 * n * math.log(2.0 * math.pi * sigma_db**2) - np.sum(r**2, axis=-1) / (2.0 * sigma_db**2)


def estimate_mle(
    ms: MeasurementSet,
    knowns: Knowns,
    sigma_db: float,
    grid: GridSpec = GridSpec(),
    profile: bool = True,
    newton_polish: bool = False,
) -> Estimate:
    """Maximum-likelihood position.

    By default the search is one-dimensional: for every bearing the
    distance is set by :func:`profile_distance`.  ``profile=False`` runs
    the full two-dimensional grid search instead.  ``newton_polish``
    attempts one Newton step on the score equations and keeps it only if
    the likelihood does not drop.

    ``Estimate.score_norm`` is the largest score component divided by the
    square root of the matching Fisher information diagonal.

    Raises:
        InsufficientMeasurements: fewer than two rotations.
        DegenerateError: the likelihood does not depend on bearing.
    """
    _require_pairs(ms)
    if not sigma_db > 0:
        raise ConfigError("MLE needs sigma_db > 0")
    t_lo, t_hi = grid.theta_range

    if profile:

        def objective(theta):
            cache = theta.size == grid.coarse_steps[1]
            v = profile_log_likelihood(ms, knowns, theta, sigma_db, cache=cache)
            return np.where(np.isfinite(v), v, -np.inf)

        coarse = objective(grid.theta_grid)
        if _is_flat(coarse):
            raise DegenerateError("likelihood does not depend on bearing")
        best = maximize_1d(
            objective, t_lo, t_hi, grid.coarse_steps[1], grid.refine_iters, grid.refine_shrink, allow_infeasible=True
        )
        theta_hat, value, n_evals = best.x, best.value, best.n_evals
        theta_hat = _stationary_polish(lambda t: _profile_theta_score(ms, knowns, t), theta_hat, t_lo, t_hi)
        d_hat = profile_distance(ms, knowns, theta_hat)
    else:

        def objective2(d, theta):
            v = log_likelihood(ms, d, theta, knowns, sigma_db)
            # off-support cells lose every comparison but stay finite
            return np.where(np.isfinite(v), v, np.finfo(float).min)

        best2 = maximize_2d(objective2, grid)
        d_hat, theta_hat, value, n_evals = best2.d, best2.theta, best2.value, best2.n_evals

    if newton_polish:
        d_hat, theta_hat, value = _newton_step(ms, knowns, sigma_db, d_hat, theta_hat, value, grid)

    resid = ms.rssi_dbm - model_mean_rssi(knowns, d_hat, theta_hat, ms.delta_phi_deg)
    rms = float(np.sqrt(np.mean(resid**2)))
    return Estimate(d_hat, theta_hat, Method.MLE, rms, n_evals, _score_norm(ms, knowns, sigma_db, d_hat, theta_hat))


def _profile_theta_score(ms: MeasurementSet, knowns: Knowns, theta: np.ndarray) -> np.ndarray:
    """Bearing derivative of the profile log-likelihood, up to a positive factor.

    The distance enters only through a constant shared by every residual,
    which the centering removes exactly, so the root does not depend on d.
    """
    r = _log_residuals(ms, knowns, theta)
    slope = knowns.tx_pattern.log_gain_slope(theta[..., None] + ms.delta_phi_deg, strict=False)
    return np.sum((r - r.mean(axis=-1, keepdims=True)) * slope, axis=-1)


def _stationary_polish(grad, theta: float, lo: float, hi: float, width_deg: float = 1e-3) -> float:
    """Refine a grid maximum to the root of the objective's derivative.

    Near a smooth maximum the objective is flat to rounding error, which
    limits a comparison-based search to about the square root of machine
    precision.  The derivative crosses zero linearly, so a bracketed root
    is accurate to near machine precision.  The grid result is returned
    unchanged unless the derivative brackets a maximum within
    ``width_deg`` of it.
    """
    a, b = max(theta - width_deg, lo), min(theta + width_deg, hi)
    ends = grad(np.array([a, b]))
    if not (np.all(np.isfinite(ends)) and ends[0] > 0 > ends[1]):
        return theta
    return float(_illinois(grad, np.array([a]), np.array([b]))[0])


def _fim_entries(knowns: Knowns, d: float, theta: float, dphi: np.ndarray, sigma_db: float):
    k = 10.0 / LN10 * knowns.tx_pattern.log_gain_slope(theta + dphi)
    c = -10.0 * knowns.path_loss_n / (d * LN10)
    return len(dphi) * c**2 / sigma_db**2, c * np.sum(k) / sigma_db**2, np.sum(k**2) / sigma_db**2


def _score_norm(ms, knowns, sigma_db, d, theta) -> float:
    s = score(ms, d, theta, knowns, sigma_db)
    j11, _, j22 = _fim_entries(knowns, d, theta, ms.delta_phi_deg, sigma_db)
    scale = np.sqrt([j11, j22])
    with np.errstate(divide="ignore", invalid="ignore"):
        norm = np.where(scale > 0, np.abs(s) / scale, np.abs(s))
    return float(np.max(norm))


def _newton_step(ms, knowns, sigma_db, d, theta, value, grid):
    s = score(ms, d, theta, knowns, sigma_db)
    j11, j12, j22 = _fim_entries(knowns, d, theta, ms.delta_phi_deg, sigma_db)
    fim = np.array([[j11, j12], [j12, j22]])
    try:
        step = np.linalg.solve(fim, s)  # Fisher scoring step
    except np.linalg.LinAlgError:
        return d, theta, value
    d_new = d + step[0]
    t_new = theta + math.degrees(step[1])
    t_lo, t_hi = grid.theta_range
    if not (d_new > 0 and t_lo <= t_new <= t_hi):
        return d, theta, value
    v_new = log_likelihood(ms, d_new, t_new, knowns, sigma_db)
    if np.isfinite(v_new) and v_new >= value:
        return float(d_new), float(t_new), float(v_new)
    return d, theta, value


# -- unknown receiver gain ----------------------------------------------------------------


def gain_ratio_curve(ms: MeasurementSet) -> GainRatioCurve:
    """Linear RSSI ratios relative to the zero-rotation sample.

    The receiver gain and every other rotation-independent factor cancel.
    """
    ref = np.flatnonzero(ms.delta_phi_deg == 0.0)
    if ref.size == 0:
        raise MissingReference("measurement set has no 0 deg reference sample")
    ratio = 10.0 ** ((ms.rssi_dbm - ms.rssi_dbm[ref[0]]) / 10.0)
    return GainRatioCurve(ms.delta_phi_deg.copy(), ratio)


def similarity_objective(curve: GainRatioCurve, tx_pattern: RadiationPattern, theta, metric: str = "lsq"):
    """Score (higher is better) of each candidate bearing against the curve.

    ``"lsq"``: negative squared distance between measured and template
    log-ratios (dB).  ``"corr"``: Pearson correlation of the two.
    """
    theta = np.asarray(theta, dtype=float)
    measured = 10.0 * np.log10(curve.ratio)
    g_db = _tx_gain_db(tx_pattern, theta, np.asarray(curve.delta_phi_deg))
    with np.errstate(divide="ignore", invalid="ignore"):
        ref_db = 10.0 * np.log10(tx_pattern.gain(theta, strict=False))
    template = g_db - ref_db[..., None]
    if metric == "lsq":
        return -np.sum((measured - template) ** 2, axis=-1)
    if metric == "corr":
        m = measured - measured.mean()
        t = template - template.mean(axis=-1, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.sum(m * t, axis=-1) / np.sqrt(np.sum(m**2) * np.sum(t**2, axis=-1))
    raise ConfigError(f"unknown similarity metric {metric!r}")


def estimate_theta_similarity(
    curve: GainRatioCurve,
    tx_pattern: RadiationPattern,
    grid: GridSpec = GridSpec(),
    metric: str = "lsq",
) -> float:
    """Bearing (deg) whose normalized pattern best matches the ratio curve.

    Raises:
        DegenerateError: the template does not vary with bearing.
    """
    return _similarity_fit(curve, tx_pattern, grid, metric).x


def _similarity_fit(curve, tx_pattern, grid, metric):
    if len(curve.ratio) == 0:
        raise ConfigError("empty gain-ratio curve")

    def objective(theta):
        v = similarity_objective(curve, tx_pattern, theta, metric)
        return np.where(np.isfinite(v), v, -np.inf)

    coarse = objective(grid.theta_grid)
    if _is_flat(coarse):
        raise DegenerateError("pattern template does not depend on bearing")
    t_lo, t_hi = grid.theta_range
    best = maximize_1d(
        objective, t_lo, t_hi, grid.coarse_steps[1], grid.refine_iters, grid.refine_shrink, allow_infeasible=True
    )
    if metric != "lsq":
        return best
    theta = _stationary_polish(lambda t: _similarity_theta_score(curve, tx_pattern, t), best.x, t_lo, t_hi)
    value = float(objective(np.array(theta)))
    if not value >= best.value - 1e-12 * max(1.0, abs(best.value)):
        return best
    return Maximum1D(theta, value, best.n_evals + 1)


def _similarity_theta_score(curve: GainRatioCurve, tx_pattern: RadiationPattern, theta: np.ndarray) -> np.ndarray:
    """Bearing derivative of the least-squares similarity score, up to a positive factor."""
    dphi = np.asarray(curve.delta_phi_deg)
    measured = 10.0 * np.log10(curve.ratio)
    with np.errstate(divide="ignore", invalid="ignore"):
        template = _tx_gain_db(tx_pattern, theta, dphi) - 10.0 * np.log10(tx_pattern.gain(theta, strict=False))[..., None]
    slope = tx_pattern.log_gain_slope(theta[..., None] + dphi, strict=False)
    ref_slope = tx_pattern.log_gain_slope(theta, strict=False)[..., None]
    return np.sum((measured - template) * (slope - ref_slope), axis=-1)


def two_position_fix(theta0_deg: float, theta1_deg: float, baseline_m: float) -> tuple[float, float]:
    """Ranges from two bearings taken a known baseline apart.

    The transmitter moves ``baseline_m`` along its 0 deg axis between the
    two bearings; the law of sines on the resulting triangle gives the
    range from each position.

    Raises:
        DegenerateBaseline: the target is (nearly) collinear with the baseline.
    """
    if not baseline_m > 0:
        raise ConfigError("baseline must be > 0")
    s = math.sin(math.radians(theta1_deg - theta0_deg))
    if abs(s) < 1e-6:
        raise DegenerateBaseline("bearings are parallel: target on the baseline axis")
    d0 = math.sin(math.radians(theta1_deg)) * baseline_m / s
    d1 = math.sin(math.radians(theta0_deg)) * baseline_m / s
    return d0, d1


def moved_transmitter(scenario: Scenario, baseline_m: float) -> Scenario:
    """The same scene after backing the transmitter away from the target.

    The transmitter moves ``baseline_m`` along its 180 deg axis.  For any
    target in front of it the new bearing is smaller in magnitude than the
    old one, so both bearings stay inside the search range.  The receiver
    stays put, so its view angle of the transmitter turns by the change in
    bearing.
    """
    th = math.radians(scenario.true_theta_deg)
    x = scenario.true_d_m * math.cos(th) + baseline_m
    y = scenario.true_d_m * math.sin(th)
    d1 = math.hypot(x, y)
    theta1 = math.degrees(math.atan2(y, x))
    return scenario.with_(
        true_d_m=d1,
        true_theta_deg=theta1,
        rx_angle_deg=scenario.rx_angle_deg + (theta1 - scenario.true_theta_deg),
        name=f"{scenario.name}@moved",
    )


def locate_unknown_receiver(
    ms_first: MeasurementSet,
    ms_moved: MeasurementSet,
    tx_pattern: RadiationPattern,
    baseline_m: float,
    grid: GridSpec = GridSpec(),
    metric: str = "lsq",
) -> Estimate:
    """Similarity bearings at both transmitter positions, then triangulate.

    ``ms_moved`` is taken after the move described by
    :func:`moved_transmitter`.  Seen from the moved position, the first
    position lies ``baseline_m`` ahead along the 0 deg axis, so the fix
    runs with the two positions' roles swapped.

    ``Estimate.residual`` is the similarity misfit at the first position
    (negated objective) and ``count`` the total objective evaluations.
    """
    fit0 = _similarity_fit(gain_ratio_curve(ms_first), tx_pattern, grid, metric)
    fit1 = _similarity_fit(gain_ratio_curve(ms_moved), tx_pattern, grid, metric)
    _, d0 = two_position_fix(fit1.x, fit0.x, baseline_m)
    return Estimate(d0, fit0.x, Method.SIMILARITY, -fit0.value, fit0.n_evals + fit1.n_evals)


# -- export ----------------------------------------------------------------------------------


def write_estimates_csv(rows: Iterable[tuple[int, Estimate]], path: str | Path) -> None:
    """Write ``trial,method,d_hat_m,theta_hat_deg,residual`` rows."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["trial", "method", "d_hat_m", "theta_hat_deg", "residual"])
        for trial, est in rows:
            w.writerow([trial, est.method.value, repr(est.d_hat), repr(est.theta_hat), repr(est.residual)])
