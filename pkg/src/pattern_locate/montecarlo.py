"""Paired Monte-Carlo sweeps over SNR, rotation count or rotation step.

Every trial draws one measurement set and feeds the *same* set to every
requested estimator, so per-trial errors of different methods are paired.
Random streams are keyed, never sequential:

* true position of trial ``t``: ``(master_seed, 0, t)`` (shared by all
  axis values, so the CRLB columns and the MSEs see the same geometry);
* shadowing of trial ``t`` at axis point ``a``: ``(master_seed, 1, a, t)``;
* shadowing at the moved transmitter position (Similarity only):
  ``(master_seed, 2, a, t)``.

Because of the keying, a sweep gives identical results for any worker count
and any evaluation order.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import bounds
from .channel import DEFAULT_SIGMA_REF_DB, Scenario, make_rng, sample_measurements, snr_to_sigma, stepped_rotations
from .errors import ConfigError, PatternLocateError, SweepAborted, ZeroNoise
from .estimators import (
    Knowns,
    Method,
    estimate_cid,
    estimate_eqsolve,
    estimate_mle,
    locate_unknown_receiver,
    moved_transmitter,
)
from .plot import Series, line_chart_svg
from .solver import GridSpec

_STREAM_POSITION = 0
_STREAM_NOISE = 1
_STREAM_MOVED = 2

# sigma handed to the MLE when the scenario is noiseless; the argmax does not
# depend on it
_NOISELESS_MLE_SIGMA = 1.0

CSV_COLUMNS = [
    "axis_value",
    "method",
    "mse_d_m2",
    "se_mse_d",
    "mse_theta_deg2",
    "se_mse_theta",
    "bias_d_m",
    "crlb_d_m2",
    "crlb_theta_deg2",
    "fail_rate",
]


class SweepAxis(str, enum.Enum):
    SNR = "snr"
    ROTATION_COUNT = "rotation_count"
    DELTA_PHI = "delta_phi"


@dataclass(frozen=True)
class SweepConfig:
    """One sweep: a base scenario, the varied quantity and the trial budget.

    Attributes:
        base_scenario: Everything not varied by the axis.  Its ``sigma_db``
            is used on the rotation-count and step axes.
        axis: Which quantity ``axis_values`` sets.
        axis_values: SNR in dB, rotation counts, or rotation steps in deg.
        trials: Measurement sets per axis point.
        methods: Estimators to run on every set.
        master_seed: Root of every random stream.
        sigma_ref_db: Shadowing deviation at 0 dB SNR.
        position_mode: ``"averaged"`` samples a fresh true position per
            trial; ``"fixed"`` uses the base scenario's position throughout.
        d_range: Distance range (m) for sampled positions.
        theta_range: Bearing range (deg) for sampled positions.
        baseline_m: Transmitter displacement for the Similarity pipeline.
        grid: Search box and refinement schedule of the estimators.
    """

    base_scenario: Scenario
    axis: SweepAxis
    axis_values: tuple[float, ...]
    trials: int = 2000
    methods: tuple[Method, ...] = (Method.EQSOLVE, Method.CID, Method.MLE)
    master_seed: int = 0
    sigma_ref_db: float = DEFAULT_SIGMA_REF_DB
    position_mode: str = "averaged"
    d_range: tuple[float, float] = (0.5, 5.0)
    theta_range: tuple[float, float] = (-70.0, 70.0)
    baseline_m: float = 0.5
    grid: GridSpec = field(default_factory=GridSpec)

    def __post_init__(self):
        object.__setattr__(self, "axis", SweepAxis(self.axis))
        object.__setattr__(self, "axis_values", tuple(float(v) for v in self.axis_values))
        object.__setattr__(self, "methods", tuple(Method(m) for m in self.methods))
        vals = self.axis_values
        if not vals:
            raise ConfigError("axis_values must not be empty")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ConfigError("axis_values must be strictly increasing")
        if not all(math.isfinite(v) for v in vals):
            raise ConfigError("axis_values must be finite")
        if self.axis is SweepAxis.ROTATION_COUNT and any(v != int(v) or v < 2 for v in vals):
            raise ConfigError("rotation counts must be integers >= 2")
        if self.axis is SweepAxis.DELTA_PHI and any(v <= 0 for v in vals):
            raise ConfigError("rotation steps must be > 0 deg")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not self.methods or len(set(self.methods)) != len(self.methods):
            raise ConfigError("methods must be a non-empty list without repeats")
        if self.position_mode not in ("averaged", "fixed"):
            raise ConfigError("position_mode must be 'averaged' or 'fixed'")
        for name, (lo, hi) in (("d_range", self.d_range), ("theta_range", self.theta_range)):
            if not lo < hi:
                raise ConfigError(f"{name} needs min < max")
        if self.d_range[0] <= 0:
            raise ConfigError("d_range must be positive")
        if self.n_base_rotations < 2 and self.axis is not SweepAxis.ROTATION_COUNT:
            raise ConfigError("base scenario needs at least 2 rotations")

    @property
    def n_base_rotations(self) -> int:
        return self.base_scenario.n_rotations

    @property
    def base_step_deg(self) -> float:
        rot = self.base_scenario.rotations_deg
        return rot[1] - rot[0] if len(rot) > 1 else 4.0

    def scenario_at(self, axis_value: float) -> Scenario:
        """Base scenario with the axis quantity set to ``axis_value``."""
        base = self.base_scenario
        if self.axis is SweepAxis.SNR:
            return base.with_(sigma_db=snr_to_sigma(axis_value, self.sigma_ref_db))
        if self.axis is SweepAxis.ROTATION_COUNT:
            return base.with_(rotations_deg=stepped_rotations(int(axis_value), self.base_step_deg))
        return base.with_(rotations_deg=stepped_rotations(self.n_base_rotations, axis_value))


def true_position_sampler(
    range_d: tuple[float, float] = (0.5, 5.0),
    range_theta: tuple[float, float] = (-70.0, 70.0),
    count: int = 1,
    seed=0,
) -> list[tuple[float, float]]:
    """Independent uniform ``(d0 [m], theta0 [deg])`` draws."""
    if count < 0:
        raise ConfigError("count must be >= 0")
    rng = make_rng(seed)
    d = rng.uniform(range_d[0], range_d[1], count)
    theta = rng.uniform(range_theta[0], range_theta[1], count)
    return list(zip(d.tolist(), theta.tolist()))


def trial_position(config: SweepConfig, trial: int) -> tuple[float, float]:
    if config.position_mode == "fixed":
        return config.base_scenario.true_d_m, config.base_scenario.true_theta_deg
    return true_position_sampler(config.d_range, config.theta_range, 1, (config.master_seed, _STREAM_POSITION, trial))[0]


# -- per-trial work --------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PointRecords:
    """Raw per-trial outcomes at one axis point.

    Arrays are indexed ``[method, trial]``; failed trials hold NaN estimates.
    ``checksums[m][t]`` is the checksum of the measurement set method ``m``
    saw in trial ``t``.
    """

    axis_value: float
    methods: tuple[Method, ...]
    true_d: np.ndarray
    true_theta: np.ndarray
    d_hat: np.ndarray
    theta_hat: np.ndarray
    failed: np.ndarray
    checksums: tuple[tuple[str, ...], ...]


def _run_method(method: Method, ms, scenario: Scenario, knowns: Knowns, config: SweepConfig, moved_ms):
    grid = config.grid
    if method is Method.EQSOLVE:
        return estimate_eqsolve(ms, knowns, grid)
    if method is Method.CID:
        return estimate_cid(ms, knowns)
    if method is Method.MLE:
        sigma = scenario.sigma_db if scenario.sigma_db > 0 else _NOISELESS_MLE_SIGMA
        return estimate_mle(ms, knowns, sigma, grid)
    return locate_unknown_receiver(ms, moved_ms, scenario.tx_pattern, config.baseline_m, grid)


def _run_block(config: SweepConfig, axis_index: int, trials: range):
    """Run trials ``trials`` at one axis point; returns plain arrays."""
    scenario_a = config.scenario_at(config.axis_values[axis_index])
    n_m = len(config.methods)
    out_d = np.full((n_m, len(trials)), np.nan)
    out_t = np.full((n_m, len(trials)), np.nan)
    failed = np.zeros((n_m, len(trials)), dtype=bool)
    true_d = np.empty(len(trials))
    true_t = np.empty(len(trials))
    sums: list[list[str]] = [[] for _ in range(n_m)]
    for k, t in enumerate(trials):
        d0, th0 = trial_position(config, t)
        scenario = scenario_a.with_(true_d_m=d0, true_theta_deg=th0)
        true_d[k], true_t[k] = d0, th0
        ms = sample_measurements(scenario, (config.master_seed, _STREAM_NOISE, axis_index, t))
        moved_ms = None
        if Method.SIMILARITY in config.methods:
            moved = moved_transmitter(scenario, config.baseline_m)
            moved_ms = sample_measurements(moved, (config.master_seed, _STREAM_MOVED, axis_index, t))
        knowns = Knowns.from_scenario(scenario)
        for m, method in enumerate(config.methods):
            sums[m].append(ms.checksum())
            try:
                est = _run_method(method, ms, scenario, knowns, config, moved_ms)
            except PatternLocateError:
                failed[m, k] = True
                continue
            out_d[m, k], out_t[m, k] = est.d_hat, est.theta_hat
    return axis_index, trials.start, true_d, true_t, out_d, out_t, failed, sums


def _chunks(trials: int, size: int) -> list[range]:
    return [range(s, min(s + size, trials)) for s in range(0, trials, size)]


def collect_records(config: SweepConfig, jobs: int = 1, chunk: int = 250) -> list[PointRecords]:
    """Run every trial of the sweep and gather per-trial outcomes in index order."""
    tasks = [(a, r) for a in range(len(config.axis_values)) for r in _chunks(config.trials, chunk)]
    if jobs <= 1 or len(tasks) == 1:
        parts = [_run_block(config, a, r) for a, r in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_run_block, [config] * len(tasks), [a for a, _ in tasks], [r for _, r in tasks]))
    parts.sort(key=lambda p: (p[0], p[1]))
    records = []
    for a, value in enumerate(config.axis_values):
        mine = [p for p in parts if p[0] == a]
        sums = tuple(tuple(s for p in mine for s in p[7][m]) for m in range(len(config.methods)))
        records.append(
            PointRecords(
                axis_value=value,
                methods=config.methods,
                true_d=np.concatenate([p[2] for p in mine]),
                true_theta=np.concatenate([p[3] for p in mine]),
                d_hat=np.concatenate([p[4] for p in mine], axis=1),
                theta_hat=np.concatenate([p[5] for p in mine], axis=1),
                failed=np.concatenate([p[6] for p in mine], axis=1),
                checksums=sums,
            )
        )
    return records


# -- aggregation ----------------------------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    axis_value: float
    method: Method
    mse_d_m2: float
    se_mse_d: float
    mse_theta_deg2: float
    se_mse_theta: float
    bias_d_m: float
    crlb_d_m2: float
    crlb_theta_deg2: float
    fail_rate: float
    n_ok: int


@dataclass(frozen=True, eq=False)
class SweepResult:
    """Aggregated sweep plus the raw records it came from.

    ``g_variance[a]`` is the median pattern-slope variance over the trial
    positions at axis point ``a``; it is the natural abscissa of a
    rotation-step sweep.  The median is used because ``G'/G`` is unbounded
    near a pattern null, so a few positions would dominate a mean.
    """

    config: SweepConfig
    rows: tuple[SweepRow, ...]
    g_variance: tuple[float, ...]
    records: tuple[PointRecords, ...]

    def row(self, axis_value: float, method: Method | str) -> SweepRow:
        method = Method(method)
        for r in self.rows:
            if r.axis_value == axis_value and r.method is method:
                return r
        raise KeyError((axis_value, method))

    def column(self, method: Method | str, name: str) -> np.ndarray:
        method = Method(method)
        return np.array([getattr(r, name) for r in self.rows if r.method is method])

    def squared_errors(self, axis_index: int, method: Method | str) -> tuple[np.ndarray, np.ndarray]:
        """Per-trial ``(d error^2 [m^2], theta error^2 [deg^2])``, NaN where failed."""
        rec = self.records[axis_index]
        m = rec.methods.index(Method(method))
        return (rec.d_hat[m] - rec.true_d) ** 2, (rec.theta_hat[m] - rec.true_theta) ** 2

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow(
                [
                    repr(r.axis_value),
                    r.method.value,
                    repr(r.mse_d_m2),
                    repr(r.se_mse_d),
                    repr(r.mse_theta_deg2),
                    repr(r.se_mse_theta),
                    repr(r.bias_d_m),
                    repr(r.crlb_d_m2),
                    repr(r.crlb_theta_deg2),
                    repr(r.fail_rate),
                ]
            )
        return buf.getvalue()

    def write_csv(self, path: str | Path) -> None:
        Path(path).write_text(self.to_csv())


def _mse_se(sq: np.ndarray) -> tuple[float, float]:
    if len(sq) == 0:
        return math.nan, math.nan
    se = float(np.std(sq, ddof=1) / math.sqrt(len(sq))) if len(sq) > 1 else math.nan
    return float(np.mean(sq)), se


def _bound_columns(scenario: Scenario, rec: PointRecords) -> tuple[float, float, float]:
    """Position-averaged biased CRLB (d, theta deg^2) and median g_variance."""
    crlb_d, crlb_t, g_var = [], [], []
    for d0, th0 in zip(rec.true_d, rec.true_theta):
        sc = scenario.with_(true_d_m=float(d0), true_theta_deg=float(th0))
        g_var.append(bounds.g_variance(sc))
        try:
            m = bounds.crlb_biased(sc)
        except (ZeroNoise, ArithmeticError):
            crlb_d.append(math.nan)
            crlb_t.append(math.nan)
            continue
        crlb_d.append(m[0, 0])
        crlb_t.append(m[1, 1] * bounds.RAD2_TO_DEG2)
    return float(np.mean(crlb_d)), float(np.mean(crlb_t)), float(np.median(g_var))


def aggregate(config: SweepConfig, records: Sequence[PointRecords]) -> SweepResult:
    """Turn raw records into MSE rows.

    Raises:
        SweepAborted: more than half the trials of some method failed at
            some axis point.
    """
    rows = []
    g_vars = []
    for rec in records:
        scenario = config.scenario_at(rec.axis_value)
        crlb_d, crlb_t, g_var = _bound_columns(scenario, rec)
        g_vars.append(g_var)
        for m, method in enumerate(rec.methods):
            ok = ~rec.failed[m]
            fail_rate = float(1.0 - ok.mean())
            if fail_rate > 0.5:
                raise SweepAborted(
                    f"{method.value}: {fail_rate:.0%} of trials failed at axis value {rec.axis_value:g}"
                )
            err_d = rec.d_hat[m, ok] - rec.true_d[ok]
            err_t = rec.theta_hat[m, ok] - rec.true_theta[ok]
            mse_d, se_d = _mse_se(err_d**2)
            mse_t, se_t = _mse_se(err_t**2)
            bias_d = float(np.mean(err_d)) if len(err_d) else math.nan
            rows.append(
                SweepRow(rec.axis_value, method, mse_d, se_d, mse_t, se_t, bias_d, crlb_d, crlb_t, fail_rate, int(ok.sum()))
            )
    return SweepResult(config, tuple(rows), tuple(g_vars), tuple(records))


def run_sweep(config: SweepConfig, jobs: int = 1) -> SweepResult:
    """Run and aggregate a sweep; ``jobs`` worker processes (1 = in-process)."""
    return aggregate(config, collect_records(config, jobs=jobs))


def paired_difference(result: SweepResult, axis_index: int, a: Method | str, b: Method | str, coord: str):
    """Mean and standard error of ``sq_err(a) - sq_err(b)`` over trials where both succeeded.

    ``coord`` is ``"d"`` or ``"theta"``.
    """
    ea = result.squared_errors(axis_index, a)[0 if coord == "d" else 1]
    eb = result.squared_errors(axis_index, b)[0 if coord == "d" else 1]
    ok = np.isfinite(ea) & np.isfinite(eb)
    diff = ea[ok] - eb[ok]
    return _mse_se(diff)


_AXIS_LABELS = {
    SweepAxis.SNR: "SNR (dB)",
    SweepAxis.ROTATION_COUNT: "rotation count N",
    SweepAxis.DELTA_PHI: "variance of G'/G (1/rad^2)",
}


def sweep_svg(result: SweepResult) -> str:
    """MSE and CRLB against the sweep axis, log y; distance and bearing panels.

    A rotation-step sweep is plotted against the pattern-slope variance
    rather than the step itself.
    """
    cfg = result.config
    x = list(result.g_variance) if cfg.axis is SweepAxis.DELTA_PHI else list(cfg.axis_values)
    d_series, t_series = [], []
    for method in cfg.methods:
        d_series.append(Series(method.value, x, list(result.column(method, "mse_d_m2"))))
        t_series.append(Series(method.value, x, list(result.column(method, "mse_theta_deg2"))))
    first = cfg.methods[0]
    d_series.append(Series("CRLB", x, list(result.column(first, "crlb_d_m2")), dashed=True))
    t_series.append(Series("CRLB", x, list(result.column(first, "crlb_theta_deg2")), dashed=True))
    return line_chart_svg(
        [("distance", d_series), ("bearing", t_series)],
        _AXIS_LABELS[cfg.axis],
        ["MSE (m^2)", "MSE (deg^2)"],
    )
