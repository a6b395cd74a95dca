"""Acceptance suite: one PASS/FAIL line per criterion.

Criteria 4 to 7 and 10 share three full preset sweeps (2000 trials each),
computed once per session.  The whole module takes several minutes on a
single core; deselect it with ``-m "not acceptance"`` for quick runs.
"""

import math
import time
from pathlib import Path

import numpy as np
import pytest
from oracles import mc_negative_hessian

from pattern_locate import bounds
from pattern_locate.channel import Scenario, sample_measurements, snr_to_sigma, stepped_rotations
from pattern_locate.cli import main
from pattern_locate.config import load_config
from pattern_locate.estimators import (
    Knowns,
    Method,
    estimate_cid,
    estimate_eqsolve,
    estimate_mle,
    locate_unknown_receiver,
    moved_transmitter,
    profile_distance,
)
from pattern_locate.montecarlo import paired_difference, run_sweep, true_position_sampler
from pattern_locate.patterns import omnidirectional

pytestmark = pytest.mark.acceptance

PRESETS = Path(__file__).resolve().parent.parent / "presets"
LN10 = math.log(10.0)

# tolerances pinned by the acceptance criteria
NOISELESS_D_TOL_M = 1e-3
NOISELESS_THETA_TOL_DEG = 1e-2
NOISELESS_BUDGET_S = 30.0
BIAS_TRIALS = 100_000
BIAS_REL_TOL = 1e-3
BIAS_BUDGET_S = 60.0
CLOSED_FORM_REL_TOL = 1e-10
HESSIAN_TRIALS = 100_000
HESSIAN_REL_TOL = 0.02
MARGIN_SE = 2.0
CRLB_FACTOR = 2.0
CRLB_BELOW_SE = 3.0
THETA_INDEPENDENCE_TOL_DEG = 1e-6
CRLB_INDEPENDENCE_REL = 1e-12
BASELINE_M = 0.5
RX_GAIN_SCALE = 1e3
METHODS = (Method.EQSOLVE, Method.CID, Method.MLE)


@pytest.fixture(scope="module")
def sweeps(tmp_path_factory):
    """Full preset sweeps, each also written as CSV for the rerun check."""
    out = {}
    for name in ("fig2", "fig3", "fig4"):
        cfg = load_config(PRESETS / f"{name}.toml")
        start = time.perf_counter()
        result = run_sweep(cfg.sweep(), jobs=1)
        out[name] = (result, time.perf_counter() - start)
    return out


def decreasing_within(values, ses, k_se=MARGIN_SE):
    """Steps where ``values`` rises by more than ``k_se`` combined standard errors."""
    bad = []
    for i in range(len(values) - 1):
        tol = k_se * math.hypot(ses[i], ses[i + 1])
        if not values[i + 1] - values[i] < tol:
            bad.append(i)
    return bad


# -- 1 --------------------------------------------------------------------------


def test_criterion_01_noiseless_exactness(acceptance_report):
    positions = true_position_sampler((0.5, 5.0), (-70.0, 70.0), 50, seed=101)
    worst_d = worst_t = 0.0
    start = time.perf_counter()
    for d0, th0 in positions:
        sc = Scenario(true_d_m=d0, true_theta_deg=th0, sigma_db=0.0, rotations_deg=stepped_rotations(8, 4.0))
        ms = sample_measurements(sc, 0)
        kn = Knowns.from_scenario(sc)
        for est in (estimate_eqsolve(ms, kn), estimate_cid(ms, kn), estimate_mle(ms, kn, 1.0)):
            worst_d = max(worst_d, abs(est.d_hat - d0))
            worst_t = max(worst_t, abs(est.theta_hat - th0))
    elapsed = time.perf_counter() - start
    ok = worst_d < NOISELESS_D_TOL_M and worst_t < NOISELESS_THETA_TOL_DEG and elapsed < NOISELESS_BUDGET_S
    acceptance_report(
        1,
        "noiseless exactness",
        ok,
        f"max |d err| {worst_d:.2e} m, max |theta err| {worst_t:.2e} deg, {elapsed:.1f} s",
    )


# -- 2 --------------------------------------------------------------------------


def test_criterion_02_distance_bias(acceptance_report):
    sc = Scenario(sigma_db=2.0, path_loss_n=4.0, rotations_deg=stepped_rotations(8, 4.0))
    kn = Knowns.from_scenario(sc)
    start = time.perf_counter()
    est = np.array([profile_distance(sample_measurements(sc, (202, t)), kn, sc.true_theta_deg) for t in range(BIAS_TRIALS)])
    elapsed = time.perf_counter() - start
    expect = sc.true_d_m * 10 ** (sc.sigma_db**2 * LN10 / (200 * 16 * 8))
    rel = abs(est.mean() / expect - 1)
    se = est.std(ddof=1) / math.sqrt(BIAS_TRIALS) / expect
    ok = rel < BIAS_REL_TOL and elapsed < BIAS_BUDGET_S
    acceptance_report(
        2,
        "distance-bias closed form",
        ok,
        f"mean {est.mean():.6f} vs {expect:.6f} m, rel err {rel:.2e} (SE {se:.1e}), {elapsed:.1f} s",
    )


# -- 3 --------------------------------------------------------------------------


def test_criterion_03_crlb_closed_form(acceptance_report):
    worst = 0.0
    count = 0
    for d in (0.5, 1.25, 2.5, 3.75, 5.0):
        for theta in (-60.0, -25.0, 0.0, 30.0, 55.0):
            for sigma in (0.5, 2.0):
                for step in (2.0, 4.0):
                    sc = Scenario(
                        true_d_m=d, true_theta_deg=theta, sigma_db=sigma, rotations_deg=stepped_rotations(8, step)
                    )
                    closed = bounds.crlb_unbiased(sc).matrix()
                    explicit = np.linalg.inv(bounds.fim(sc))
                    worst = max(worst, float(np.max(np.abs(closed - explicit) / np.abs(explicit))))
                    count += 1
    sc = Scenario(sigma_db=2.0)
    mc = mc_negative_hessian(sc, HESSIAN_TRIALS, seed=303)
    j = bounds.fim(sc)
    hess_rel = float(np.max(np.abs(mc - j) / np.abs(j)))
    ok = count == 100 and worst < CLOSED_FORM_REL_TOL and hess_rel < HESSIAN_REL_TOL
    acceptance_report(
        3,
        "CRLB closed form vs numeric FIM",
        ok,
        f"{count} lattice points, max rel diff {worst:.1e}; MC Hessian max rel diff {hess_rel:.2%}",
    )


# -- 4 and 5 ----------------------------------------------------------------------


def test_criterion_04_estimator_ordering(sweeps, acceptance_report):
    result, elapsed = sweeps["fig2"]
    failures = []
    for a, snr in enumerate(result.config.axis_values):
        for coord in ("d", "theta"):
            for worse, better in ((Method.EQSOLVE, Method.CID), (Method.CID, Method.MLE)):
                mean, se = paired_difference(result, a, worse, better, coord)
                if not mean > MARGIN_SE * se:
                    failures.append(f"{better.value}<{worse.value} {coord}@{snr:g}dB ({mean:.3g}+-{se:.2g})")
    for method in METHODS:
        for coord, col, se_col in (("d", "mse_d_m2", "se_mse_d"), ("theta", "mse_theta_deg2", "se_mse_theta")):
            bad = decreasing_within(result.column(method, col), result.column(method, se_col))
            failures += [f"{method.value} {coord} rises after {result.config.axis_values[i]:g}dB" for i in bad]
    detail = "all orderings and trends hold" if not failures else "; ".join(failures)
    acceptance_report(4, "estimator ordering over SNR", not failures, f"{detail} ({elapsed:.0f} s sweep)")


def test_criterion_05_mle_near_crlb(sweeps, acceptance_report):
    result, _ = sweeps["fig2"]
    parts, ok = [], True
    for snr in result.config.axis_values:
        if snr < 10:
            continue
        row = result.row(snr, Method.MLE)
        ratio = row.mse_theta_deg2 / row.crlb_theta_deg2
        below = (row.crlb_theta_deg2 - row.mse_theta_deg2) / row.se_mse_theta
        good = 1 / CRLB_FACTOR <= ratio <= CRLB_FACTOR and below <= CRLB_BELOW_SE
        ok &= good
        parts.append(f"{snr:g}dB ratio {ratio:.2f}, {max(below, 0):.1f} SE below bound")
    acceptance_report(5, "MLE near CRLB", ok, "; ".join(parts))


# -- 6 ----------------------------------------------------------------------------


def test_criterion_06_rotation_count_sweep(sweeps, acceptance_report):
    result, elapsed = sweeps["fig3"]
    values = result.config.axis_values
    failures = []
    for method in METHODS:
        for coord, col, se_col in (("d", "mse_d_m2", "se_mse_d"), ("theta", "mse_theta_deg2", "se_mse_theta")):
            bad = decreasing_within(result.column(method, col), result.column(method, se_col))
            failures += [f"{method.value} {coord} N={values[i]:g}->{values[i + 1]:g}" for i in bad]
    for col in ("crlb_d_m2", "crlb_theta_deg2"):
        bound = result.column(Method.MLE, col)
        failures += [f"{col} N={values[i]:g}" for i in range(len(bound) - 1) if not bound[i + 1] < bound[i]]
    detail = "all MSE and CRLB columns decrease" if not failures else "rises: " + ", ".join(failures)
    acceptance_report(6, "rotation-count sweep", not failures, f"{detail} ({elapsed:.0f} s sweep)")


# -- 7 ----------------------------------------------------------------------------


def test_criterion_07_slope_variance_sweep(sweeps, acceptance_report):
    result, elapsed = sweeps["fig4"]
    order = np.argsort(result.g_variance)
    values = np.array(result.config.axis_values)[order]
    failures = []
    for method in METHODS:
        for coord, col, se_col in (("d", "mse_d_m2", "se_mse_d"), ("theta", "mse_theta_deg2", "se_mse_theta")):
            mse = result.column(method, col)[order]
            se = result.column(method, se_col)[order]
            bad = decreasing_within(mse, se)
            failures += [f"{method.value} {coord} step {values[i]:g}->{values[i + 1]:g}" for i in bad]
    detail = "MSE falls as g_variance grows" if not failures else "rises: " + ", ".join(failures)
    acceptance_report(7, "slope-variance sweep", not failures, f"{detail} ({elapsed:.0f} s sweep)")


# -- 8 ----------------------------------------------------------------------------


def test_criterion_08_theta_independent_of_distance(acceptance_report):
    sigma = snr_to_sigma(10.0)
    thetas, crlbs = [], []
    for d in (1.0, 2.0, 4.0):
        sc = Scenario(true_d_m=d, sigma_db=sigma)
        kn = Knowns.from_scenario(sc)
        thetas.append([estimate_mle(sample_measurements(sc, (808, t)), kn, sigma).theta_hat for t in range(200)])
        crlbs.append(bounds.crlb_unbiased(sc).var_theta_rad2)
    spread = float(np.max(np.ptp(np.array(thetas), axis=0)))
    crlb_rel = float(np.ptp(crlbs) / np.mean(crlbs))
    ok = spread < THETA_INDEPENDENCE_TOL_DEG and crlb_rel < CRLB_INDEPENDENCE_REL
    acceptance_report(
        8,
        "bearing estimate independent of distance",
        ok,
        f"200 trials, max theta spread {spread:.1e} deg, crlb_theta rel spread {crlb_rel:.1e}",
    )


# -- 9 ----------------------------------------------------------------------------


def test_criterion_09_unknown_receiver_pipeline(acceptance_report):
    positions = true_position_sampler((0.5, 5.0), (-70.0, 70.0), 20, seed=909)
    worst_d = worst_t = 0.0
    worst_gain = 0.0
    for i, (d0, th0) in enumerate(positions):
        sc = Scenario(true_d_m=d0, true_theta_deg=th0, sigma_db=0.0)
        moved = moved_transmitter(sc, BASELINE_M)
        est = locate_unknown_receiver(
            sample_measurements(sc, 0), sample_measurements(moved, 0), sc.tx_pattern, BASELINE_M
        )
        worst_d = max(worst_d, abs(est.d_hat - d0))
        worst_t = max(worst_t, abs(est.theta_hat - th0))
        outs = []
        for g in (1.0, RX_GAIN_SCALE):
            noisy = sc.with_(sigma_db=2.0, rx_pattern=omnidirectional(g))
            m2 = moved_transmitter(noisy, BASELINE_M)
            e = locate_unknown_receiver(
                sample_measurements(noisy, (909, i)), sample_measurements(m2, (909, i, 1)), sc.tx_pattern, BASELINE_M
            )
            outs.append(np.array([e.d_hat, e.theta_hat]))
        worst_gain = max(worst_gain, float(np.max(np.abs(outs[0] - outs[1]))))
    ok = worst_d < NOISELESS_D_TOL_M and worst_t < NOISELESS_THETA_TOL_DEG and worst_gain < 1e-9
    acceptance_report(
        9,
        "unknown-receiver pipeline",
        ok,
        f"max |d err| {worst_d:.1e} m, max |theta err| {worst_t:.1e} deg, "
        f"G_R x1e3 changes output by <= {worst_gain:.1e}",
    )


# -- 10 ---------------------------------------------------------------------------


def test_criterion_10_preset_determinism(sweeps, tmp_path, acceptance_report):
    mismatched = []
    for name in ("fig2", "fig3", "fig4"):
        out = tmp_path / name
        code = main(["sweep", "-c", str(PRESETS / f"{name}.toml"), "-o", str(out), "-j", "1"])
        rerun = (out / "sweep.csv").read_bytes() if code == 0 else b""
        if rerun != sweeps[name][0].to_csv().encode():
            mismatched.append(name)
    detail = "all three presets byte-identical on rerun" if not mismatched else "differ: " + ", ".join(mismatched)
    acceptance_report(10, "preset determinism", not mismatched, detail)
