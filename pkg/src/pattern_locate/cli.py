"""``pattern-locate`` command line.

Subcommands:

* ``simulate``: draw measurement sets for a scenario file;
* ``estimate``: run one estimator on a measurement CSV;
* ``sweep``: paired Monte-Carlo sweep, CSV plus optional SVG;
* ``crlb``: bound table over SNR;
* ``patterns``: tabulate the transmitter and receiver patterns.

Exit codes: 0 success, 2 configuration or usage error, 3 estimation error.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import bounds
from .channel import read_measurements_csv, sample_measurements, snr_to_sigma, write_measurements_csv
from .config import RunConfig, keys_help, load_config, parse_value
from .errors import ConfigError, NonPositiveGain, PatternLocateError
from .estimators import (
    Knowns,
    Method,
    estimate_cid,
    estimate_eqsolve,
    estimate_mle,
    locate_unknown_receiver,
    moved_transmitter,
    write_estimates_csv,
)
from .montecarlo import run_sweep, sweep_svg
from .plot import Series, line_chart_svg

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
SEED_ENV = "PATTERN_LOCATE_SEED"


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", "-c", type=Path, help="scenario file (flat TOML); defaults if omitted")
    p.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override one config key (repeatable)",
    )
    p.add_argument("--seed", type=int, help=f"master seed; beats ${SEED_ENV} and the config")
    p.add_argument("--out", "-o", type=Path, default=Path("."), help="output directory (default: .)")


def build_parser() -> argparse.ArgumentParser:
    epilog = keys_help()
    fmt = argparse.RawDescriptionHelpFormatter
    parser = argparse.ArgumentParser(prog="pattern-locate", description=__doc__, formatter_class=fmt, epilog=epilog)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write measurements.csv", formatter_class=fmt, epilog=epilog)
    _common(p)
    p.add_argument(
        "--moved",
        action="store_true",
        help="also write measurements_moved.csv, taken after backing the transmitter away by baseline_m",
    )

    p = sub.add_parser("estimate", help="estimate position from a measurement CSV", formatter_class=fmt, epilog=epilog)
    _common(p)
    p.add_argument("measurements", type=Path, help="index,delta_phi_deg,rssi_dbm CSV")
    p.add_argument("--method", "-m", choices=[m.value for m in Method], default="mle")
    p.add_argument("--moved", type=Path, help="second-position CSV for method similarity")

    p = sub.add_parser("sweep", help="Monte-Carlo sweep to sweep.csv", formatter_class=fmt, epilog=epilog)
    _common(p)
    p.add_argument("--trials", type=int, help="override the trial count")
    p.add_argument("--jobs", "-j", type=int, default=os.cpu_count() or 1, help="worker processes")
    p.add_argument("--plot", action="store_true", help="also write sweep.svg")

    p = sub.add_parser("crlb", help="bound table over crlb_snr_db to crlb.csv", formatter_class=fmt, epilog=epilog)
    _common(p)

    p = sub.add_parser("patterns", help="tabulate gains to patterns.csv", formatter_class=fmt, epilog=epilog)
    _common(p)
    p.add_argument("--step-deg", type=float, default=1.0, help="angular step of the table (deg)")
    p.add_argument("--plot", action="store_true", help="also write patterns.svg")
    return parser


def _parse_overrides(items: list[str]) -> dict:
    out = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        out[key.strip()] = parse_value(value.strip())
    return out


def _resolve_config(args) -> RunConfig:
    cfg = load_config(args.config, _parse_overrides(args.overrides))
    if args.seed is not None:
        return cfg.with_seed(args.seed)
    env = os.environ.get(SEED_ENV)
    if env is not None:
        try:
            return cfg.with_seed(int(env))
        except ValueError:
            raise ConfigError(f"{SEED_ENV} must be an integer, got {env!r}") from None
    return cfg


def _out_dir(args) -> Path:
    args.out.mkdir(parents=True, exist_ok=True)
    return args.out


def cmd_simulate(args, cfg: RunConfig) -> int:
    scenario = cfg.scenario()
    out = _out_dir(args)
    ms = sample_measurements(scenario, cfg["seed"])
    write_measurements_csv(ms, out / "measurements.csv")
    print(f"wrote {out / 'measurements.csv'} ({len(ms)} samples, sigma {scenario.sigma_db:g} dB)")
    if args.moved:
        moved = moved_transmitter(scenario, cfg["baseline_m"])
        ms2 = sample_measurements(moved, (cfg["seed"], 1))
        write_measurements_csv(ms2, out / "measurements_moved.csv")
        print(f"wrote {out / 'measurements_moved.csv'}")
    return EXIT_OK


def _read_csv(path: Path):
    try:
        return read_measurements_csv(path)
    except ConfigError:
        raise
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"{path}: malformed measurement row ({exc})") from None


def cmd_estimate(args, cfg: RunConfig) -> int:
    method = Method(args.method)
    if not args.measurements.exists():
        raise ConfigError(f"measurement file not found: {args.measurements}")
    ms = _read_csv(args.measurements)
    scenario = cfg.scenario()
    knowns = Knowns.from_scenario(scenario)
    grid = cfg.grid()
    if method is Method.MLE and not cfg.sigma_given:
        raise ConfigError("method mle needs sigma_db or snr_db in the config")
    if method is Method.SIMILARITY:
        if cfg["known_receiver"]:
            print("warning: similarity ignores the known receiver gain", file=sys.stderr)
        moved_path = args.moved or args.measurements.with_name(args.measurements.stem + "_moved.csv")
        if not moved_path.exists():
            raise ConfigError(f"similarity needs a second-position CSV; not found: {moved_path}")
        ms2 = _read_csv(moved_path)
        est = locate_unknown_receiver(
            ms, ms2, scenario.tx_pattern, cfg["baseline_m"], grid, cfg["similarity_metric"]
        )
    elif method is Method.EQSOLVE:
        est = estimate_eqsolve(ms, knowns, grid)
    elif method is Method.CID:
        est = estimate_cid(ms, knowns)
    else:
        est = estimate_mle(ms, knowns, cfg.sigma_db, grid)
    out = _out_dir(args)
    write_estimates_csv([(1, est)], out / "estimate.csv")
    print(f"method    {est.method.value}")
    print(f"d_hat     {est.d_hat:.6f} m")
    print(f"theta_hat {est.theta_hat:.6f} deg")
    print(f"residual  {est.residual:.6g}")
    return EXIT_OK


def cmd_sweep(args, cfg: RunConfig) -> int:
    if args.trials is not None and args.trials < 1:
        raise ConfigError("--trials must be >= 1")
    if args.jobs < 1:
        raise ConfigError("--jobs must be >= 1")
    sweep = cfg.sweep(trials=args.trials)
    result = run_sweep(sweep, jobs=args.jobs)
    out = _out_dir(args)
    result.write_csv(out / "sweep.csv")
    print(result.to_csv(), end="")
    print(f"wrote {out / 'sweep.csv'}")
    if args.plot:
        (out / "sweep.svg").write_text(sweep_svg(result))
        print(f"wrote {out / 'sweep.svg'}")
    return EXIT_OK


def cmd_crlb(args, cfg: RunConfig) -> int:
    scenario = cfg.scenario()
    rows = []
    for snr in cfg["crlb_snr_db"]:
        if isinstance(snr, bool) or not isinstance(snr, (int, float)):
            raise ConfigError("crlb_snr_db: expected a list of numbers")
        sigma = snr_to_sigma(float(snr), cfg["sigma_ref_db"])
        rep = bounds.crlb_report(scenario.with_(sigma_db=sigma))
        rows.append((scenario.name, float(snr), rep, sigma))
    out = _out_dir(args)
    bounds.write_crlb_csv(rows, out / "crlb.csv")
    print(Path(out / "crlb.csv").read_text(), end="")
    return EXIT_OK


def cmd_patterns(args, cfg: RunConfig) -> int:
    if not args.step_deg > 0:
        raise ConfigError("--step-deg must be > 0")
    scenario = cfg.scenario()
    angles = np.arange(-180.0, 180.0, args.step_deg)
    tx, rx = scenario.tx_pattern, scenario.rx_pattern
    with np.errstate(divide="ignore"):
        tx_db = 10.0 * np.log10(tx.gain(angles, strict=False))
        rx_db = 10.0 * np.log10(rx.gain(angles, strict=False))
    tx_slope = tx.log_gain_slope(angles, strict=False)
    out = _out_dir(args)
    with (out / "patterns.csv").open("w") as fh:
        fh.write("angle_deg,tx_gain_db,tx_log_slope_per_rad,rx_gain_db\n")
        for row in zip(angles, tx_db, tx_slope, rx_db):
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    print(f"wrote {out / 'patterns.csv'} ({len(angles)} rows)")
    if args.plot:
        fin = np.isfinite(tx_db)
        svg = line_chart_svg(
            [("gain", [Series("tx", angles[fin], tx_db[fin]), Series("rx", angles, rx_db, dashed=True)])],
            "angle (deg)",
            ["gain (dBi)"],
            log_y=False,
        )
        (out / "patterns.svg").write_text(svg)
        print(f"wrote {out / 'patterns.svg'}")
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "sweep": cmd_sweep,
    "crlb": cmd_crlb,
    "patterns": cmd_patterns,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _resolve_config(args)
        return COMMANDS[args.command](args, cfg)
    except (ConfigError, NonPositiveGain) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PatternLocateError as exc:
        print(f"{args.command} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
