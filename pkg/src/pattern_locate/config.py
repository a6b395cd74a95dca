"""Flat TOML scenario files.

Every physical quantity carries its unit in the key name.  Unknown keys
are rejected so that a typo never silently falls back to a default.

Example::

    pt_mw = 100
    lambda_mm = 125
    path_loss_n = 4
    snr_db = 10
    d0_m = 2.0
    theta0_deg = 10.0
    n_rotations = 8
    step_deg = 4
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .channel import DEFAULT_SIGMA_REF_DB, Scenario, snr_to_sigma, stepped_rotations
from .errors import ConfigError
from .estimators import Method
from .montecarlo import SweepAxis, SweepConfig
from .patterns import RadiationPattern, asymmetric_dipole, dipole, load_pattern_csv, omnidirectional
from .solver import GridSpec


@dataclass(frozen=True)
class Key:
    name: str
    kind: type
    default: Any
    unit: str
    help: str


_NONE = None

KEYS: tuple[Key, ...] = (
    Key("name", str, "scenario", "-", "scenario label copied into outputs"),
    Key("seed", int, 0, "-", "master seed (PATTERN_LOCATE_SEED and --seed override it)"),
    Key("pt_mw", float, 100.0, "mW", "transmit power"),
    Key("lambda_mm", float, 125.0, "mm", "carrier wavelength"),
    Key("path_loss_n", float, 4.0, "-", "path-loss exponent, 2..6"),
    Key("sigma_db", float, _NONE, "dB", "shadowing deviation (exclusive with snr_db)"),
    Key("snr_db", float, _NONE, "dB", "SNR; sigma = sigma_ref_db * 10^(-snr/20)"),
    Key("sigma_ref_db", float, DEFAULT_SIGMA_REF_DB, "dB", "shadowing deviation at 0 dB SNR"),
    Key("d0_m", float, 2.0, "m", "true transmitter-receiver distance"),
    Key("theta0_deg", float, 10.0, "deg", "true bearing"),
    Key("rotations_deg", list, _NONE, "deg", "explicit rotation schedule, first entry 0"),
    Key("n_rotations", int, 8, "-", "rotation count N (when rotations_deg is absent)"),
    Key("step_deg", float, 4.0, "deg", "rotation step (when rotations_deg is absent)"),
    Key("tx_pattern", str, "asymmetric", "-", "omnidirectional | dipole | asymmetric | tabulated"),
    Key("tx_epsilon", float, 0.5, "-", "asymmetry depth, 0..0.9"),
    Key("tx_skew_deg", float, 0.0, "deg", "asymmetry phase"),
    Key("tx_directivity", float, 1.64, "linear", "dipole peak gain"),
    Key("tx_pattern_csv", str, _NONE, "path", "angle_deg,gain_db table for tx_pattern = tabulated"),
    Key("tx_interp", str, "db", "-", "tabulated interpolation: db | linear"),
    Key("rx_pattern", str, "omnidirectional", "-", "receiver pattern, same choices as tx_pattern"),
    Key("rx_gain_dbi", float, 0.0, "dBi", "omnidirectional receiver gain"),
    Key("rx_pattern_csv", str, _NONE, "path", "angle_deg,gain_db table for rx_pattern = tabulated"),
    Key("rx_angle_deg", float, 0.0, "deg", "receiver orientation angle"),
    Key("known_receiver", bool, True, "-", "whether the receiver gain is known to the estimator"),
    Key("d_min_m", float, 0.5, "m", "search range lower distance"),
    Key("d_max_m", float, 5.0, "m", "search range upper distance"),
    Key("theta_min_deg", float, -70.0, "deg", "search range lower bearing"),
    Key("theta_max_deg", float, 70.0, "deg", "search range upper bearing"),
    Key("d_steps", int, 64, "-", "coarse grid points in distance"),
    Key("theta_steps", int, 1401, "-", "coarse grid points in bearing"),
    Key("refine_iters", int, 30, "-", "refinement rounds after the coarse scan"),
    Key("refine_shrink", float, 0.5, "-", "refinement window shrink factor, 0.1..0.9"),
    Key("baseline_m", float, 0.5, "m", "transmitter move for the unknown-receiver fix"),
    Key("similarity_metric", str, "lsq", "-", "lsq | corr"),
    Key("sweep_axis", str, "snr", "-", "snr | rotation_count | delta_phi"),
    Key("sweep_values", list, [0.0, 5.0, 10.0, 15.0, 20.0], "dB | - | deg", "axis values, strictly increasing"),
    Key("trials", int, 2000, "-", "Monte-Carlo trials per axis value"),
    Key("methods", list, ["eqsolve", "cid", "mle"], "-", "estimators run in sweeps"),
    Key("position_mode", str, "averaged", "-", "averaged (random truth per trial) | fixed"),
    Key("crlb_snr_db", list, [0.0, 5.0, 10.0, 15.0, 20.0], "dB", "SNR values tabulated by the crlb command"),
)

KEY_MAP = {k.name: k for k in KEYS}


def keys_help() -> str:
    """One line per key: name, unit, default and meaning."""
    lines = ["config keys (flat TOML):"]
    for k in KEYS:
        default = "unset" if k.default is None else repr(k.default)
        lines.append(f"  {k.name:<18} [{k.unit}] default {default}: {k.help}")
    return "\n".join(lines)


def _coerce(key: Key, value: Any) -> Any:
    if key.kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key.name}: expected a number, got {value!r}")
        value = float(value)
        if not math.isfinite(value):
            raise ConfigError(f"{key.name}: must be finite")
        return value
    if key.kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key.name}: expected an integer, got {value!r}")
        return value
    if key.kind is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{key.name}: expected true or false, got {value!r}")
        return value
    if key.kind is str:
        if not isinstance(value, str):
            raise ConfigError(f"{key.name}: expected a string, got {value!r}")
        return value
    if not isinstance(value, list):
        raise ConfigError(f"{key.name}: expected a list, got {value!r}")
    return list(value)


def parse_value(text: str) -> Any:
    """Parse a ``--set`` value as a TOML value, falling back to a bare string."""
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


@dataclass(frozen=True)
class RunConfig:
    """Validated contents of one config file plus overrides."""

    values: dict = field(default_factory=dict)
    source: str = "<defaults>"

    def __getitem__(self, name: str) -> Any:
        return self.values[name]

    @property
    def sigma_given(self) -> bool:
        return self["sigma_db"] is not None or self["snr_db"] is not None

    @property
    def sigma_db(self) -> float:
        """Shadowing deviation; 0 when neither sigma_db nor snr_db is set."""
        if self["sigma_db"] is not None:
            return self["sigma_db"]
        if self["snr_db"] is not None:
            return snr_to_sigma(self["snr_db"], self["sigma_ref_db"])
        return 0.0

    def with_seed(self, seed: int) -> RunConfig:
        return RunConfig({**self.values, "seed": int(seed)}, self.source)

    def rotations(self) -> tuple[float, ...]:
        if self["rotations_deg"] is not None:
            rot = self["rotations_deg"]
            if not all(isinstance(r, (int, float)) and not isinstance(r, bool) for r in rot):
                raise ConfigError("rotations_deg: expected a list of numbers")
            return tuple(float(r) for r in rot)
        if self["n_rotations"] < 1:
            raise ConfigError("n_rotations must be >= 1")
        return stepped_rotations(self["n_rotations"], self["step_deg"])

    def _pattern(self, prefix: str) -> RadiationPattern:
        kind = self[f"{prefix}_pattern"]
        if kind == "omnidirectional":
            gain = 10.0 ** (self["rx_gain_dbi"] / 10.0) if prefix == "rx" else 1.0
            return omnidirectional(gain)
        if kind == "dipole":
            return dipole(self["tx_directivity"]) if prefix == "tx" else dipole()
        if kind == "asymmetric":
            if prefix == "rx":
                return asymmetric_dipole()
            return asymmetric_dipole(self["tx_epsilon"], self["tx_skew_deg"], self["tx_directivity"])
        if kind == "tabulated":
            path = self[f"{prefix}_pattern_csv"]
            if path is None:
                raise ConfigError(f"{prefix}_pattern = tabulated needs {prefix}_pattern_csv")
            path = Path(path)
            if not path.is_absolute() and self.source not in ("<defaults>", ""):
                path = Path(self.source).parent / path
            if not path.exists():
                raise ConfigError(f"{prefix}_pattern_csv: no such file {path}")
            return load_pattern_csv(path, interp=self["tx_interp"] if prefix == "tx" else "db")
        raise ConfigError(f"{prefix}_pattern: unknown pattern {kind!r}")

    def scenario(self) -> Scenario:
        return Scenario(
            p_t_mw=self["pt_mw"],
            lambda_m=self["lambda_mm"] * 1e-3,
            path_loss_n=self["path_loss_n"],
            sigma_db=self.sigma_db,
            true_d_m=self["d0_m"],
            true_theta_deg=self["theta0_deg"],
            rotations_deg=self.rotations(),
            tx_pattern=self._pattern("tx"),
            rx_pattern=self._pattern("rx"),
            rx_angle_deg=self["rx_angle_deg"],
            name=self["name"],
        )

    def grid(self) -> GridSpec:
        return GridSpec(
            d_range=(self["d_min_m"], self["d_max_m"]),
            theta_range=(self["theta_min_deg"], self["theta_max_deg"]),
            coarse_steps=(self["d_steps"], self["theta_steps"]),
            refine_iters=self["refine_iters"],
            refine_shrink=self["refine_shrink"],
        )

    def sweep(self, trials: int | None = None) -> SweepConfig:
        try:
            axis = SweepAxis(self["sweep_axis"])
        except ValueError:
            raise ConfigError(f"sweep_axis: unknown axis {self['sweep_axis']!r}") from None
        values = self["sweep_values"]
        if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in values):
            raise ConfigError("sweep_values: expected a list of numbers")
        try:
            methods = tuple(Method(m) for m in self["methods"])
        except ValueError as exc:
            raise ConfigError(f"methods: {exc}") from None
        return SweepConfig(
            base_scenario=self.scenario(),
            axis=axis,
            axis_values=tuple(values),
            trials=self["trials"] if trials is None else trials,
            methods=methods,
            master_seed=self["seed"],
            sigma_ref_db=self["sigma_ref_db"],
            position_mode=self["position_mode"],
            d_range=(self["d_min_m"], self["d_max_m"]),
            theta_range=(self["theta_min_deg"], self["theta_max_deg"]),
            baseline_m=self["baseline_m"],
            grid=self.grid(),
        )


def build_config(raw: dict, source: str = "<defaults>") -> RunConfig:
    """Validate ``raw`` against :data:`KEYS` and fill defaults.

    Raises:
        ConfigError: unknown key, wrong type, or conflicting keys.
    """
    unknown = sorted(set(raw) - set(KEY_MAP))
    if unknown:
        raise ConfigError(f"{source}: unknown key(s) {', '.join(unknown)}")
    values = {k.name: k.default for k in KEYS}
    for name, value in raw.items():
        values[name] = _coerce(KEY_MAP[name], value)
    if values["sigma_db"] is not None and values["snr_db"] is not None:
        raise ConfigError(f"{source}: give sigma_db or snr_db, not both")
    if values["sigma_db"] is not None and values["sigma_db"] < 0:
        raise ConfigError(f"{source}: sigma_db must be >= 0")
    if values["similarity_metric"] not in ("lsq", "corr"):
        raise ConfigError(f"{source}: similarity_metric must be lsq or corr")
    if values["tx_interp"] not in ("db", "linear"):
        raise ConfigError(f"{source}: tx_interp must be db or linear")
    return RunConfig(values, source)


def load_config(path: str | Path | None, overrides: dict | None = None) -> RunConfig:
    """Read a config file (or defaults when ``path`` is None) and apply overrides."""
    raw: dict = {}
    source = "<defaults>"
    if path is not None:
        path = Path(path)
        source = str(path)
        try:
            text = path.read_text()
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from None
        try:
            raw = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        nested = [k for k, v in raw.items() if isinstance(v, dict)]
        if nested:
            raise ConfigError(f"{path}: tables are not supported ({', '.join(nested)}); use flat keys")
    raw.update(overrides or {})
    return build_config(raw, source)
