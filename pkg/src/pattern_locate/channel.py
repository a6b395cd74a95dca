"""dB-domain RSSI model with log-normal shadowing.

The mean received power follows the Friis expression with a path-loss
exponent ``n``::

    R = 10 log10(P_T lambda^2 G_T(theta + dphi) G_R / ((4 pi)^2 d^n)) + 30 + X

with ``P_T`` in watts, so ``R`` is in dBm, and ``X ~ N(0, sigma^2)`` drawn
independently for every rotation.

Rotation schedule convention: ``Scenario.rotations_deg`` lists all N
measurement angles and the first one must be 0 (the reference
orientation).  A :class:`MeasurementSet` therefore has exactly N samples.

Random numbers come from numpy's PCG64 bit generator seeded through
``numpy.random.SeedSequence``; a seed may be an int or a tuple of ints,
which is how Monte-Carlo trials derive independent streams.
"""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError
from .patterns import RadiationPattern, asymmetric_dipole, normalize_deg, omnidirectional

#: SNR at which the shadowing deviation equals the reference deviation.
DEFAULT_SIGMA_REF_DB = 2.0

Seed = int | Sequence[int]


def make_rng(seed: Seed) -> np.random.Generator:
    """PCG64 generator from an int or a tuple of ints (a split key)."""
    entropy = [int(s) for s in seed] if isinstance(seed, (tuple, list)) else int(seed)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def snr_to_sigma(snr_db: float, sigma_ref_db: float = DEFAULT_SIGMA_REF_DB) -> float:
    """Shadowing deviation for a given SNR: ``sigma_ref * 10**(-snr/20)``."""
    if not sigma_ref_db > 0:
        raise ConfigError("sigma_ref_db must be > 0")
    return sigma_ref_db * 10.0 ** (-snr_db / 20.0)


def amplitude_sq(p_t_mw: float, lambda_m: float) -> float:
    """``P_T lambda^2 / (4 pi)^2`` with ``P_T`` converted to watts."""
    return (p_t_mw * 1e-3) * lambda_m**2 / (4.0 * math.pi) ** 2


def friis_rssi_dbm(a_sq, g_t, g_r, d, n):
    """Noise-free received power in dBm; broadcasts over array arguments."""
    return 10.0 * np.log10(a_sq * np.asarray(g_t) * g_r / np.asarray(d, dtype=float) ** n) + 30.0


@dataclass(frozen=True)
class Scenario:
    """Physical configuration of one transmitter/receiver geometry.

    Attributes:
        p_t_mw: Transmit power, mW.
        lambda_m: Wavelength, m.
        path_loss_n: Path-loss exponent, 2..6.
        sigma_db: Shadowing standard deviation, dB.
        true_d_m: Transmitter-receiver distance, m.
        true_theta_deg: Bearing of the receiver from the transmitter axis, deg.
        rotations_deg: All N transmitter rotation angles; the first is 0.
        tx_pattern: Transmitter pattern ``G_T``.
        rx_pattern: Receiver pattern ``G_R``.
        rx_angle_deg: Fixed receiver angle ``phi_R``.
        name: Free-form identifier copied into measurement sets.
    """

    p_t_mw: float = 100.0
    lambda_m: float = 0.125
    path_loss_n: float = 4.0
    sigma_db: float = 0.0
    true_d_m: float = 2.0
    true_theta_deg: float = 10.0
    rotations_deg: tuple[float, ...] = tuple(4.0 * i for i in range(8))
    tx_pattern: RadiationPattern = field(default_factory=asymmetric_dipole)
    rx_pattern: RadiationPattern = field(default_factory=omnidirectional)
    rx_angle_deg: float = 0.0
    name: str = "scenario"

    def __post_init__(self):
        object.__setattr__(self, "rotations_deg", tuple(float(r) for r in self.rotations_deg))
        object.__setattr__(self, "true_theta_deg", normalize_deg(self.true_theta_deg))
        if not self.p_t_mw > 0:
            raise ConfigError("p_t_mw must be > 0")
        if not self.lambda_m > 0:
            raise ConfigError("lambda_m must be > 0")
        if not 2.0 <= self.path_loss_n <= 6.0:
            raise ConfigError("path_loss_n must lie in [2, 6]")
        if not self.sigma_db >= 0:
            raise ConfigError("sigma_db must be >= 0")
        if not self.true_d_m > 0:
            raise ConfigError("true_d_m must be > 0")
        rot = self.rotations_deg
        if not rot:
            raise ConfigError("rotation schedule is empty")
        if rot[0] != 0.0:
            raise ConfigError("first rotation must be 0 deg (reference orientation)")
        if len(set(normalize_deg(np.array(rot)).tolist())) != len(rot):
            raise ConfigError("rotation angles must be distinct")

    @property
    def n_rotations(self) -> int:
        return len(self.rotations_deg)

    @property
    def a_sq(self) -> float:
        return amplitude_sq(self.p_t_mw, self.lambda_m)

    @property
    def rx_gain(self) -> float:
        return float(self.rx_pattern.gain(self.rx_angle_deg))

    def with_(self, **changes) -> Scenario:
        return replace(self, **changes)


def stepped_rotations(n: int, step_deg: float) -> tuple[float, ...]:
    """``(0, step, 2 step, ..., (n-1) step)``."""
    return tuple(step_deg * i for i in range(n))


def mean_rssi(scenario: Scenario, delta_phi_deg):
    """Noise-free RSSI (dBm) at rotation(s) ``delta_phi_deg``."""
    g_t = scenario.tx_pattern.gain(scenario.true_theta_deg + np.asarray(delta_phi_deg, dtype=float))
    out = friis_rssi_dbm(scenario.a_sq, g_t, scenario.rx_gain, scenario.true_d_m, scenario.path_loss_n)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True, eq=False)
class MeasurementSet:
    """RSSI samples taken at each rotation of the transmitter."""

    delta_phi_deg: np.ndarray
    rssi_dbm: np.ndarray
    seed: Seed | None = None
    scenario_id: str = ""

    def __post_init__(self):
        dphi = np.array(self.delta_phi_deg, dtype=float)
        rssi = np.array(self.rssi_dbm, dtype=float)
        if dphi.ndim != 1 or dphi.shape != rssi.shape:
            raise ConfigError("delta_phi and rssi must be 1-D arrays of equal length")
        dphi.setflags(write=False)
        rssi.setflags(write=False)
        object.__setattr__(self, "delta_phi_deg", dphi)
        object.__setattr__(self, "rssi_dbm", rssi)

    def __len__(self) -> int:
        return len(self.rssi_dbm)

    @property
    def samples(self) -> list[tuple[float, float]]:
        return list(zip(self.delta_phi_deg.tolist(), self.rssi_dbm.tolist()))

    def checksum(self) -> str:
        h = hashlib.sha256()
        h.update(self.delta_phi_deg.tobytes())
        h.update(self.rssi_dbm.tobytes())
        return h.hexdigest()


def sample_measurements(scenario: Scenario, seed: Seed) -> MeasurementSet:
    """Draw one shadowed RSSI sample per rotation.

    Same ``seed`` gives a bit-identical result.
    """
    rot = np.array(scenario.rotations_deg)
    mean = np.atleast_1d(mean_rssi(scenario, rot))
    noise = make_rng(seed).standard_normal(len(rot))
    rssi = mean + scenario.sigma_db * noise if scenario.sigma_db > 0 else mean.copy()
    return MeasurementSet(rot, rssi, seed=seed, scenario_id=scenario.name)


def write_measurements_csv(ms: MeasurementSet, path: str | Path) -> None:
    """Write ``index,delta_phi_deg,rssi_dbm`` rows (index starts at 1)."""
    with Path(path).open("w", newline="") as fh:
        fh.write("index,delta_phi_deg,rssi_dbm\n")
        for i, (dphi, rssi) in enumerate(ms.samples, start=1):
            fh.write(f"{i},{dphi!r},{rssi!r}\n")


def read_measurements_csv(path: str | Path, scenario_id: str = "") -> MeasurementSet:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["index", "delta_phi_deg", "rssi_dbm"]:
            raise ConfigError(f"{path}: header must be 'index,delta_phi_deg,rssi_dbm'")
        rows = [(float(r["delta_phi_deg"]), float(r["rssi_dbm"])) for r in reader]
    if not rows:
        raise ConfigError(f"{path}: no measurement rows")
    dphi, rssi = zip(*rows)
    return MeasurementSet(np.array(dphi), np.array(rssi), scenario_id=scenario_id or path.stem)
