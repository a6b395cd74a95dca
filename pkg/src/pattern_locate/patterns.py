"""Planar antenna gain patterns with log-gain slopes.

Angles are in degrees at every public entry point and in radians only
inside the closed-form expressions.  Every pattern is an immutable value;
``rotated`` returns a new pattern whose argument is shifted.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, NonPositiveGain, OutOfSupport

#: Directivity of a half-wave dipole (linear, about 2.15 dBi).
HALF_WAVE_DIPOLE_DIRECTIVITY = 1.64

# |cos(phi)| below this is treated as the dipole null (gain limit 0).
_NULL_COS = 1e-9
_MIN_TABLE_ROWS = 8


def normalize_deg(angle):
    """Wrap an angle (scalar or array, degrees) into ``[-180, 180)``."""
    wrapped = np.mod(np.asarray(angle, dtype=float) + 180.0, 360.0) - 180.0
    if np.ndim(wrapped) == 0:
        return float(wrapped)
    return wrapped


class PatternKind(str, enum.Enum):
    OMNIDIRECTIONAL = "omnidirectional"
    DIPOLE = "dipole"
    ASYMMETRIC = "asymmetric"
    TABULATED = "tabulated"


@dataclass(frozen=True)
class RadiationPattern:
    """Gain as a function of planar angle.

    Use the constructors :func:`omnidirectional`, :func:`dipole`,
    :func:`asymmetric_dipole`, :func:`tabulated` and :func:`load_pattern_csv`
    rather than building instances directly.

    Attributes:
        kind: Pattern family.
        params: Family parameters. Omnidirectional: ``(gain,)``; dipole:
            ``(directivity,)``; asymmetric: ``(directivity, epsilon,
            skew_deg)``; tabulated: ``()``.
        table: ``((angle_deg, linear_gain), ...)`` for tabulated patterns.
        offset_deg: Argument shift applied by :meth:`rotated`.
        interp: Tabulated interpolation, ``"db"`` (linear in log-gain) or
            ``"linear"`` (linear in gain).
    """

    kind: PatternKind
    params: tuple[float, ...] = ()
    table: tuple[tuple[float, float], ...] | None = None
    offset_deg: float = 0.0
    interp: str = "db"
    _angles: np.ndarray | None = field(default=None, init=False, repr=False, compare=False, hash=False)
    _log_gains: np.ndarray | None = field(default=None, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        kind = PatternKind(self.kind)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if kind is PatternKind.TABULATED:
            if self.table is None:
                raise ConfigError("tabulated pattern needs a table")
            if self.interp not in ("db", "linear"):
                raise ConfigError(f"unknown interpolation {self.interp!r}")
            angles = np.array([a for a, _ in self.table], dtype=float)
            gains = np.array([g for _, g in self.table], dtype=float)
            if len(angles) < _MIN_TABLE_ROWS:
                raise ConfigError(
                    f"tabulated pattern needs at least {_MIN_TABLE_ROWS} samples, got {len(angles)}"
                )
            if np.any(np.diff(angles) <= 0):
                raise ConfigError("tabulated angles must be strictly increasing")
            if angles[0] < -180.0 or angles[-1] >= 180.0:
                raise ConfigError("tabulated angles must lie in [-180, 180)")
            if np.any(~np.isfinite(gains)) or np.any(gains <= 0):
                raise NonPositiveGain("tabulated gains must be finite and > 0")
            angles.setflags(write=False)
            log_gains = np.log(gains)
            log_gains.setflags(write=False)
            object.__setattr__(self, "_angles", angles)
            object.__setattr__(self, "_log_gains", log_gains)
        elif self.table is not None:
            raise ConfigError(f"{kind.value} pattern takes no table")
        if kind is PatternKind.OMNIDIRECTIONAL and not self.params[0] > 0:
            raise NonPositiveGain("omnidirectional gain must be > 0")
        if kind in (PatternKind.DIPOLE, PatternKind.ASYMMETRIC) and not self.params[0] > 0:
            raise ConfigError("dipole directivity must be > 0")
        if kind is PatternKind.ASYMMETRIC and not 0.0 <= self.params[1] <= 0.9:
            raise ConfigError("asymmetry epsilon must lie in [0, 0.9]")

    # -- evaluation -----------------------------------------------------

    def rotated(self, delta_deg: float) -> RadiationPattern:
        """Return the pattern ``phi -> self.gain(phi + delta_deg)``."""
        return replace(self, offset_deg=self.offset_deg + float(delta_deg))

    def in_support(self, phi_deg):
        """Boolean mask of angles where the gain is defined and positive."""
        phi = np.asarray(phi_deg, dtype=float) + self.offset_deg
        if self.kind is PatternKind.OMNIDIRECTIONAL:
            return np.isfinite(phi)
        if self.kind is PatternKind.TABULATED:
            phi = normalize_deg(phi)
            return (phi >= self._angles[0]) & (phi <= self._angles[-1])
        return np.abs(np.cos(np.radians(phi))) > _NULL_COS

    def gain(self, phi_deg, strict: bool = True):
        """Linear gain at ``phi_deg`` (degrees, scalar or array).

        Out-of-support angles raise :class:`OutOfSupport` when ``strict``;
        otherwise they evaluate to NaN so vectorized searches can mask them.
        """
        phi = np.asarray(phi_deg, dtype=float)
        ok = self.in_support(phi)
        if strict and not np.all(ok):
            bad = np.atleast_1d(phi)[~np.atleast_1d(ok)][0]
            raise OutOfSupport(f"angle {bad:g} deg outside support of {self.kind.value} pattern")
        out = self._gain_unchecked(phi + self.offset_deg)
        out = np.where(ok, out, np.nan)
        return float(out) if out.ndim == 0 else out

    def log_gain_slope(self, phi_deg, strict: bool = True):
        """Derivative of ``ln gain`` with respect to angle, per radian."""
        phi = np.asarray(phi_deg, dtype=float)
        ok = self.in_support(phi)
        if strict and not np.all(ok):
            bad = np.atleast_1d(phi)[~np.atleast_1d(ok)][0]
            raise OutOfSupport(f"angle {bad:g} deg outside support of {self.kind.value} pattern")
        out = self._slope_unchecked(phi + self.offset_deg)
        out = np.where(ok, out, np.nan)
        return float(out) if out.ndim == 0 else out

    def _gain_unchecked(self, phi: np.ndarray) -> np.ndarray:
        kind = self.kind
        if kind is PatternKind.OMNIDIRECTIONAL:
            return np.full(phi.shape, self.params[0])
        if kind is PatternKind.TABULATED:
            phi = normalize_deg(phi)
            if self.interp == "linear":
                return np.interp(phi, self._angles, np.exp(self._log_gains))
            return np.exp(np.interp(phi, self._angles, self._log_gains))
        rad = np.radians(phi)
        with np.errstate(divide="ignore", invalid="ignore"):
            g = self.params[0] * (np.cos(0.5 * np.pi * np.sin(rad)) / np.cos(rad)) ** 2
        if kind is PatternKind.ASYMMETRIC:
            _, eps, skew = self.params
            g = g * (1.0 + eps * np.sin(rad + math.radians(skew)))
        return g

    def _slope_unchecked(self, phi: np.ndarray) -> np.ndarray:
        kind = self.kind
        if kind is PatternKind.OMNIDIRECTIONAL:
            return np.zeros(phi.shape)
        if kind is PatternKind.TABULATED:
            return self._tabulated_slope(normalize_deg(phi))
        rad = np.radians(phi)
        with np.errstate(divide="ignore", invalid="ignore"):
            slope = 2.0 * (np.tan(rad) - 0.5 * np.pi * np.cos(rad) * np.tan(0.5 * np.pi * np.sin(rad)))
        if kind is PatternKind.ASYMMETRIC:
            _, eps, skew = self.params
            arg = rad + math.radians(skew)
            slope = slope + eps * np.cos(arg) / (1.0 + eps * np.sin(arg))
        return slope

    def _tabulated_slope(self, phi: np.ndarray) -> np.ndarray:
        # central difference of log-gain, step = spacing of the local segment
        angles = self._angles
        seg = np.clip(np.searchsorted(angles, phi, side="right") - 1, 0, len(angles) - 2)
        h = angles[seg + 1] - angles[seg]
        lo = np.maximum(phi - h, angles[0])
        hi = np.minimum(phi + h, angles[-1])
        log_lo = np.log(self._gain_unchecked(lo))
        log_hi = np.log(self._gain_unchecked(hi))
        return (log_hi - log_lo) / np.radians(hi - lo)


# -- constructors ---------------------------------------------------------


def omnidirectional(gain: float = 1.0) -> RadiationPattern:
    return RadiationPattern(PatternKind.OMNIDIRECTIONAL, (gain,))


def dipole(directivity: float = HALF_WAVE_DIPOLE_DIRECTIVITY) -> RadiationPattern:
    """Half-wave dipole E-plane cut with broadside at 0 deg and nulls at +-90 deg.

    Symmetric about broadside, so a bearing and its mirror image give the
    same gain sequence.
    """
    return RadiationPattern(PatternKind.DIPOLE, (directivity,))


def asymmetric_dipole(
    epsilon: float = 0.5,
    skew_deg: float = 0.0,
    directivity: float = HALF_WAVE_DIPOLE_DIRECTIVITY,
) -> RadiationPattern:
    """Dipole gain times ``1 + epsilon * sin(phi + skew)``.

    The skew factor breaks the mirror symmetry of the plain dipole, which is
    what makes a single rotating antenna informative about bearing sign.
    """
    return RadiationPattern(PatternKind.ASYMMETRIC, (directivity, epsilon, skew_deg))


def tabulated(
    angles_deg: Sequence[float], gains: Sequence[float], interp: str = "db"
) -> RadiationPattern:
    """Pattern interpolated from samples of linear gain."""
    if len(angles_deg) != len(gains):
        raise ConfigError("angle and gain columns differ in length")
    table = tuple((float(a), float(g)) for a, g in zip(angles_deg, gains))
    return RadiationPattern(PatternKind.TABULATED, (), table, interp=interp)


def load_pattern_csv(path: str | Path, interp: str = "db") -> RadiationPattern:
    """Read an ``angle_deg,gain_db`` CSV into a tabulated pattern."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["angle_deg", "gain_db"]:
            raise ConfigError(f"{path}: header must be 'angle_deg,gain_db'")
        rows = [(float(r["angle_deg"]), float(r["gain_db"])) for r in reader]
    angles = [a for a, _ in rows]
    gains = [10.0 ** (g / 10.0) for _, g in rows]
    return tabulated(angles, gains, interp=interp)


def save_pattern_csv(pattern: RadiationPattern, path: str | Path) -> None:
    if pattern.table is None:
        raise ConfigError("only tabulated patterns can be written as CSV")
    with Path(path).open("w", newline="") as fh:
        fh.write("angle_deg,gain_db\n")
        for angle, g in pattern.table:
            fh.write(f"{angle!r},{10.0 * math.log10(g)!r}\n")


def gain(pattern: RadiationPattern, phi_deg, strict: bool = True):
    return pattern.gain(phi_deg, strict=strict)


def log_gain_slope(pattern: RadiationPattern, phi_deg, strict: bool = True):
    return pattern.log_gain_slope(phi_deg, strict=strict)
