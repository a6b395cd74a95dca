"""Numerical primitives used by the estimators.

* :func:`maximize_2d` / :func:`maximize_1d`: coarse grid scan followed by
  rounds of shrink-and-rescan around the incumbent.
* :func:`intersect_polylines`: crossings of two piecewise-linear curves
  ``d(theta)``.

Objectives must be vectorized: they receive numpy arrays and return an
array of the broadcast shape.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import ConfigError, DegenerateOverlap, NonFiniteObjective, NoOverlap

# Points per axis in every refinement round (odd, so the incumbent is rescanned).
REFINE_POINTS = 9
TOUCH_TOL_M = 1e-9


@dataclass(frozen=True)
class GridSpec:
    """Search box and refinement schedule.

    ``theta_range`` is in degrees, ``d_range`` in meters.
    """

    d_range: tuple[float, float] = (0.5, 5.0)
    theta_range: tuple[float, float] = (-70.0, 70.0)
    coarse_steps: tuple[int, int] = (64, 1401)
    refine_iters: int = 30
    refine_shrink: float = 0.5

    def __post_init__(self):
        for name, (lo, hi) in (("d_range", self.d_range), ("theta_range", self.theta_range)):
            if not lo < hi:
                raise ConfigError(f"{name} needs min < max, got ({lo}, {hi})")
        if min(self.coarse_steps) < 16:
            raise ConfigError("coarse_steps must be >= 16 on each axis")
        if not 0.1 <= self.refine_shrink <= 0.9:
            raise ConfigError("refine_shrink must lie in [0.1, 0.9]")
        if self.refine_iters < 0:
            raise ConfigError("refine_iters must be >= 0")

    @property
    def theta_grid(self) -> np.ndarray:
        return np.linspace(*self.theta_range, self.coarse_steps[1])

    @property
    def d_grid(self) -> np.ndarray:
        return np.linspace(*self.d_range, self.coarse_steps[0])


class Maximum2D(NamedTuple):
    d: float
    theta: float
    value: float
    n_evals: int


class Maximum1D(NamedTuple):
    x: float
    value: float
    n_evals: int


def _check_finite(values: np.ndarray, allow_neg_inf: bool) -> None:
    bad = np.isnan(values) | (values == np.inf)
    if not allow_neg_inf:
        bad |= values == -np.inf
    if np.any(bad):
        raise NonFiniteObjective("objective returned NaN or infinity")


def _quadratic_step(u: np.ndarray, v: np.ndarray, patch: np.ndarray) -> np.ndarray | None:
    """Newton step of a least-squares quadratic fitted to a scanned patch.

    ``u`` and ``v`` are the patch axes in units of the current half-width,
    relative to the patch center.  Returns None unless the fitted Hessian is
    negative definite (no interior maximum to aim at).
    """
    uu, vv = np.meshgrid(u, v, indexing="ij")
    uu, vv = uu.ravel(), vv.ravel()
    design = np.column_stack([np.ones_like(uu), uu, vv, 0.5 * uu**2, uu * vv, 0.5 * vv**2])
    coef, *_ = np.linalg.lstsq(design, patch.ravel() - patch.max(), rcond=None)
    grad = coef[1:3]
    hess = np.array([[coef[3], coef[4]], [coef[4], coef[5]]])
    if not (hess[0, 0] < 0 and np.linalg.det(hess) > 0):
        return None
    step = -np.linalg.solve(hess, grad)
    return step if np.all(np.isfinite(step)) else None


def maximize_2d(objective: Callable, grid: GridSpec) -> Maximum2D:
    """Maximize ``objective(d, theta)`` over the box in ``grid``.

    Ties go to the lowest d index, then the lowest theta index.  Each
    refinement round rescans a ``REFINE_POINTS``-square patch around the
    incumbent, starting at one coarse step either side.  The patch shrinks
    by ``refine_shrink`` after every round except those where the incumbent
    moved to the patch edge: such a round only recenters, so the search can
    follow a ridge that runs diagonally through the coarse grid.  Every
    round also tries the Newton point of a quadratic fitted to the patch,
    which moves along such a ridge in one step.  Exactly
    ``refine_iters`` shrinking rounds run, plus at most ``refine_iters``
    recentering rounds.  The incumbent is replaced only by a strictly
    better point, so the returned value never decreases.
    """
    d_lo, d_hi = grid.d_range
    t_lo, t_hi = grid.theta_range
    d_axis, t_axis = grid.d_grid, grid.theta_grid
    values = np.broadcast_to(
        np.asarray(objective(d_axis[:, None], t_axis[None, :]), dtype=float), (len(d_axis), len(t_axis))
    )
    _check_finite(values, allow_neg_inf=False)
    i, j = np.unravel_index(int(np.argmax(values)), values.shape)
    best_d, best_t, best_v = float(d_axis[i]), float(t_axis[j]), float(values[i, j])
    n_evals = values.size

    half_d = d_axis[1] - d_axis[0]
    half_t = t_axis[1] - t_axis[0]
    offsets = np.linspace(-1.0, 1.0, REFINE_POINTS)
    edge = (0, REFINE_POINTS - 1)
    shrinks = recenters = 0
    while shrinks < grid.refine_iters:
        ds = np.clip(best_d + half_d * offsets, d_lo, d_hi)
        ts = np.clip(best_t + half_t * offsets, t_lo, t_hi)
        patch = np.broadcast_to(
            np.asarray(objective(ds[:, None], ts[None, :]), dtype=float), (len(ds), len(ts))
        )
        _check_finite(patch, allow_neg_inf=False)
        n_evals += patch.size
        center_d, center_t = best_d, best_t
        k = np.unravel_index(int(np.argmax(patch)), patch.shape)
        moved_to_edge = False
        if patch[k] > best_v:
            best_d, best_t, best_v = float(ds[k[0]]), float(ts[k[1]]), float(patch[k])
            moved_to_edge = k[0] in edge or k[1] in edge
        step = _quadratic_step((ds - center_d) / half_d, (ts - center_t) / half_t, patch)
        if step is not None:
            cand_d = float(np.clip(center_d + half_d * step[0], d_lo, d_hi))
            cand_t = float(np.clip(center_t + half_t * step[1], t_lo, t_hi))
            cand_v = float(np.asarray(objective(np.array(cand_d), np.array(cand_t)), dtype=float))
            _check_finite(np.array(cand_v), allow_neg_inf=False)
            n_evals += 1
            if cand_v > best_v:
                best_d, best_t, best_v = cand_d, cand_t, cand_v
                moved_to_edge = float(np.max(np.abs(step))) >= 1.0
        if moved_to_edge and recenters < grid.refine_iters:
            recenters += 1
            continue
        half_d *= grid.refine_shrink
        half_t *= grid.refine_shrink
        shrinks += 1
    return Maximum2D(best_d, best_t, best_v, n_evals)


def maximize_1d(
    objective: Callable,
    lo: float,
    hi: float,
    coarse_steps: int,
    refine_iters: int,
    refine_shrink: float,
    allow_infeasible: bool = False,
) -> Maximum1D:
    """One-dimensional counterpart of :func:`maximize_2d`.

    With ``allow_infeasible`` the objective may return ``-inf`` to mark
    points outside its domain; NaN is always an error.
    """
    axis = np.linspace(lo, hi, coarse_steps)
    values = np.asarray(objective(axis), dtype=float)
    _check_finite(values, allow_neg_inf=allow_infeasible)
    k = int(np.argmax(values))
    if values[k] == -np.inf:
        raise NonFiniteObjective("objective is infeasible on the whole grid")
    best_x, best_v = float(axis[k]), float(values[k])
    n_evals = len(axis)
    half = axis[1] - axis[0]
    offsets = np.linspace(-1.0, 1.0, REFINE_POINTS)
    shrinks = recenters = 0
    while shrinks < refine_iters:
        xs = np.clip(best_x + half * offsets, lo, hi)
        vals = np.asarray(objective(xs), dtype=float)
        _check_finite(vals, allow_neg_inf=allow_infeasible)
        n_evals += len(xs)
        k = int(np.argmax(vals))
        moved_to_edge = False
        if vals[k] > best_v:
            best_x, best_v = float(xs[k]), float(vals[k])
            moved_to_edge = k in (0, REFINE_POINTS - 1)
        if moved_to_edge and recenters < refine_iters:
            recenters += 1
            continue
        half *= refine_shrink
        shrinks += 1
    return Maximum1D(best_x, best_v, n_evals)


@dataclass(frozen=True, eq=False)
class Polyline:
    """Piecewise-linear curve ``d(theta)``; theta in degrees, d in meters."""

    theta_deg: np.ndarray
    d_m: np.ndarray

    def __post_init__(self):
        theta = np.array(self.theta_deg, dtype=float)
        d = np.array(self.d_m, dtype=float)
        if theta.ndim != 1 or theta.shape != d.shape:
            raise ConfigError("polyline theta and d must be 1-D arrays of equal length")
        if len(theta) < 2:
            raise ConfigError("polyline needs at least 2 vertices")
        if np.any(np.diff(theta) <= 0):
            raise ConfigError("polyline theta must be strictly increasing")
        if not (np.all(np.isfinite(theta)) and np.all(np.isfinite(d))):
            raise ConfigError("polyline vertices must be finite")
        theta.setflags(write=False)
        d.setflags(write=False)
        object.__setattr__(self, "theta_deg", theta)
        object.__setattr__(self, "d_m", d)

    @property
    def span(self) -> tuple[float, float]:
        return float(self.theta_deg[0]), float(self.theta_deg[-1])

    def at(self, theta):
        return np.interp(theta, self.theta_deg, self.d_m)


class Crossing(NamedTuple):
    theta: float
    d: float
    # merged-grid bracket containing the crossing (equal ends for a vertex hit)
    lo: float
    hi: float


def polyline_crossings(a: Polyline, b: Polyline, tol: float = TOUCH_TOL_M) -> list[Crossing]:
    """Crossings of ``a`` and ``b`` together with their bracketing segment.

    Both curves are graphs over theta, so their difference is piecewise
    linear on the union of the two vertex sets; every segment pair that
    crosses shows up as a sign change (or a zero vertex) of that difference.
    """
    lo = max(a.span[0], b.span[0])
    hi = min(a.span[1], b.span[1])
    if lo > hi:
        raise NoOverlap(f"theta spans {a.span} and {b.span} are disjoint")
    knots = np.union1d(a.theta_deg, b.theta_deg)
    knots = knots[(knots >= lo) & (knots <= hi)]
    da = a.at(knots)
    db = b.at(knots)
    diff = da - db
    zero = np.abs(diff) <= tol
    if len(knots) == 1 or np.any(zero[:-1] & zero[1:]):
        raise DegenerateOverlap("polylines coincide over a segment")

    out: list[Crossing] = []
    for k in np.flatnonzero(zero):
        t = float(knots[k])
        out.append(Crossing(t, 0.5 * float(da[k] + db[k]), t, t))
    sign = np.sign(np.where(zero, 0.0, diff))
    for k in np.flatnonzero(sign[:-1] * sign[1:] < 0):
        w = diff[k] / (diff[k] - diff[k + 1])
        t0, t1 = knots[k], knots[k + 1]
        t = float(t0 + w * (t1 - t0))
        d = 0.5 * float(a.at(t) + b.at(t))
        out.append(Crossing(t, d, float(t0), float(t1)))
    out.sort(key=lambda c: c.theta)
    return out


def shared_grid_crossings(
    theta: np.ndarray, values: np.ndarray, pairs: Sequence[tuple[int, int]], tol: float = TOUCH_TOL_M
) -> list[list[Crossing]]:
    """:func:`polyline_crossings` for many curves sampled on one common grid.

    ``values`` has one column per curve.  NaN marks a vertex outside that
    curve's span: segments touching it never report a crossing.  Returns
    one crossing list per entry of ``pairs``.

    Raises:
        DegenerateOverlap: some pair coincides over a segment.
    """
    if len(pairs) == 0:
        return []
    ii = np.array([p[0] for p in pairs])
    jj = np.array([p[1] for p in pairs])
    da = values[:, ii]
    db = values[:, jj]
    with np.errstate(invalid="ignore"):
        diff = da - db
        zero = np.abs(diff) <= tol
    if np.any(zero[:-1] & zero[1:]):
        raise DegenerateOverlap("polylines coincide over a segment")
    sign = np.sign(np.where(zero, 0.0, diff))
    out: list[list[Crossing]] = [[] for _ in pairs]
    for k, p in zip(*np.nonzero(zero)):
        t = float(theta[k])
        out[p].append(Crossing(t, 0.5 * float(da[k, p] + db[k, p]), t, t))
    ks, ps = np.nonzero(sign[:-1] * sign[1:] < 0)
    if len(ks):
        w = diff[ks, ps] / (diff[ks, ps] - diff[ks + 1, ps])
        t0, t1 = theta[ks], theta[ks + 1]
        t = t0 + w * (t1 - t0)
        d = 0.5 * (da[ks, ps] + w * (da[ks + 1, ps] - da[ks, ps]) + db[ks, ps] + w * (db[ks + 1, ps] - db[ks, ps]))
        for p, tc, dc, lo, hi in zip(ps.tolist(), t.tolist(), d.tolist(), t0.tolist(), t1.tolist()):
            out[p].append(Crossing(tc, dc, lo, hi))
    for lst in out:
        lst.sort(key=lambda c: c.theta)
    return out


def intersect_polylines(a: Polyline, b: Polyline, tol: float = TOUCH_TOL_M) -> list[tuple[float, float]]:
    """All ``(theta_deg, d_m)`` points where the two curves meet.

    Raises:
        NoOverlap: the theta spans are disjoint.
        DegenerateOverlap: the curves coincide on a segment.
    """
    return [(c.theta, c.d) for c in polyline_crossings(a, b, tol)]
