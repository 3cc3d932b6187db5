"""Post-solve analysis: regions, free boundary, regularity estimators.

Everything here consumes plain arrays or :class:`~jumpstop.grids.GridFunction`
surfaces (plus duck-typed solve reports) and never imports the solver, so
the solver may call into this module for boundary extraction without a
cycle.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import InvariantViolation, ParameterError
from .grids import GridFunction

__all__ = [
    "RegionPartition",
    "partition",
    "crossings",
    "SmoothFitReport",
    "smooth_fit_gap",
    "holder_seminorm",
    "parabolic_norms",
    "sobolev_stability",
    "CheckResult",
    "lemma_suite",
]


def crossings(u_slice: np.ndarray, g_slice: np.ndarray,
              x: np.ndarray, tol: float) -> np.ndarray:
    """Locations where ``u - g`` crosses the contact tolerance.

    Linear interpolation between adjacent nodes of ``d = u - g - tol``;
    returns an increasing array of x-positions (possibly empty).
    """
    d = np.asarray(u_slice, dtype=float) - np.asarray(g_slice, dtype=float) \
        - tol
    sign_change = d[:-1] * d[1:] < 0.0
    idx = np.nonzero(sign_change)[0]
    frac = d[idx] / (d[idx] - d[idx + 1])
    locs = x[idx] + frac * (x[idx + 1] - x[idx])
    exact = np.nonzero(d == 0.0)[0]
    if exact.size:
        locs = np.concatenate([locs, x[exact]])
    return np.sort(locs)


@dataclass(frozen=True)
class RegionPartition:
    """Node labels (1 = continuation, 0 = contact) and per-time boundary."""

    labels: np.ndarray
    boundary: list
    tol: float

    @property
    def continuation(self) -> np.ndarray:
        return self.labels == 1

    @property
    def contact(self) -> np.ndarray:
        return self.labels == 0


def partition(u: GridFunction, payoff, tol: float) -> RegionPartition:
    """Split the (backward-time) surface into contact and continuation sets.

    Raises :class:`InvariantViolation` where the surface dips below the
    obstacle by more than ``tol`` -- that is never a rounding artifact.
    """
    x = u.grid.nodes
    g = np.asarray(payoff(x), dtype=float)
    vals = u.values if u.values.ndim == 2 else u.values[:, None]
    gap = vals - g[:, None]
    worst = float(gap.min())
    if worst < -tol:
        i, n = np.unravel_index(np.argmin(gap), gap.shape)
        raise InvariantViolation(
            f"surface falls {-worst:.3e} below the obstacle at "
            f"x = {x[i]:.4f} (time level {n}); tolerance {tol:.3e}")
    labels = (gap > tol).astype(np.int8)
    bnd = [crossings(vals[:, n], g, x, tol) for n in range(vals.shape[1])]
    return RegionPartition(labels=labels, boundary=bnd, tol=tol)


@dataclass(frozen=True)
class SmoothFitReport:
    """One-sided derivative mismatch across the free boundary.

    ``max_gap`` is the worst boundary point; ``median_gap`` the median
    over all detected boundary points -- a steadier refinement-study
    statistic, since the worst point carries the full boundary-location
    quantization jitter of one cell.
    """

    max_gap: float
    median_gap: float
    gaps: tuple          # (time_index, x_boundary, gap) triples
    grad_max: float
    unreliable: bool     # boundary within 3 nodes of the domain edge


def smooth_fit_gap(u: GridFunction, payoff, contact_tol: float | None = None,
                   expiry_layer: float = 0.02) -> SmoothFitReport:
    """Measure the jump of the space derivative across the free boundary.

    ``u`` is the backward-time surface.  Boundary points are the edges of
    the contact set (``u - g <= contact_tol``; exact zeros under
    projection, so the default tolerance is rounding-level).  One-sided
    slopes use second-order three-point quotients from nodes strictly on
    each side of the edge, so the stopping-side slope is the payoff's and
    the gap is the physical matching defect.  Columns within
    ``expiry_layer`` of the terminal time are skipped: the payoff kink's
    start-up transient is below grid resolution there at any step size.
    """
    x = u.grid.nodes
    h = u.grid.h
    interior = u.grid.interior
    g = np.asarray(payoff(x), dtype=float)
    if contact_tol is None:
        contact_tol = 1e-10 * max(1.0, float(np.max(np.abs(g))))
    vals = u.values if u.values.ndim == 2 else u.values[:, None]
    n_time = vals.shape[1]
    last = n_time - max(1, int(np.ceil(expiry_layer * n_time))) \
        if n_time > 1 else n_time
    gaps = []
    unreliable = False
    grad_max = 0.0
    for n in range(last):
        col = vals[:, n]
        grad_max = max(grad_max, float(
            np.max(np.abs(col[2:] - col[:-2])) / (2.0 * h)))
        contact = (col - g) <= contact_tol
        for i in np.nonzero(contact[:-1] != contact[1:])[0]:
            # nodes <= i on one side of the edge, >= i+1 on the other;
            # edges in the padding (e.g. where a tail decays through the
            # tolerance) are not free-boundary points
            if not (interior[i] or interior[i + 1]):
                continue
            if i < 2 or i + 4 >= x.size:
                unreliable = True
                continue
            xb = 0.5 * (x[i] + x[i + 1])
            left = (3.0 * col[i] - 4.0 * col[i - 1] + col[i - 2]) \
                / (2.0 * h)
            right = (-3.0 * col[i + 1] + 4.0 * col[i + 2] - col[i + 3]) \
                / (2.0 * h)
            gaps.append((n, float(xb), float(abs(left - right))))
    all_gaps = [gp for _, _, gp in gaps]
    max_gap = max(all_gaps, default=0.0)
    median_gap = float(np.median(all_gaps)) if all_gaps else 0.0
    return SmoothFitReport(max_gap=max_gap, median_gap=median_gap,
                           gaps=tuple(gaps), grad_max=grad_max,
                           unreliable=unreliable)


def holder_seminorm(u: GridFunction, exp_x: float, exp_t: float,
                    window: tuple | None = None) -> float:
    """Discrete Holder quotient, split into pure-space and pure-time parts.

    Maximizes ``|f(x,t) - f(x',t)| / |x - x'|**exp_x`` over spatial pairs
    closer than the localization radius (one unit, capped at a quarter of
    the domain width) and the analogous time quotient, returning the
    larger of the two.
    """
    grid = u.grid
    vals = u.values if u.values.ndim == 2 else u.values[:, None]
    x = grid.nodes
    if window is not None:
        mask = (x >= window[0]) & (x <= window[1])
        if not mask.any():
            raise ParameterError("window contains no grid nodes")
        vals = vals[mask, :]
        x = x[mask]
    rho = min(1.0, 0.25 * (grid.x_hi - grid.x_lo + 2.0 * grid.pad))
    best = 0.0
    k_max = int(min(np.floor(rho / grid.h), x.size - 1))
    for k in range(1, k_max + 1):
        diff = np.max(np.abs(vals[k:, :] - vals[:-k, :]))
        best = max(best, diff / (k * grid.h) ** exp_x)
    if vals.shape[1] > 1:
        dt = grid.dt
        m_max = int(min(np.floor(rho / dt), vals.shape[1] - 1))
        for m in range(1, m_max + 1):
            diff = np.max(np.abs(vals[:, m:] - vals[:, :-m]))
            best = max(best, diff / (m * dt) ** exp_t)
    return float(best)


def parabolic_norms(u: GridFunction, p: float,
                    window: tuple, t0: float = 0.0) -> dict:
    """Measure-weighted L^p norms of first and second differences.

    Restricted to the space window and to (backward) times ``>= t0``;
    weighting by the space-time cell measure makes values comparable
    across refinement levels.  Returns ``{"u_t": ., "u_x": ., "u_xx": .,
    "u_xx_max": .}``.
    """
    grid = u.grid
    vals = u.values
    if vals.ndim != 2 or vals.shape[1] < 3:
        raise ParameterError("need a full space-time surface")
    x = grid.nodes
    times = grid.times
    xm = (x >= window[0]) & (x <= window[1])
    tm = times >= t0 - 1e-12
    if xm.sum() < 3 or tm.sum() < 3:
        raise ParameterError("window too small for second differences")
    h, dt = grid.h, grid.dt
    u_t = (vals[:, 2:] - vals[:, :-2]) / (2.0 * dt)
    u_x = (vals[2:, :] - vals[:-2, :]) / (2.0 * h)
    u_xx = (vals[2:, :] - 2.0 * vals[1:-1, :] + vals[:-2, :]) / (h * h)

    def _norm(arr, xmask, tmask):
        sub = np.abs(arr[xmask, :][:, tmask])
        return float((np.sum(sub ** p) * h * dt) ** (1.0 / p))

    out = {
        "u_t": _norm(u_t, xm, tm[1:-1]),
        "u_x": _norm(u_x, xm[1:-1], tm),
        "u_xx": _norm(u_xx, xm[1:-1], tm),
        "u_xx_max": float(np.max(np.abs(u_xx[xm[1:-1], :][:, tm]))),
    }
    return out


def sobolev_stability(surfaces: Sequence[GridFunction], p: float,
                      window: tuple, t0: float = 0.0) -> dict:
    """Compare difference-quotient norms across refinement levels.

    Returns per-level :func:`parabolic_norms` tables plus, for each
    quantity, the ratio of the extreme values across levels; stability
    means the integral norms stay within a factor ~2 while the pointwise
    max is allowed to grow.
    """
    if len(surfaces) < 2:
        raise ParameterError("need at least two refinement levels")
    tables = [parabolic_norms(s, p, window, t0) for s in surfaces]
    ratios = {}
    for key in ("u_t", "u_x", "u_xx"):
        vals = [t[key] for t in tables]
        lo, hi = min(vals), max(vals)
        ratios[key] = float(hi / lo) if lo > 0 else np.inf
    return {"levels": tables, "ratios": ratios,
            "max_growth": [t["u_xx_max"] for t in tables]}


class CheckResult(NamedTuple):
    passed: bool
    observed: float
    bound: float


def lemma_suite(report, payoff, grid, c: float = 10.0) -> dict:
    """A-priori bound checks on a penalized solve report.

    ``report`` is duck-typed: needs ``residuals`` (with ``v_min``,
    ``v_max``, ``obstacle_gap``, ``penalty_min``, ``penalty_max``),
    ``anchor``, and optionally ``grad_max_per_eps``.  Tolerance is
    ``c * (h**2 + dt) + 1e-9``.
    """
    tol = c * (grid.h ** 2 + grid.dt) + 1e-9
    res = report.residuals
    bound_hi = payoff.bound + 1.0
    checks = {
        "lower_bound": CheckResult(res["v_min"] >= -tol,
                                   res["v_min"], -tol),
        "upper_bound": CheckResult(res["v_max"] <= bound_hi + tol,
                                   res["v_max"], bound_hi + tol),
    }
    if "obstacle_gap" in res:
        checks["obstacle"] = CheckResult(res["obstacle_gap"] >= -tol,
                                         res["obstacle_gap"], -tol)
    if "penalty_min" in res:
        checks["penalty_lower"] = CheckResult(
            res["penalty_min"] >= report.anchor - tol,
            res["penalty_min"], report.anchor - tol)
        checks["penalty_upper"] = CheckResult(
            res["penalty_max"] <= tol, res["penalty_max"], tol)
    grads = list(getattr(report, "grad_max_per_eps", []) or [])
    if len(grads) >= 2:
        spread = (max(grads) - min(grads)) / max(max(grads), 1e-300)
        checks["gradient_spread"] = CheckResult(spread < 0.20, spread, 0.20)
    return checks
