"""Space-time grids, grid functions with far-field extension, coefficients.

The spatial grid covers an interior window ``[x_lo, x_hi]`` plus symmetric
padding so nonlocal operators can shift reads by the jump truncation
radius; reads beyond even the padded range are supplied by an extension
rule.  Time runs forward from 0 (initial data) to ``t_final``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigError, ParameterError

__all__ = [
    "SpaceTimeGrid",
    "GridFunction",
    "CoefficientField",
    "EXTENSION_RULES",
]

EXTENSION_RULES = ("clamp_payoff", "linear", "zero")


@dataclass(frozen=True)
class SpaceTimeGrid:
    """Uniform padded space grid crossed with a uniform time grid.

    ``nx`` counts spatial intervals across the padded range, so there are
    ``nx + 1`` nodes with spacing ``h = (x_hi - x_lo + 2*pad) / nx``;
    likewise ``nt`` time intervals of length ``dt = t_final / nt``.

    Parameters
    ----------
    x_lo, x_hi : float
        Interior window of interest (reported values live here).
    pad : float
        Padding width on each side, >= 1.
    nx : int
        Number of spatial intervals (>= 8).
    t_final : float
        Horizon, > 0.
    nt : int
        Number of time steps (>= 1).
    """

    x_lo: float
    x_hi: float
    pad: float
    nx: int
    t_final: float
    nt: int

    def __post_init__(self):
        if self.x_hi <= self.x_lo:
            raise ParameterError("grid: need x_hi > x_lo")
        if self.pad < 1.0:
            raise ParameterError("grid: padding must be >= 1")
        if self.nx < 8:
            raise ParameterError("grid: need at least 8 spatial intervals")
        if self.t_final <= 0.0:
            raise ParameterError("grid: horizon must be > 0")
        if self.nt < 1:
            raise ParameterError("grid: need at least 1 time step")

    @property
    def h(self) -> float:
        return (self.x_hi - self.x_lo + 2.0 * self.pad) / self.nx

    @property
    def dt(self) -> float:
        return self.t_final / self.nt

    @property
    def nodes(self) -> np.ndarray:
        return self.x_lo - self.pad + self.h * np.arange(self.nx + 1)

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.nt + 1)

    @property
    def interior(self) -> np.ndarray:
        """Boolean mask of nodes inside [x_lo, x_hi]."""
        x = self.nodes
        return (x >= self.x_lo - 1e-12) & (x <= self.x_hi + 1e-12)

    def refined(self, k: int = 1) -> "SpaceTimeGrid":
        """Grid with space and time steps halved ``k`` times."""
        f = 2 ** k
        return SpaceTimeGrid(self.x_lo, self.x_hi, self.pad,
                             self.nx * f, self.t_final, self.nt * f)


@dataclass
class GridFunction:
    """Values on the padded spatial nodes plus a far-field extension rule.

    ``values`` has the space axis first: shape ``(nx+1,)`` for a single
    slice or ``(nx+1, nt+1)`` for a full surface.  Reads beyond the padded
    range use ``extension``:

    * ``clamp_payoff`` -- evaluate ``payoff`` at the outside point
    * ``linear``       -- extrapolate from the last edge slope
    * ``zero``         -- zero outside
    """

    grid: SpaceTimeGrid
    values: np.ndarray
    extension: str = "clamp_payoff"
    payoff: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape[0] != self.grid.nx + 1:
            raise ParameterError(
                f"grid function: leading axis {self.values.shape[0]} != "
                f"node count {self.grid.nx + 1}")
        if self.extension not in EXTENSION_RULES:
            raise ParameterError(f"unknown extension rule {self.extension!r}")
        if self.extension == "clamp_payoff" and self.payoff is None:
            raise ParameterError("clamp_payoff extension needs a payoff")

    def slice_at(self, n: int) -> np.ndarray:
        return self.values if self.values.ndim == 1 else self.values[:, n]

    def extended(self, n_left: int, n_right: int, n: int = 0) -> np.ndarray:
        """Values on ``n_left`` extra nodes left + grid + ``n_right`` right."""
        return extend_slice(self.grid, self.slice_at(n), self.extension,
                            self.payoff, n_left, n_right)


def extend_slice(grid: SpaceTimeGrid, vals: np.ndarray, extension: str,
                 payoff, n_left: int, n_right: int) -> np.ndarray:
    """Materialize a slice with its extension rule applied on both sides."""
    h = grid.h
    x0 = grid.nodes[0]
    x1 = grid.nodes[-1]
    left_x = x0 - h * np.arange(n_left, 0, -1)
    right_x = x1 + h * np.arange(1, n_right + 1)
    if extension == "zero":
        left = np.zeros(n_left)
        right = np.zeros(n_right)
    elif extension == "linear":
        sl = (vals[1] - vals[0]) / h
        sr = (vals[-1] - vals[-2]) / h
        left = vals[0] + sl * (left_x - x0)
        right = vals[-1] + sr * (right_x - x1)
    elif extension == "clamp_payoff":
        left = np.asarray(payoff(left_x), dtype=float)
        right = np.asarray(payoff(right_x), dtype=float)
    else:
        raise ParameterError(f"unknown extension rule {extension!r}")
    return np.concatenate([left, vals, right])


@dataclass(frozen=True)
class CoefficientField:
    """Diffusion ``a``, drift ``b`` and discount ``r`` fields on space-time.

    Fields are callables ``(x_array, t) -> array``; use
    :meth:`CoefficientField.constants` for the constant case.  ``a`` must
    stay above the ellipticity floor and ``r`` nonnegative (checked on the
    grid by :func:`validate_coefficients`).
    """

    a: Callable[[np.ndarray, float], np.ndarray]
    b: Callable[[np.ndarray, float], np.ndarray]
    r: Callable[[np.ndarray, float], np.ndarray]
    lambda_floor: float = 1e-8
    time_dependent: bool = False

    def __post_init__(self):
        if self.lambda_floor <= 0.0:
            raise ParameterError("ellipticity floor must be > 0")

    @staticmethod
    def constants(a: float, b: float, r: float,
                  lambda_floor: float | None = None) -> "CoefficientField":
        if a <= 0.0:
            raise ParameterError("diffusion coefficient must be > 0")
        if r < 0.0:
            raise ParameterError("discount rate must be >= 0")
        floor = 0.5 * a if lambda_floor is None else lambda_floor
        av, bv, rv = float(a), float(b), float(r)
        return CoefficientField(
            a=lambda x, t: np.full_like(np.asarray(x, dtype=float), av),
            b=lambda x, t: np.full_like(np.asarray(x, dtype=float), bv),
            r=lambda x, t: np.full_like(np.asarray(x, dtype=float), rv),
            lambda_floor=floor,
            time_dependent=False,
        )

    def maxima(self, grid: SpaceTimeGrid) -> tuple[float, float, float]:
        """(max a, max |b|, max r) over the padded grid and time levels."""
        x = grid.nodes
        ts = grid.times if self.time_dependent else grid.times[:1]
        amax = bmax = rmax = 0.0
        for t in ts:
            amax = max(amax, float(np.max(self.a(x, float(t)))))
            bmax = max(bmax, float(np.max(np.abs(self.b(x, float(t))))))
            rmax = max(rmax, float(np.max(self.r(x, float(t)))))
        return amax, bmax, rmax


def validate_coefficients(coeffs: CoefficientField, grid: SpaceTimeGrid) -> None:
    """Check ellipticity and discount sign on every node/time level."""
    x = grid.nodes
    ts = grid.times if coeffs.time_dependent else grid.times[:1]
    for t in ts:
        a = np.asarray(coeffs.a(x, float(t)), dtype=float)
        r = np.asarray(coeffs.r(x, float(t)), dtype=float)
        if np.any(a < coeffs.lambda_floor - 1e-15):
            raise ConfigError(
                f"diffusion drops below ellipticity floor {coeffs.lambda_floor} "
                f"at t={float(t):g}")
        if np.any(r < 0.0):
            raise ConfigError(f"negative discount rate at t={float(t):g}")
