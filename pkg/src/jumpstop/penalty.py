"""Penalty family driving the obstacle constraint in the Cauchy problem.

The penalty at separation ``eps`` is the smooth mollification of the
piecewise-linear template ``min(-(2*p0/eps)*y + p0, 0)``: it vanishes for
``y >= eps/2 + width``, passes exactly through ``(0, p0)``, and falls off
linearly with slope ``-2*p0/eps`` for negative ``y``.  The anchor depth
``p0`` is chosen from the problem data so that subtracting the penalty
can dominate every term of the generator applied to the obstacle.

Mollification reuses the bump-kernel averaging of :mod:`jumpstop.payoff`
at width ``eps/8``; the template is linear within ``eps/2`` of 0 and
identically zero beyond ``eps/2``, so a width below ``eps/2`` keeps both
the anchor value and the vanishing region exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import levy
from .errors import ParameterError
from .grids import CoefficientField, SpaceTimeGrid
from .levy import LevyModel
from .payoff import PayoffSpec, kernel_average

__all__ = ["PenaltySpec", "anchor", "build"]


@dataclass(frozen=True)
class PenaltySpec:
    """Smooth penalty evaluator; immutable, vectorized, pure.

    ``value`` is nonpositive, nondecreasing, concave, equals ``p0`` at 0,
    and vanishes for ``y >= eps/2 + kernel_width``.
    """

    eps: float
    p0: float
    kernel_width: float

    @property
    def slope_max(self) -> float:
        """Largest slope of the template (and hence of the evaluator)."""
        return -2.0 * self.p0 / self.eps

    @property
    def support_hi(self) -> float:
        """Evaluator is identically zero at and beyond this point."""
        return 0.5 * self.eps + self.kernel_width

    def _template(self, y: np.ndarray) -> np.ndarray:
        return np.minimum(self.slope_max * y + self.p0, 0.0)

    def value(self, y) -> np.ndarray | float:
        """Penalty at separation ``y = v - g`` (scalar or array)."""
        arr = np.asarray(y, dtype=float)
        out = self._eval(arr.ravel()).reshape(arr.shape)
        return float(out) if arr.ndim == 0 else out

    def slope(self, y) -> np.ndarray | float:
        """Derivative of the penalty (scalar or array)."""
        arr = np.asarray(y, dtype=float)
        out = self._eval_slope(arr.ravel()).reshape(arr.shape)
        return float(out) if arr.ndim == 0 else out

    def _eval(self, y: np.ndarray) -> np.ndarray:
        if self.p0 == 0.0:
            return np.zeros_like(y)
        kink = 0.5 * self.eps
        w = self.kernel_width
        out = self._template(y)
        band = np.abs(y - kink) < w
        if np.any(band):
            out[band] = kernel_average(self._template, y[band], w, (kink,))
        return out

    def _eval_slope(self, y: np.ndarray) -> np.ndarray:
        if self.p0 == 0.0:
            return np.zeros_like(y)
        kink = 0.5 * self.eps
        w = self.kernel_width
        s = self.slope_max
        out = np.where(y < kink, s, 0.0)
        band = np.abs(y - kink) < w
        if np.any(band):
            out[band] = kernel_average(
                lambda z: np.where(z < kink, s, 0.0), y[band], w, (kink,))
        return out


def anchor(coeffs: CoefficientField, payoff: PayoffSpec, model: LevyModel,
           grid: SpaceTimeGrid | None = None) -> float:
    """Penalty depth from the problem data (a nonpositive number).

    Returns ``-(a0*J + b0*L + r0*K + J*small_var(1) + K*big_mass)`` where
    ``a0, b0, r0`` are the maxima of the diffusion, |drift| and discount
    over the grid (or a wide probe window when no grid is given), ``K, L,
    J`` the payoff's bound, Lipschitz and semiconvexity constants, and the
    last two terms the second moment of jumps up to size 1 and the mass
    beyond 1.
    """
    if grid is not None:
        a0, b0, r0 = coeffs.maxima(grid)
    else:
        x = np.linspace(-20.0, 20.0, 4001)
        a0 = float(np.max(coeffs.a(x, 0.0)))
        b0 = float(np.max(np.abs(coeffs.b(x, 0.0))))
        r0 = float(np.max(coeffs.r(x, 0.0)))
    if model.is_trivial:
        small_var = big_mass = 0.0
    else:
        t = levy.tails(model, 1.0)
        small_var, big_mass = t.small_var, t.big_mass
    kk, ll, jj = payoff.bound, payoff.lipschitz, payoff.semiconvexity
    return -(a0 * jj + b0 * ll + r0 * kk + jj * small_var + kk * big_mass)


def build(eps: float, p0: float) -> PenaltySpec:
    """Penalty evaluator at separation scale ``eps`` with depth ``p0``."""
    if not 0.0 < eps < 1.0:
        raise ParameterError("penalty separation must lie in (0, 1)")
    if p0 > 0.0:
        raise ParameterError("penalty depth must be <= 0")
    return PenaltySpec(eps=float(eps), p0=float(p0),
                       kernel_width=float(eps) / 8.0)
