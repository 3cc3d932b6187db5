"""Jump-size measures (Levy measures) and their tail integrals.

A jump measure is described by a density ``rho(y)`` on the punctured real
line satisfying a power bound ``rho(y) <= M / |y|**(1 + alpha)`` for
``0 < |y| <= 1`` with singularity order ``alpha in [0, 2)``.  Supported
families:

* ``none``             -- no jumps (``rho == 0``)
* ``merton``           -- compound Poisson, normal jump sizes
* ``kou``              -- compound Poisson, double-exponential jump sizes
* ``variance_gamma``   -- infinite activity, finite variation (``alpha = 0``)
* ``nig``              -- normal inverse Gaussian (``alpha = 1``)
* ``tempered_stable``  -- two-sided tempered power law (includes CGMY)

The singularity order ``alpha`` and the bound constant ``M`` are derived
from the family parameters, never user supplied.  For the
subordinated-Brownian families the order equals twice the subordinator
index: 0 for variance gamma, 1 for NIG.

Integrals against the density use adaptive Gauss-Kronrod quadrature on
panels refining geometrically toward the singular point, with closed forms
(incomplete gamma, normal/exponential moments) substituted where the family
admits them.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
from scipy import integrate, special

from .errors import DomainError, NumericalError, ParameterError, UnsupportedOperation

__all__ = [
    "LevyModel",
    "TailIntegrals",
    "none",
    "merton",
    "kou",
    "variance_gamma",
    "nig",
    "tempered_stable",
    "cgmy",
    "density",
    "singularity_exponent",
    "tails",
    "integrate_density",
    "truncation_radius",
    "exp_compensator",
]

#: default relative tolerance for adaptive tail quadrature
QUAD_REL_TOL = 1e-10

#: inner cutoff below which a frozen power-law floor replaces quadrature
_FLOOR = 1e-14


@dataclass(frozen=True)
class LevyModel:
    """Jump measure with density ``rho``, singularity order and bound.

    Instances come from the family constructors (:func:`merton`,
    :func:`nig`, ...), which validate parameters and derive ``alpha`` and
    ``sing_const``.

    Attributes
    ----------
    family : str
        One of ``none``, ``merton``, ``kou``, ``variance_gamma``, ``nig``,
        ``tempered_stable``.
    params : dict
        Validated family parameters.
    alpha : float
        Order of the small-jump singularity, in ``[0, 2)``.
    sing_const : float
        Constant ``M`` with ``rho(y) <= M / |y|**(1+alpha)`` on
        ``0 < |y| <= 1``.
    """

    family: str
    params: Mapping[str, float] = field(default_factory=dict)
    alpha: float = 0.0
    sing_const: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.alpha < 2.0:
            raise ParameterError(f"singularity order {self.alpha} outside [0, 2)")

    @property
    def finite_variation(self) -> bool:
        """True when the small jumps have a finite first absolute moment."""
        return self.alpha < 1.0

    @property
    def is_trivial(self) -> bool:
        return self.family == "none"


# ---------------------------------------------------------------------------
# family constructors
# ---------------------------------------------------------------------------

def none() -> LevyModel:
    """Model with no jump component (density identically zero)."""
    return LevyModel("none", {}, alpha=0.0, sing_const=1.0)


def merton(intensity: float, jump_mean: float, jump_std: float) -> LevyModel:
    """Compound Poisson with normal jump sizes N(jump_mean, jump_std**2)."""
    if intensity < 0.0:
        raise ParameterError("merton: intensity must be >= 0")
    if jump_std <= 0.0:
        raise ParameterError("merton: jump_std must be > 0")
    # rho <= peak everywhere, so rho * |y|^(1+0) <= peak on |y| <= 1
    peak = intensity / (jump_std * math.sqrt(2.0 * math.pi))
    return LevyModel(
        "merton",
        {"intensity": float(intensity), "jump_mean": float(jump_mean),
         "jump_std": float(jump_std)},
        alpha=0.0,
        sing_const=max(peak, 1e-300),
    )


def kou(intensity: float, p_up: float, eta_up: float, eta_down: float) -> LevyModel:
    """Compound Poisson with double-exponential jump sizes.

    Up-jumps Exp(eta_up) with probability ``p_up``, down-jumps Exp(eta_down)
    with probability ``1 - p_up``.
    """
    if intensity < 0.0:
        raise ParameterError("kou: intensity must be >= 0")
    if not 0.0 <= p_up <= 1.0:
        raise ParameterError("kou: p_up must lie in [0, 1]")
    if eta_up <= 0.0 or eta_down <= 0.0:
        raise ParameterError("kou: jump-size rates must be > 0")
    peak = intensity * max(p_up * eta_up, (1.0 - p_up) * eta_down)
    return LevyModel(
        "kou",
        {"intensity": float(intensity), "p_up": float(p_up),
         "eta_up": float(eta_up), "eta_down": float(eta_down)},
        alpha=0.0,
        sing_const=max(peak, 1e-300),
    )


def variance_gamma(sigma: float, nu: float, theta: float) -> LevyModel:
    """Variance-gamma model (Brownian motion on a gamma clock).

    Density ``(C/|y|) exp(-lam_minus |y|)`` for ``y < 0`` and
    ``(C/y) exp(-lam_plus y)`` for ``y > 0``, with ``C = 1/nu`` and
    tempering rates derived from ``(sigma, nu, theta)``.
    """
    if sigma <= 0.0 or nu <= 0.0:
        raise ParameterError("variance_gamma: sigma and nu must be > 0")
    c = 1.0 / nu
    disc = math.sqrt(theta * theta + 2.0 * sigma * sigma / nu)
    lam_plus = (disc - theta) / (sigma * sigma)
    lam_minus = (disc + theta) / (sigma * sigma)
    return LevyModel(
        "variance_gamma",
        {"sigma": float(sigma), "nu": float(nu), "theta": float(theta),
         "c": c, "lam_minus": lam_minus, "lam_plus": lam_plus},
        alpha=0.0,
        sing_const=c,
    )


def nig(shape: float, skew: float, scale: float) -> LevyModel:
    """Normal inverse Gaussian model.

    ``rho(y) = (scale*shape/pi) * exp(skew*y) * K1(shape*|y|) / |y|`` with
    ``|skew| < shape``.  Singularity order 1.
    """
    if shape <= 0.0 or scale <= 0.0:
        raise ParameterError("nig: shape and scale must be > 0")
    if abs(skew) >= shape:
        raise ParameterError("nig: need |skew| < shape for integrable tails")
    # y^2 rho(y) = (scale/pi) * (shape|y|) K1(shape|y|) * e^{skew y}; since
    # z*K1(z) decreases from 1, M = (scale/pi) * e^{|skew|} works on |y| <= 1.
    m = scale / math.pi * math.exp(abs(skew))
    return LevyModel(
        "nig",
        {"shape": float(shape), "skew": float(skew), "scale": float(scale)},
        alpha=1.0,
        sing_const=m,
    )


def tempered_stable(c_minus: float, c_plus: float, alpha_minus: float,
                    alpha_plus: float, lam_minus: float, lam_plus: float) -> LevyModel:
    """Two-sided tempered power-law density.

    ``rho(y) = c_minus |y|**(-1-alpha_minus) exp(-lam_minus |y|)`` for
    ``y < 0`` and ``c_plus y**(-1-alpha_plus) exp(-lam_plus y)`` for
    ``y > 0``.  Requires ``alpha_pm < 2`` and ``lam_pm > 0``.
    """
    if c_minus < 0.0 or c_plus < 0.0:
        raise ParameterError("tempered_stable: side weights must be >= 0")
    if c_minus == 0.0 and c_plus == 0.0:
        raise ParameterError("tempered_stable: at least one side weight must be > 0")
    if alpha_minus >= 2.0 or alpha_plus >= 2.0:
        raise ParameterError("tempered_stable: stability indices must be < 2")
    if lam_minus <= 0.0 or lam_plus <= 0.0:
        raise ParameterError("tempered_stable: tempering rates must be > 0")
    exps = [0.0]
    if c_minus > 0.0:
        exps.append(alpha_minus)
    if c_plus > 0.0:
        exps.append(alpha_plus)
    alpha = max(exps)
    # rho(y)|y|^{1+alpha} = c_pm |y|^{alpha-alpha_pm} e^{-lam|y|} <= c_pm
    # on |y| <= 1 since alpha >= alpha_pm.
    m = max(c_minus, c_plus)
    return LevyModel(
        "tempered_stable",
        {"c_minus": float(c_minus), "c_plus": float(c_plus),
         "alpha_minus": float(alpha_minus), "alpha_plus": float(alpha_plus),
         "lam_minus": float(lam_minus), "lam_plus": float(lam_plus)},
        alpha=alpha,
        sing_const=m,
    )


def cgmy(c: float, g: float, m: float, y: float) -> LevyModel:
    """CGMY convenience wrapper: symmetric-index tempered stable."""
    return tempered_stable(c, c, y, y, g, m)


# ---------------------------------------------------------------------------
# density evaluation
# ---------------------------------------------------------------------------

def _density_array(model: LevyModel, y: np.ndarray) -> np.ndarray:
    """Vectorized density on nonzero ``y`` (no domain checks)."""
    y = np.asarray(y, dtype=float)
    p = model.params
    if model.family == "none":
        return np.zeros_like(y)
    ay = np.abs(y)
    if model.family == "merton":
        z = (y - p["jump_mean"]) / p["jump_std"]
        return p["intensity"] * np.exp(-0.5 * z * z) / (p["jump_std"] * math.sqrt(2.0 * math.pi))
    if model.family == "kou":
        return np.where(
            y > 0.0,
            p["intensity"] * p["p_up"] * p["eta_up"] * np.exp(-p["eta_up"] * ay),
            p["intensity"] * (1.0 - p["p_up"]) * p["eta_down"] * np.exp(-p["eta_down"] * ay),
        )
    if model.family == "variance_gamma":
        rate = np.where(y > 0.0, p["lam_plus"], p["lam_minus"])
        with np.errstate(divide="ignore"):
            return p["c"] / ay * np.exp(-rate * ay)
    if model.family == "nig":
        # scaled Bessel keeps exp(skew*y)*K1(shape*|y|) finite for large |y|
        with np.errstate(divide="ignore", over="ignore"):
            return (p["scale"] * p["shape"] / math.pi) \
                * np.exp(p["skew"] * y - p["shape"] * ay) \
                * special.k1e(p["shape"] * ay) / ay
    if model.family == "tempered_stable":
        up = y > 0.0
        cc = np.where(up, p["c_plus"], p["c_minus"])
        aa = np.where(up, p["alpha_plus"], p["alpha_minus"])
        rate = np.where(up, p["lam_plus"], p["lam_minus"])
        with np.errstate(divide="ignore", over="ignore"):
            return cc * ay ** (-1.0 - aa) * np.exp(-rate * ay)
    raise ParameterError(f"unknown family {model.family!r}")


def density(model: LevyModel, y):
    """Evaluate the jump density ``rho`` at ``y`` (scalar or array).

    Raises
    ------
    DomainError
        If any evaluation point is 0 (the singular point of the measure).
    """
    arr = np.asarray(y, dtype=float)
    if np.any(arr == 0.0):
        raise DomainError("jump density is singular at y = 0")
    out = _density_array(model, arr)
    return float(out) if arr.ndim == 0 else out


def singularity_exponent(model: LevyModel) -> float:
    """Order of the small-jump singularity (0 for finite-activity families)."""
    return model.alpha


# ---------------------------------------------------------------------------
# quadrature engine
# ---------------------------------------------------------------------------

def _one_side_panels(lo: float, hi: float) -> list[tuple[float, float]]:
    """Panels of [lo, hi], 0 <= lo < hi <= inf, refining toward 0.

    Geometric subdivision keeps per-panel integrand variation modest so the
    Gauss-Kronrod rule converges fast even near a power singularity.
    """
    panels: list[tuple[float, float]] = []
    a = max(lo, _FLOOR)
    cap = min(hi, 1.0)
    while a < cap:
        b = min(cap, a * 4.0)
        panels.append((a, b))
        a = b
    if hi > 1.0:
        a = max(lo, 1.0)
        stop = hi if math.isfinite(hi) else 64.0 * max(1.0, a)
        while a < stop:
            b = min(stop, a * 2.0)
            panels.append((a, b))
            a = b
        if not math.isfinite(hi):
            panels.append((stop, math.inf))
    return panels


def integrate_density(model: LevyModel, f: Callable[[float], float],
                      lo: float, hi: float, rel_tol: float = QUAD_REL_TOL,
                      side: str = "+") -> float:
    """Adaptive quadrature of ``integral_lo^hi f(t) rho(side*t) dt``.

    Requires ``0 <= lo < hi <= inf``; ``side`` selects which half line of
    the measure is sampled.  When ``lo == 0`` the sliver below the inner
    cutoff is replaced by a power-law floor matched to the local behavior
    of ``f * rho`` (exact to leading order, negligible at the default
    cutoff).
    """
    if lo < 0.0 or hi <= lo:
        raise ParameterError("integrate_density expects 0 <= lo < hi")
    if side not in ("+", "-"):
        raise ParameterError("side must be '+' or '-'")
    if model.is_trivial:
        return 0.0
    sgn = 1.0 if side == "+" else -1.0

    def g(t: float) -> float:
        return float(f(t)) * float(_density_array(model, np.asarray(sgn * t)))

    panels = _one_side_panels(lo, hi)
    # rough midpoint scale so deep-tail panels can use an absolute floor
    # instead of fighting for pure relative accuracy at denormal magnitudes
    roughs = []
    for a, b in panels:
        m = 2.0 * a if not math.isfinite(b) else math.sqrt(a * b)
        w = 2.0 * a if not math.isfinite(b) else (b - a)
        roughs.append(abs(g(m)) * w)
    scale = max(sum(roughs), 1e-300)

    total = 0.0
    with warnings.catch_warnings():
        # panels near a power singularity can exhaust subdivisions while
        # already at rounding level; accuracy is pinned by frozen-value
        # tests, so the advisory warnings are noise here
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for (a, b), rough in zip(panels, roughs):
            if rough < 1e-16 * scale:
                total += rough
                continue
            val, _ = integrate.quad(g, a, b, epsabs=1e-14 * scale,
                                    epsrel=rel_tol, limit=200)
            total += val
    if lo == 0.0:
        # local model f*rho ~ c * y^(k-1-alpha) below the cutoff
        t = _FLOOR
        k = _local_power(f)
        if k is not None and k > model.alpha:
            total += g(t) * t / (k - model.alpha)
    return total


def _local_power(f) -> float | None:
    """Estimate k with f(y) ~ c*y^k near 0 by probing two points."""
    y1, y2 = 1e-13, 2e-13
    f1, f2 = float(f(y1)), float(f(y2))
    if f1 == 0.0 or f2 == 0.0:
        return None
    return math.log(abs(f2 / f1)) / math.log(y2 / y1)


def _quad_signed(model: LevyModel, f, lo: float, hi: float, rel_tol: float) -> float:
    """integral f(y) rho(y) dy over a signed one-sided interval [lo, hi]."""
    if lo >= 0.0:
        return integrate_density(model, f, lo, hi, rel_tol, side="+")
    if hi > 0.0:
        raise ParameterError("interval must not straddle 0")
    return integrate_density(model, lambda t: f(-t), max(-hi, 0.0), -lo,
                             rel_tol, side="-")


# --- closed forms ----------------------------------------------------------

def _upper_gamma(s: float, x: float) -> float:
    """Upper incomplete gamma for any real s (recurrence below s <= 0)."""
    if x <= 0.0:
        raise ParameterError("upper incomplete gamma needs x > 0")
    if s > 0.0:
        return float(special.gammaincc(s, x) * special.gamma(s))
    if s == 0.0:
        return float(special.exp1(x))
    return (_upper_gamma(s + 1.0, x) - x ** s * math.exp(-x)) / s


def _ts_power_integral(c: float, a: float, lam: float, k: float,
                       lo: float, hi: float) -> float:
    """integral_lo^hi y^k * c y^{-1-a} e^{-lam y} dy with 0 <= lo < hi <= inf."""
    if c == 0.0:
        return 0.0
    s = k - a
    hi_term = 0.0 if not math.isfinite(hi) else _upper_gamma(s, lam * hi)
    if lo <= 0.0:
        if s <= 0.0:
            raise UnsupportedOperation("divergent small-jump integral")
        lo_term = float(special.gamma(s))
    else:
        lo_term = _upper_gamma(s, lam * lo)
    return c * lam ** (a - k) * (lo_term - hi_term)


def _merton_trunc_moments(model: LevyModel, lo: float, hi: float):
    """(mass, signed mean, second moment) of the Merton measure on [lo, hi].

    The standardized mass is computed from upper-tail probabilities
    ``Q(z) = P(Z > z)`` so deep tails keep full relative accuracy.
    """
    p = model.params
    lam, mu, sd = p["intensity"], p["jump_mean"], p["jump_std"]
    a = (lo - mu) / sd
    b = (hi - mu) / sd

    def Q(z):
        if not math.isfinite(z):
            return 0.0 if z > 0 else 1.0
        return 0.5 * math.erfc(z / math.sqrt(2.0))

    def phi(z):
        return math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi) if math.isfinite(z) else 0.0

    if a >= 0.0:
        z0 = Q(a) - Q(b)
    elif b <= 0.0:
        z0 = Q(-b) - Q(-a)
    else:
        z0 = 1.0 - Q(-a) - Q(b)
    z1 = phi(a) - phi(b)
    ea = a * phi(a) if math.isfinite(a) else 0.0
    eb = b * phi(b) if math.isfinite(b) else 0.0
    z2 = z0 + ea - eb
    mass = lam * z0
    mean = lam * (mu * z0 + sd * z1)
    second = lam * (mu * mu * z0 + 2.0 * mu * sd * z1 + sd * sd * z2)
    return mass, mean, second


def _kou_exp_integral(rate: float, k: int, lo: float, hi: float) -> float:
    """integral_lo^hi y^k rate e^{-rate y} dy for k in {0,1,2}, lo >= 0."""
    def anti(x):
        e = math.exp(-rate * x)
        if k == 0:
            return e
        if k == 1:
            return e * (x + 1.0 / rate)
        return e * (x * x + 2.0 * x / rate + 2.0 / rate ** 2)

    top = 0.0 if not math.isfinite(hi) else anti(hi)
    return anti(lo) - top


def _side_moment(model: LevyModel, k: int, lo: float, hi: float, side: str,
                 rel_tol: float = QUAD_REL_TOL) -> float:
    """Signed ``integral y^k rho dy`` over one side; interval in |y| terms.

    ``side='+'`` integrates over [lo, hi], ``side='-'`` over [-hi, -lo].
    """
    p = model.params
    if model.is_trivial or hi <= lo:
        return 0.0
    sign = 1.0 if side == "+" else (-1.0) ** k
    if model.family == "tempered_stable":
        c, a, lam = ((p["c_plus"], p["alpha_plus"], p["lam_plus"]) if side == "+"
                     else (p["c_minus"], p["alpha_minus"], p["lam_minus"]))
        return sign * _ts_power_integral(c, a, lam, k, lo, hi)
    if model.family == "variance_gamma":
        lam = p["lam_plus"] if side == "+" else p["lam_minus"]
        return sign * _ts_power_integral(p["c"], 0.0, lam, k, lo, hi)
    if model.family == "merton":
        m = (_merton_trunc_moments(model, lo, hi) if side == "+"
             else _merton_trunc_moments(model, -hi, -lo))
        return m[k]  # already signed
    if model.family == "kou":
        lam, pu = p["intensity"], p["p_up"]
        w = lam * pu if side == "+" else lam * (1.0 - pu)
        rate = p["eta_up"] if side == "+" else p["eta_down"]
        return sign * w * _kou_exp_integral(rate, k, lo, hi)
    # adaptive fallback (nig)
    val = _quad_signed(model, lambda t: t ** k,
                       lo if side == "+" else -hi,
                       hi if side == "+" else -lo, rel_tol)
    return val


# ---------------------------------------------------------------------------
# tail integrals
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TailIntegrals:
    """Tail integrals of a jump measure at a fixed split radius ``eps``.

    Attributes
    ----------
    eps : float
        Small/large jump split radius, in ``(0, 1]``.
    small_var : float
        ``integral_{|y|<=eps} y^2 rho(y) dy``.
    comp_drift : float
        ``integral_{eps<|y|<=1} y rho(y) dy`` (signed).
    big_mass : float
        ``integral_{|y|>1} rho(y) dy``.
    big_mean_abs : float
        ``integral_{|y|>1} |y| rho(y) dy``.
    """

    eps: float
    small_var: float
    comp_drift: float
    big_mass: float
    big_mean_abs: float
    _fv_drift: float | None = None

    @property
    def fv_drift(self) -> float:
        """``integral_{|y|<=1} y rho(y) dy``; finite-variation models only."""
        if self._fv_drift is None:
            raise UnsupportedOperation(
                "small-jump mean is divergent for singularity order >= 1")
        return self._fv_drift


def tails(model: LevyModel, eps: float, rel_tol: float = QUAD_REL_TOL) -> TailIntegrals:
    """Small-jump variance, compensator drift and big-jump tails at split ``eps``.

    Parameters
    ----------
    model : LevyModel
    eps : float
        Split radius in ``(0, 1]``.
    rel_tol : float
        Relative tolerance of the adaptive-quadrature fallback; closed forms
        are used where the family admits them.
    """
    if not 0.0 < eps <= 1.0:
        raise ParameterError(f"split radius {eps} outside (0, 1]")
    sv = (_side_moment(model, 2, 0.0, eps, "+", rel_tol)
          + _side_moment(model, 2, 0.0, eps, "-", rel_tol))
    cd = (_side_moment(model, 1, eps, 1.0, "+", rel_tol)
          + _side_moment(model, 1, eps, 1.0, "-", rel_tol))
    bm = (_side_moment(model, 0, 1.0, math.inf, "+", rel_tol)
          + _side_moment(model, 0, 1.0, math.inf, "-", rel_tol))
    ba = (_side_moment(model, 1, 1.0, math.inf, "+", rel_tol)
          - _side_moment(model, 1, 1.0, math.inf, "-", rel_tol))
    fv = None
    if model.alpha < 1.0:
        try:
            fv = (_side_moment(model, 1, 0.0, 1.0, "+", rel_tol)
                  + _side_moment(model, 1, 0.0, 1.0, "-", rel_tol))
        except UnsupportedOperation:
            fv = None
    return TailIntegrals(eps, sv, cd, bm, ba, fv)


def truncation_radius(model: LevyModel, tol: float = 1e-8) -> float:
    """Smallest radius R >= 1 with ``integral_{|y|>R} (1+|y|) rho dy <= tol``."""
    if model.is_trivial:
        return 1.0

    def tail(r: float) -> float:
        mass = (_side_moment(model, 0, r, math.inf, "+")
                + _side_moment(model, 0, r, math.inf, "-"))
        mean_abs = (_side_moment(model, 1, r, math.inf, "+")
                    - _side_moment(model, 1, r, math.inf, "-"))
        return mass + mean_abs

    lo, hi = 1.0, 2.0
    if tail(lo) <= tol:
        return lo
    while tail(hi) > tol:
        lo, hi = hi, hi * 2.0
        if hi > 1e6:
            raise NumericalError(
                f"jump tail does not decay below {tol} by radius {hi}")
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if tail(mid) <= tol:
            hi = mid
        else:
            lo = mid
    return hi


def exp_compensator(model: LevyModel, rel_tol: float = QUAD_REL_TOL) -> float:
    """``integral (e^y - 1 - y 1_{|y|<=1}) rho(y) dy``.

    Used to place a model in martingale (risk-neutral) log-price coordinates
    for pricing cross-checks.  Requires the positive jump tail to decay
    faster than ``e^{-y}``.
    """
    if model.is_trivial:
        return 0.0
    p = model.params
    if model.family == "tempered_stable" and p["c_plus"] > 0.0 and p["lam_plus"] <= 1.0:
        raise ParameterError("exponential moment diverges: need lam_plus > 1")
    if model.family == "variance_gamma" and p["lam_plus"] <= 1.0:
        raise ParameterError("exponential moment diverges: need lam_plus > 1")
    if model.family == "kou" and p["p_up"] > 0.0 and p["eta_up"] <= 1.0:
        raise ParameterError("exponential moment diverges: need eta_up > 1")
    if model.family == "nig" and p["shape"] - p["skew"] <= 1.0:
        raise ParameterError("exponential moment diverges: need shape - skew > 1")

    # |y| <= 1: (e^y - 1 - y) ~ y^2/2, so the integrand is integrable
    inner = (_quad_signed(model, lambda t: math.expm1(t) - t, 0.0, 1.0, rel_tol)
             + _quad_signed(model, lambda t: math.expm1(t) - t, -1.0, 0.0, rel_tol))
    # positive tail: cap where e^t * rho(t) has decayed away (validated above
    # to decay exponentially), keeping the integrand finite for quadrature
    cap = 2.0
    while cap < 690.0:
        rho = float(_density_array(model, np.asarray(cap)))
        if rho == 0.0 or math.log(rho) + cap < -45.0:
            break
        cap *= 2.0
    outer = (_quad_signed(model, lambda t: math.expm1(t), 1.0, cap, rel_tol)
             + _quad_signed(model, lambda t: math.expm1(t), -math.inf, -1.0, rel_tol))
    return inner + outer
