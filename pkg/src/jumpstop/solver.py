"""IMEX time stepping for the penalized obstacle problem and its limits.

The equation is marched in the forward variable ``s`` with initial data
at ``s = 0``; the optimal-stopping value in natural (backward) time is
``u(x, t) = v(x, T - t)``.  One step treats the local
convection-diffusion-discount part implicitly (theta-weighted tridiagonal
solve, drift upwinded wherever the grid Peclet number demands it) and the
jump operator plus the penalty explicitly at the old level.

Three modes:

* ``penalized``  -- explicit penalty ``-p(v - g_eps)`` pushes the iterate
  above the mollified obstacle; driven along a decreasing separation
  schedule by :func:`solve_vi`.
* ``projected``  -- no penalty; after each implicit step the iterate is
  clamped to ``max(v, g)``.  Direct complementarity solve, used as the
  sharp cross-check of the penalized limit.
* ``european``   -- no obstacle at all (plain Cauchy problem, optional
  source term); used for closed-form comparisons and heat-kernel tests.

Stability of the explicit part is enforced at configuration time: the
step size must satisfy ``dt * (jump rate + explicit local rate + penalty
slope) <= 0.9`` so the explicit update keeps nonnegative diagonal weight.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import solve_banded

from . import generator, levy, penalty as penalty_mod
from .errors import ConfigError, NumericalError, ParameterError
from .generator import NonlocalOperator
from .grids import (CoefficientField, GridFunction, SpaceTimeGrid,
                    validate_coefficients)
from .levy import LevyModel
from .payoff import MollifiedPayoff, PayoffSpec, mollify
from .penalty import PenaltySpec

__all__ = [
    "SolveConfig",
    "SolveReport",
    "step_penalized",
    "solve_penalized",
    "solve_vi",
    "solve_european",
    "residual_vi",
    "backward_value",
    "required_nt",
    "plan_steps",
    "stability_fraction",
    "monotone_step_check",
]

MODES = ("penalized", "projected", "european")
DEFAULT_EPS_SCHEDULE = (0.2, 0.1, 0.05, 0.025, 0.0125)
_BUDGET = 0.9


@dataclass
class SolveConfig:
    """Validated problem + numerics bundle; owns the assembled operator.

    ``source(x, s)`` and ``initial(x)`` apply to european mode only.
    Construction validates coefficients, schedule, and the explicit
    stability budget, raising :class:`ConfigError` on violation.
    """

    grid: SpaceTimeGrid
    model: LevyModel
    coeffs: CoefficientField
    payoff: PayoffSpec
    eps_schedule: tuple = DEFAULT_EPS_SCHEDULE
    theta: float = 1.0
    mode: str = "penalized"
    source: Callable | None = None
    initial: Callable | None = None
    radius_tol: float = 1e-12
    op: NonlocalOperator = field(init=False, repr=False)
    anchor: float = field(init=False)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; pick from {MODES}")
        if not 0.0 <= self.theta <= 1.0:
            raise ConfigError("theta must lie in [0, 1]")
        validate_coefficients(self.coeffs, self.grid)
        self.eps_schedule = tuple(float(e) for e in self.eps_schedule)
        if self.mode == "penalized":
            es = self.eps_schedule
            if len(es) == 0:
                raise ConfigError("penalized mode needs an eps schedule")
            if any(not 0.0 < e < 1.0 for e in es):
                raise ConfigError("eps schedule entries must lie in (0, 1)")
            if any(b >= a for a, b in zip(es, es[1:])):
                raise ConfigError("eps schedule must be strictly decreasing")
            if es[-1] < 1e-4:
                raise ConfigError("eps schedule must end at >= 1e-4")
        if (self.source is not None or self.initial is not None) \
                and self.mode != "european":
            raise ConfigError("source/initial overrides are european-only")
        if not 0.0 < self.radius_tol <= 1e-3:
            raise ConfigError("radius_tol must lie in (0, 1e-3]")
        forced = tuple(sorted({0.25, 0.5, *self.eps_schedule}))
        self.op = generator.build_operator(self.model, self.grid,
                                           forced_edges=forced,
                                           radius_tol=self.radius_tol)
        self.anchor = penalty_mod.anchor(self.coeffs, self.payoff,
                                         self.model, self.grid)
        frac = stability_fraction(self)
        if frac > 1.0:
            raise ConfigError(
                f"explicit part violates the stability budget "
                f"(dt * rate = {frac * _BUDGET:.3f} > {_BUDGET}); "
                f"need nt >= {required_nt(self)} time steps")


def _explicit_rate(cfg: SolveConfig) -> float:
    """Worst decay rate of everything treated explicitly in one step."""
    rate = generator.stability_rate(cfg.op, "monotone")
    if cfg.theta < 1.0:
        a0, b0, _ = cfg.coeffs.maxima(cfg.grid)
        h = cfg.grid.h
        rate += (1.0 - cfg.theta) * (2.0 * a0 / (h * h) + b0 / h)
    if cfg.mode == "penalized":
        eps_min = min(cfg.eps_schedule)
        rate += 2.0 * abs(cfg.anchor) / eps_min
    return rate


def stability_fraction(cfg: SolveConfig) -> float:
    """``dt * explicit rate`` as a fraction of the allowed budget."""
    return cfg.grid.dt * _explicit_rate(cfg) / _BUDGET


def monotone_step_check(cfg: SolveConfig) -> bool:
    """Verify the step preserves ordering: implicit matrix is an M-matrix
    (off-diagonals <= 0, strictly diagonally dominant) and the explicit
    update keeps nonnegative diagonal weight under the budget."""
    ws = _Workspace(cfg, min(cfg.eps_schedule) if cfg.mode == "penalized"
                    else None)
    for t in ([0.0] if not cfg.coeffs.time_dependent else
              [float(s) for s in cfg.grid.times[:-1]]):
        lo, dg, up = ws.local_stencil(t)
        theta_dt = cfg.theta * ws.dt
        a_lo, a_dg, a_up = -theta_dt * lo, 1.0 - theta_dt * dg, -theta_dt * up
        if np.any(a_lo[1:] > 1e-15) or np.any(a_up[:-1] > 1e-15):
            return False
        if np.any(a_dg - np.abs(a_lo) - np.abs(a_up) < 1e-15):
            return False
    return stability_fraction(cfg) <= 1.0


def required_nt(cfg: SolveConfig) -> int:
    """Smallest step count satisfying the explicit stability budget."""
    rate = _explicit_rate(cfg)
    return max(cfg.grid.nt,
               int(np.ceil(cfg.grid.t_final * rate / _BUDGET)))


def plan_steps(grid: SpaceTimeGrid, model: LevyModel,
               coeffs: CoefficientField, payoff: PayoffSpec,
               eps_schedule: tuple = (), theta: float = 1.0,
               safety: float = 0.75) -> int:
    """Step count that fits the stability budget, before building a config.

    Useful for refinement studies where the admissible step size shrinks
    faster than linearly in ``h`` (activity order above one).  ``safety``
    keeps a margin below the budget; pass the intended ``eps_schedule``
    when planning a penalized run so the penalty slope is counted.
    """
    op = generator.build_operator(model, grid)
    rate = generator.stability_rate(op, "monotone")
    if theta < 1.0:
        a0, b0, _ = coeffs.maxima(grid)
        rate += (1.0 - theta) * (2.0 * a0 / (grid.h * grid.h) + b0 / grid.h)
    if eps_schedule:
        p0 = penalty_mod.anchor(coeffs, payoff, model, grid)
        rate += 2.0 * abs(p0) / min(eps_schedule)
    return max(grid.nt, int(np.ceil(grid.t_final * rate /
                                    (_BUDGET * safety))))


# ---------------------------------------------------------------------------
# per-config workspace


class _Workspace:
    """Precomputed arrays shared by all steps of one march."""

    def __init__(self, cfg: SolveConfig, eps: float | None):
        grid = cfg.grid
        self.cfg = cfg
        self.eps = eps
        x = grid.nodes
        self.x = x
        self.h = grid.h
        self.dt = grid.dt
        ne = cfg.op.n_ext
        self.n_ext = ne
        left_x = x[0] - grid.h * np.arange(ne, 0, -1)
        right_x = x[-1] + grid.h * np.arange(1, ne + 1)

        if eps is not None:
            self.g_mollified: MollifiedPayoff | None = \
                mollify(cfg.payoff, 0.5 * eps)
            self.obstacle = np.asarray(self.g_mollified(x), dtype=float)
            self.bc_fn = self.g_mollified
        else:
            self.g_mollified = None
            self.obstacle = np.asarray(cfg.payoff(x), dtype=float)
            self.bc_fn = cfg.payoff
        self.g_raw = np.asarray(cfg.payoff(x), dtype=float)
        self.ext_left = np.asarray(self.bc_fn(left_x), dtype=float)
        self.ext_right = np.asarray(self.bc_fn(right_x), dtype=float)

        self.time_dependent = cfg.coeffs.time_dependent
        self._stencil_cache: dict[float, tuple] = {}
        r_edge = cfg.coeffs.r(x[[0, -1]], 0.0)
        self.r_left = float(r_edge[0])
        self.r_right = float(r_edge[-1])
        if cfg.mode == "european":
            self.initial = np.asarray(
                cfg.initial(x) if cfg.initial is not None else self.g_raw,
                dtype=float)
        else:
            self.initial = self.obstacle.copy()

    def local_stencil(self, t: float):
        """Rows (l, d, u) of ``L_D - r`` with upwinded drift; cached."""
        key = t if self.time_dependent else 0.0
        if key in self._stencil_cache:
            return self._stencil_cache[key]
        cfg = self.cfg
        x, h = self.x, self.h
        a = np.asarray(cfg.coeffs.a(x, key), dtype=float)
        b = np.asarray(cfg.coeffs.b(x, key), dtype=float)
        r = np.asarray(cfg.coeffs.r(x, key), dtype=float)
        lo = a / (h * h) - b / (2.0 * h)
        up = a / (h * h) + b / (2.0 * h)
        central_ok = (lo >= 0.0) & (up >= 0.0)
        # upwind the drift wherever the centered form loses sign control
        uw_up = np.where(b >= 0.0, a / (h * h) + b / h, a / (h * h))
        uw_lo = np.where(b >= 0.0, a / (h * h), a / (h * h) - b / h)
        lo = np.where(central_ok, lo, uw_lo)
        up = np.where(central_ok, up, uw_up)
        dg = -(lo + up) - r
        self._stencil_cache[key] = (lo, dg, up)
        return lo, dg, up

    def boundary_values(self, s: float) -> tuple[float, float]:
        """Dirichlet edge values at forward time ``s``."""
        if self.cfg.mode == "european":
            return (float(self.obstacle[0]) * np.exp(-self.r_left * s),
                    float(self.obstacle[-1]) * np.exp(-self.r_right * s))
        return float(self.obstacle[0]), float(self.obstacle[-1])

    def extended(self, v: np.ndarray, s: float) -> np.ndarray:
        """Jump-operator reads beyond the grid clamp to the obstacle
        (discounted in european mode)."""
        if self.cfg.mode == "european":
            dl = np.exp(-self.r_left * s)
            dr = np.exp(-self.r_right * s)
            return np.concatenate([self.ext_left * dl, v,
                                   self.ext_right * dr])
        return np.concatenate([self.ext_left, v, self.ext_right])


def _implicit_solve(ws: _Workspace, rhs: np.ndarray, t: float,
                    bc: tuple[float, float]) -> np.ndarray:
    cfg = ws.cfg
    theta_dt = cfg.theta * ws.dt
    lo, dg, up = ws.local_stencil(t)
    n = rhs.shape[0]
    a_lo = -theta_dt * lo
    a_dg = 1.0 - theta_dt * dg
    a_up = -theta_dt * up
    # Dirichlet rows at both edges
    a_dg[0] = a_dg[-1] = 1.0
    a_up[0] = a_lo[-1] = 0.0
    rhs = rhs.copy()
    rhs[0], rhs[-1] = bc
    ab = np.zeros((3, n))
    ab[0, 1:] = a_up[:-1]
    ab[1, :] = a_dg
    ab[2, :-1] = a_lo[1:]
    out = solve_banded((1, 1), ab, rhs)
    if not np.all(np.isfinite(out)):
        raise NumericalError("tridiagonal solve produced non-finite values")
    return out


def _one_step(ws: _Workspace, v_now: np.ndarray, n: int,
              pspec: PenaltySpec | None) -> np.ndarray:
    """Advance from forward level ``n`` to ``n + 1``."""
    cfg = ws.cfg
    dt = ws.dt
    s_now = n * dt
    s_new = (n + 1) * dt
    ext = ws.extended(v_now, s_now)
    rhs = v_now + dt * generator.apply_nonlocal_ext(
        cfg.op, ext, profile="monotone", with_compensator=True)
    if cfg.theta < 1.0:
        lo, dg, up = ws.local_stencil(s_now)
        expl = np.zeros_like(v_now)
        expl[1:-1] = (lo[1:-1] * v_now[:-2] + dg[1:-1] * v_now[1:-1] +
                      up[1:-1] * v_now[2:])
        rhs += dt * (1.0 - cfg.theta) * expl
    if pspec is not None:
        rhs -= dt * pspec.value(v_now - ws.obstacle)
    if cfg.source is not None:
        rhs += dt * np.asarray(cfg.source(ws.x, s_now), dtype=float)
    v_new = _implicit_solve(ws, rhs, s_new, ws.boundary_values(s_new))
    if cfg.mode == "projected":
        v_new = np.maximum(v_new, ws.obstacle)
    return v_new


def step_penalized(v_now: np.ndarray, n: int, eps: float,
                   pspec: PenaltySpec, cfg: SolveConfig) -> np.ndarray:
    """One public IMEX step of the penalized march (forward level ``n``)."""
    v_now = np.asarray(v_now, dtype=float)
    if not np.all(np.isfinite(v_now)):
        raise NumericalError("step input is not finite")
    ws = _Workspace(cfg, eps)
    return _one_step(ws, v_now, n, pspec)


# ---------------------------------------------------------------------------
# full marches


def _march(cfg: SolveConfig, eps: float | None,
           pspec: PenaltySpec | None) -> tuple[np.ndarray, _Workspace]:
    grid = cfg.grid
    ws = _Workspace(cfg, eps)
    surface = np.empty((grid.nx + 1, grid.nt + 1))
    surface[:, 0] = ws.initial
    guard = cfg.payoff.bound + 2.0 + (0.0 if cfg.initial is None else
                                      float(np.max(np.abs(ws.initial))))
    v = surface[:, 0].copy()
    for n in range(grid.nt):
        v = _one_step(ws, v, n, pspec)
        if not np.all(np.isfinite(v)) or np.max(np.abs(v)) > guard + 10.0:
            raise NumericalError(
                f"stability violation at step {n + 1}/{grid.nt}: "
                f"max |v| = {np.max(np.abs(v)):.3e}, "
                f"budget fraction = {stability_fraction(cfg):.3f}")
        surface[:, n + 1] = v
    return surface, ws


def _build_report(cfg: SolveConfig, surface: np.ndarray, ws: _Workspace,
                  eps: float | None, pspec: PenaltySpec | None,
                  t0: float, steps: int) -> "SolveReport":
    grid = cfg.grid
    h = grid.h
    grad = np.abs(surface[2:, :] - surface[:-2, :]) / (2.0 * h)
    residuals = {
        "v_min": float(surface.min()),
        "v_max": float(surface.max()),
        "grad_max": float(grad.max()),
        "initial_gap": float(np.max(np.abs(surface[:, 0] - ws.initial))),
    }
    if pspec is not None:
        pen = pspec.value(surface - ws.obstacle[:, None])
        residuals["penalty_min"] = float(pen.min())
        residuals["penalty_max"] = float(pen.max())
        residuals["obstacle_gap"] = float(
            np.min(surface - ws.obstacle[:, None]))
    if cfg.model.is_trivial:
        trunc = 0.0
    else:
        radius = cfg.op.radius
        trunc = levy.integrate_density(
            cfg.model, lambda t: 1.0, radius, np.inf, side="+") + \
            levy.integrate_density(
                cfg.model, lambda t: 1.0, radius, np.inf, side="-")
    gf = GridFunction(grid, surface, extension="clamp_payoff",
                      payoff=ws.bc_fn)
    report = SolveReport(
        value=gf, mode=cfg.mode, eps_final=eps, anchor=cfg.anchor,
        boundary=None, residuals=residuals, eps_trace=[],
        truncation_mass=float(trunc), wallclock=time.perf_counter() - t0,
        steps=steps, warnings=[], grad_max_per_eps=[],
    )
    for key, val in report.residuals.items():
        if not np.isfinite(val):
            raise NumericalError(f"non-finite residual {key!r} in report")
    return report


@dataclass
class SolveReport:
    """March output: forward-time surface plus scalar diagnostics."""

    value: GridFunction
    mode: str
    eps_final: float | None
    anchor: float | None
    boundary: list | None
    residuals: dict
    eps_trace: list
    truncation_mass: float
    wallclock: float
    steps: int
    warnings: list
    grad_max_per_eps: list


def solve_penalized(cfg: SolveConfig, eps: float) -> SolveReport:
    """Single penalized march at separation ``eps``."""
    if cfg.mode != "penalized":
        raise ConfigError("solve_penalized requires penalized mode")
    t0 = time.perf_counter()
    pspec = penalty_mod.build(eps, cfg.anchor)
    surface, ws = _march(cfg, eps, pspec)
    return _build_report(cfg, surface, ws, eps, pspec, t0, cfg.grid.nt)


def solve_european(cfg: SolveConfig) -> SolveReport:
    """Plain Cauchy march (no obstacle, optional source/initial)."""
    if cfg.mode != "european":
        raise ConfigError("solve_european requires european mode")
    t0 = time.perf_counter()
    surface, ws = _march(cfg, None, None)
    return _build_report(cfg, surface, ws, None, None, t0, cfg.grid.nt)


def solve_vi(cfg: SolveConfig) -> SolveReport:
    """Obstacle-problem solve: penalized continuation or direct projection.

    Penalized mode marches once per schedule entry (operator and
    mollified payoffs are assembled once and shared), records the
    sup-norm delta between consecutive solutions, and returns the last
    report with the trace; a non-decreasing tail of the trace adds a
    non-convergence warning.  Projected mode is a single march.
    """
    t0 = time.perf_counter()
    if cfg.mode == "projected":
        surface, ws = _march(cfg, None, None)
        report = _build_report(cfg, surface, ws, None, None, t0, cfg.grid.nt)
    elif cfg.mode == "penalized":
        prev = None
        trace = []
        grad_per_eps = []
        report = None
        total_steps = 0
        for eps in cfg.eps_schedule:
            pspec = penalty_mod.build(eps, cfg.anchor)
            surface, ws = _march(cfg, eps, pspec)
            total_steps += cfg.grid.nt
            if prev is not None:
                trace.append(float(np.max(np.abs(surface - prev))))
            prev = surface
            report = _build_report(cfg, surface, ws, eps, pspec, t0,
                                   total_steps)
            grad_per_eps.append(report.residuals["grad_max"])
        report.eps_trace = trace
        report.grad_max_per_eps = grad_per_eps
        if len(trace) >= 2 and trace[-1] >= trace[-2]:
            report.warnings.append(
                "eps continuation: last sup-norm delta did not decrease")
    else:
        raise ConfigError("solve_vi requires penalized or projected mode")
    report.boundary = _boundary_curves(cfg, report)
    return report


def _boundary_curves(cfg: SolveConfig, report: SolveReport) -> list:
    """Free-boundary crossings per backward time level."""
    from .diagnostics import crossings  # local import; diagnostics sits above
    u = backward_value(report)
    g = np.asarray(cfg.payoff(cfg.grid.nodes), dtype=float)
    tol = 10.0 * (cfg.grid.h ** 2 + cfg.grid.dt) + 1e-9
    return [crossings(u.values[:, m], g, cfg.grid.nodes, tol)
            for m in range(cfg.grid.nt + 1)]


def backward_value(report: SolveReport) -> GridFunction:
    """Value in natural time: ``u(x, t) = v(x, T - t)`` (flipped columns)."""
    gf = report.value
    return GridFunction(gf.grid, gf.values[:, ::-1].copy(),
                        extension=gf.extension, payoff=gf.payoff)


def residual_vi(value: GridFunction, cfg: SolveConfig,
                expiry_layer: float = 0.02) -> GridFunction:
    """Complementarity residual ``min(equation part, obstacle part)``.

    ``value`` is the forward-time surface from :func:`solve_vi`.  The
    equation part uses an independent stencil: centered time difference
    and the accurate-profile jump operator.  Entries are NaN outside the
    region where the stencil is meaningful: at the two time ends, off the
    interior window, within a 2-node collar of each contact-set edge
    (the second space derivative jumps across the free boundary), and in
    the first ``expiry_layer`` fraction of the horizon after the terminal
    condition -- there the payoff kink makes the time derivative blow up
    (square-root-in-time transient), which the solution's Sobolev-level
    regularity permits, so no fixed-order stencil resolves it.
    """
    grid = cfg.grid
    if value.values.shape != (grid.nx + 1, grid.nt + 1):
        raise ParameterError("value surface does not match the config grid")
    h, dt = grid.h, grid.dt
    x = grid.nodes
    g = np.asarray(cfg.payoff(x), dtype=float)
    contact_tol = 1e-10 * max(1.0, cfg.payoff.bound)
    n_skip = max(1, int(np.ceil(expiry_layer * grid.nt)))
    out = np.full_like(value.values, np.nan)
    for n in range(n_skip, grid.nt):
        v_n = value.values[:, n]
        dv_ds = (value.values[:, n + 1] - value.values[:, n - 1]) / (2.0 * dt)
        gf_n = GridFunction(grid, v_n, extension=value.extension,
                            payoff=value.payoff)
        lv = generator.apply_local(cfg.coeffs, gf_n, t=n * dt) + \
            generator.apply_nonlocal(cfg.op, gf_n, profile="accurate")
        rv = np.asarray(cfg.coeffs.r(x, n * dt), dtype=float) * v_n
        pde_part = dv_ds - lv + rv
        obs_part = v_n - g
        res = np.minimum(pde_part, obs_part)
        # 2-node collar around each contact-set edge: the second-derivative
        # jump across the free boundary makes the stencil inconsistent there
        contact = obs_part <= contact_tol
        edge = np.nonzero(contact[:-1] != contact[1:])[0]
        for i in edge:
            res[max(0, i - 1): i + 4] = np.nan
        res[:1] = res[-1:] = np.nan
        out[:, n] = res
    interior = grid.interior
    out[~interior, :] = np.nan
    return GridFunction(grid, out, extension="zero")
