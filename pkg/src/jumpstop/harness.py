"""Run configuration, orchestration, and artifact output.

A :class:`RunConfig` groups the inputs in four blocks -- ``problem``
(dynamics, reward, horizon), ``numerics`` (grid, schedule, mode),
``oracle`` (cross-check selection, probes, seeds), ``output`` (directory,
formats).  Configs parse from JSON or from a line format of
``block.key = value`` pairs; unknown blocks or keys are rejected, and the
emitted effective config re-parses to an equal value.

:func:`run` solves the configured problem, evaluates the invariant
checks and any applicable oracles, and writes the artifacts: the value
surface and free boundary as CSV, machine-checkable diagnostics as JSON,
the effective config, and a short text summary.  Nothing time- or
host-dependent goes into the files, so identical config and seed give
byte-identical artifacts.  Exit status: 0 all checks passed, 2 config
error, 3 invariant violation (the failing check is named).
"""

from __future__ import annotations

import dataclasses
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import diagnostics, generator, levy, mc, oracles
from . import payoff as payoff_mod
from .diagnostics import CheckResult
from .errors import (ConfigError, InvariantViolation, ParameterError,
                     UnsupportedOperation)
from .grids import CoefficientField, GridFunction, SpaceTimeGrid
from .levy import LevyModel
from .payoff import PayoffSpec
from .solver import (MODES, SolveConfig, SolveReport, backward_value,
                     residual_vi, solve_european, solve_vi)

__all__ = [
    "RunConfig", "ProblemBlock", "NumericsBlock", "OracleBlock",
    "OutputBlock", "run", "compare", "compare_cli", "selftest",
]

_FAMILIES = {
    "none": (levy.none, 0),
    "merton": (levy.merton, 3),
    "kou": (levy.kou, 4),
    "variance_gamma": (levy.variance_gamma, 3),
    "nig": (levy.nig, 3),
    "tempered_stable": (levy.tempered_stable, 6),
}

_PAYOFFS = ("put", "capped_call", "table")
_FORMS = ("compensated", "reduced")
_ORACLE_NAMES = ("auto", "binomial", "series", "mc", "none")
_FORMATS = ("csv", "json")

# In-run oracle gate: generous enough to hold at any sane resolution;
# the tight, resolution-matched tolerances live in the acceptance tests.
_ORACLE_REL_GATE = 0.01
_RESIDUAL_SCALE = 20.0


# ---------------------------------------------------------------------------
# configuration blocks


@dataclass
class ProblemBlock:
    """Dynamics and reward: x is log-price-like, times are in years."""

    sigma: float = 0.2          # diffusion volatility; a = sigma^2 / 2
    rate: float = 0.04          # flat discount rate
    drift: float | None = None  # None -> rate - a - jump exponential comp.
    family: str = "none"
    jump_params: list = field(default_factory=list)
    payoff: str = "put"
    strike: float = 1.0
    cap: float | None = None        # capped_call only
    table_path: str | None = None   # table payoff only
    horizon: float = 1.0


@dataclass
class NumericsBlock:
    x_lo: float = -0.5
    x_hi: float = 0.5
    pad: float = 1.5
    nx: int = 200
    nt: int = 100
    eps_schedule: list = field(default_factory=lambda: [0.2, 0.1, 0.05])
    theta: float = 1.0
    mode: str = "penalized"
    operator_form: str = "compensated"
    radius_tol: float = 1e-12       # jump-tail mass kept outside the radius
    lemma_constant: float = 10.0    # c in tol = c*(h^2 + dt) + 1e-9


@dataclass
class OracleBlock:
    mc_paths: int = 0               # 0 disables the path estimate
    mc_steps: int = 64
    seed: int = 20260825
    binomial_steps: int = 2000
    which: list = field(default_factory=lambda: ["auto"])
    probes: list = field(default_factory=lambda: [0.0])  # x or [x, t]


@dataclass
class OutputBlock:
    out_dir: str = "out"
    formats: list = field(default_factory=lambda: ["csv", "json"])


_KINDS = {
    "problem": {
        "sigma": "float", "rate": "float", "drift": "opt_float",
        "family": "str", "jump_params": "floats", "payoff": "str",
        "strike": "float", "cap": "opt_float", "table_path": "opt_str",
        "horizon": "float",
    },
    "numerics": {
        "x_lo": "float", "x_hi": "float", "pad": "float", "nx": "int",
        "nt": "int", "eps_schedule": "floats", "theta": "float",
        "mode": "str", "operator_form": "str", "radius_tol": "float",
        "lemma_constant": "float",
    },
    "oracle": {
        "mc_paths": "int", "mc_steps": "int", "seed": "int",
        "binomial_steps": "int", "which": "strs", "probes": "probes",
    },
    "output": {
        "out_dir": "str", "formats": "strs",
    },
}

_BLOCK_TYPES = {
    "problem": ProblemBlock, "numerics": NumericsBlock,
    "oracle": OracleBlock, "output": OutputBlock,
}


def _coerce(where: str, value, kind: str):
    def fail(expected: str):
        raise ConfigError(f"{where}: expected {expected}, got {value!r}")

    if kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            fail("a number")
        return float(value)
    if kind == "opt_float":
        return None if value is None else _coerce(where, value, "float")
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            fail("an integer")
        return int(value)
    if kind == "str":
        if not isinstance(value, str):
            fail("a string")
        return value
    if kind == "opt_str":
        return None if value is None else _coerce(where, value, "str")
    if kind == "floats":
        if not isinstance(value, (list, tuple)):
            fail("a list of numbers")
        return [_coerce(where, v, "float") for v in value]
    if kind == "strs":
        if not isinstance(value, (list, tuple)):
            fail("a list of strings")
        return [_coerce(where, v, "str") for v in value]
    if kind == "probes":
        if not isinstance(value, (list, tuple)):
            fail("a list of probes (x or [x, t])")
        out = []
        for v in value:
            if isinstance(v, (list, tuple)):
                if len(v) != 2:
                    fail("probes of the form x or [x, t]")
                out.append([_coerce(where, v[0], "float"),
                            _coerce(where, v[1], "float")])
            else:
                out.append(_coerce(where, v, "float"))
        return out
    raise AssertionError(f"unknown kind {kind}")


@dataclass
class RunConfig:
    """Validated run description; see the block classes for the fields."""

    problem: ProblemBlock = field(default_factory=ProblemBlock)
    numerics: NumericsBlock = field(default_factory=NumericsBlock)
    oracle: OracleBlock = field(default_factory=OracleBlock)
    output: OutputBlock = field(default_factory=OutputBlock)

    # -- parsing ------------------------------------------------------------

    @staticmethod
    def from_dict(raw) -> "RunConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config root must be a mapping of blocks")
        unknown = set(raw) - set(_BLOCK_TYPES)
        if unknown:
            raise ConfigError(
                f"unknown config block(s): {', '.join(sorted(unknown))}; "
                f"valid blocks: {', '.join(sorted(_BLOCK_TYPES))}")
        blocks = {}
        for name, cls in _BLOCK_TYPES.items():
            body = raw.get(name, {})
            if not isinstance(body, dict):
                raise ConfigError(f"block {name!r} must be a mapping")
            kinds = _KINDS[name]
            bad = set(body) - set(kinds)
            if bad:
                raise ConfigError(
                    f"unknown key(s) in block {name!r}: "
                    f"{', '.join(sorted(bad))}")
            kwargs = {k: _coerce(f"{name}.{k}", v, kinds[k])
                      for k, v in body.items()}
            blocks[name] = cls(**kwargs)
        rc = RunConfig(**blocks)
        rc._validate_enums()
        return rc

    @staticmethod
    def from_text(text: str) -> "RunConfig":
        stripped = text.lstrip()
        if stripped.startswith("{"):
            try:
                raw = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"invalid JSON config: {exc}") from exc
            return RunConfig.from_dict(raw)
        raw: dict = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            if "=" not in body:
                raise ConfigError(
                    f"line {lineno}: expected 'block.key = value'")
            key, _, val = body.partition("=")
            key = key.strip()
            if key.count(".") != 1:
                raise ConfigError(
                    f"line {lineno}: key must be 'block.key', got {key!r}")
            block, name = key.split(".")
            try:
                parsed = json.loads(val.strip())
            except json.JSONDecodeError:
                parsed = val.strip()
            raw.setdefault(block, {})[name] = parsed
        return RunConfig.from_dict(raw)

    @staticmethod
    def from_path(path) -> "RunConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return RunConfig.from_text(text)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def _validate_enums(self) -> None:
        p, n, o, out = self.problem, self.numerics, self.oracle, self.output
        if p.family not in _FAMILIES:
            raise ConfigError(
                f"problem.family {p.family!r} not one of "
                f"{', '.join(sorted(_FAMILIES))}")
        if p.payoff not in _PAYOFFS:
            raise ConfigError(
                f"problem.payoff {p.payoff!r} not one of {_PAYOFFS}")
        if n.mode not in MODES:
            raise ConfigError(f"numerics.mode {n.mode!r} not one of {MODES}")
        if n.operator_form not in _FORMS:
            raise ConfigError(
                f"numerics.operator_form {n.operator_form!r} "
                f"not one of {_FORMS}")
        for name in o.which:
            if name not in _ORACLE_NAMES:
                raise ConfigError(
                    f"oracle.which entry {name!r} not one of {_ORACLE_NAMES}")
        for fmt in out.formats:
            if fmt not in _FORMATS:
                raise ConfigError(
                    f"output.formats entry {fmt!r} not one of {_FORMATS}")
        if o.mc_paths < 0 or o.mc_steps < 1 or o.binomial_steps < 1:
            raise ConfigError("oracle counts must be positive")
        if o.seed < 0:
            raise ConfigError("oracle.seed must be >= 0")

    # -- builders -----------------------------------------------------------

    def build_model(self) -> LevyModel:
        p = self.problem
        builder, arity = _FAMILIES[p.family]
        if len(p.jump_params) != arity:
            raise ConfigError(
                f"problem.family {p.family!r} takes {arity} jump_params, "
                f"got {len(p.jump_params)}")
        return builder(*p.jump_params)

    def build_payoff(self) -> PayoffSpec:
        p = self.problem
        if p.payoff == "put":
            return payoff_mod.put(p.strike)
        if p.payoff == "capped_call":
            if p.cap is None:
                raise ConfigError("problem.cap is required for capped_call")
            return payoff_mod.soft_capped_call(p.strike, p.cap)
        if p.table_path is None:
            raise ConfigError("problem.table_path is required for table")
        return payoff_mod.from_csv(p.table_path)

    def build_coeffs(self, model: LevyModel) -> CoefficientField:
        p = self.problem
        if p.sigma <= 0.0:
            raise ConfigError("problem.sigma must be > 0")
        if p.rate < 0.0:
            raise ConfigError("problem.rate must be >= 0")
        a = 0.5 * p.sigma * p.sigma
        if p.drift is not None:
            b = p.drift
        else:
            b = p.rate - a - levy.exp_compensator(model)
        return CoefficientField.constants(a, b, p.rate)

    def build_solve_config(self, refine: int = 0) -> SolveConfig:
        n = self.numerics
        model = self.build_model()
        g = self.build_payoff()
        coeffs = self.build_coeffs(model)
        if n.operator_form == "reduced" and model.alpha >= 1.0:
            raise ConfigError(
                f"operator_form 'reduced' drops the small-jump "
                f"compensation, which needs finite jump variation "
                f"(singularity order < 1); family {model.family!r} has "
                f"order {model.alpha}")
        grid = SpaceTimeGrid(n.x_lo, n.x_hi, n.pad, n.nx,
                             self.problem.horizon, n.nt)
        if refine:
            if refine < 0:
                raise ConfigError("refine count must be >= 0")
            grid = grid.refined(refine)
        return SolveConfig(grid, model, coeffs, g,
                           eps_schedule=tuple(n.eps_schedule),
                           theta=n.theta, mode=n.mode,
                           radius_tol=n.radius_tol)


# ---------------------------------------------------------------------------
# orchestration


def _normalized_probes(rc: RunConfig) -> list[tuple[float, float]]:
    out = []
    for p in rc.oracle.probes:
        if isinstance(p, (list, tuple)):
            out.append((float(p[0]), float(p[1])))
        else:
            out.append((float(p), 0.0))
    return out


def _value_at(report: SolveReport, cfg: SolveConfig,
              x: float, t: float) -> float:
    """Interpolated value at natural time ``t`` (column nearest in time)."""
    grid = cfg.grid
    s = grid.t_final - t
    if not 0.0 <= s <= grid.t_final + 1e-12:
        raise ConfigError(f"probe time {t} outside [0, {grid.t_final}]")
    col = int(round(s / grid.dt))
    col = min(max(col, 0), grid.nt)
    if not grid.nodes[0] <= x <= grid.nodes[-1]:
        raise ConfigError(f"probe location {x} outside the padded grid")
    return float(np.interp(x, grid.nodes, report.value.values[:, col]))


def _oracle_selection(rc: RunConfig, cfg: SolveConfig) -> set:
    which = set(rc.oracle.which)
    if "none" in which:
        return set()
    if "auto" not in which:
        return which
    names = set(which) - {"auto"}
    if cfg.model.is_trivial and cfg.payoff.kind == "put":
        names.add("binomial")
    if cfg.model.family == "merton" and cfg.payoff.kind == "put" \
            and cfg.mode == "european":
        names.add("series")
    if rc.oracle.mc_paths > 0:
        names.add("mc")
    return names


def _reference_price(rc: RunConfig, cfg: SolveConfig, names: set,
                     x: float, horizon: float) -> tuple[str, float] | None:
    """Closed-form/tree reference at probe ``x`` over ``horizon``, if any."""
    p = rc.problem
    if cfg.payoff.kind != "put" or horizon <= 0.0:
        return None
    s0 = math.exp(x)
    if "binomial" in names and cfg.model.is_trivial:
        price = oracles.binomial_put(
            s0, p.strike, p.rate, p.sigma, horizon,
            steps=rc.oracle.binomial_steps,
            american=cfg.mode != "european")
        return "binomial", price
    if "series" in names and cfg.model.family == "merton" \
            and cfg.mode == "european":
        lam, mu, sd = (p.jump_params + [0.0] * 3)[:3]
        return "series", oracles.merton_put(
            s0, p.strike, p.rate, p.sigma, horizon, lam, mu, sd)
    return None


def _probe_rows(rc: RunConfig, cfg: SolveConfig,
                report: SolveReport) -> list[dict]:
    """Per-probe comparison table: PDE vs oracle vs path lower bound."""
    names = _oracle_selection(rc, cfg)
    rows = []
    for k, (x, t) in enumerate(_normalized_probes(rc)):
        horizon = cfg.grid.t_final - t
        row: dict = {"x": x, "t": t, "pde": _value_at(report, cfg, x, t)}
        ref = _reference_price(rc, cfg, names, x, horizon)
        if ref is not None:
            row["oracle"], row["oracle_value"] = ref
            row["abs_gap"] = abs(row["pde"] - row["oracle_value"])
            scale = abs(row["oracle_value"])
            row["rel_gap"] = row["abs_gap"] / scale if scale > 0 else None
        if "mc" in names and rc.oracle.mc_paths > 0 and horizon > 0.0:
            batch = mc.simulate(
                cfg.model, cfg.coeffs, x, horizon, rc.oracle.mc_paths,
                rc.oracle.mc_steps, rc.oracle.seed + k)
            if cfg.mode == "european":
                est = mc.european_estimate(batch, cfg.payoff, cfg.coeffs.r)
                row["mc_kind"] = "terminal"
            else:
                est = mc.stopping_lower_bound(batch, cfg.payoff,
                                              cfg.coeffs.r)
                row["mc_kind"] = "lower_bound"
            row["mc_value"] = est.price
            row["mc_stderr"] = est.stderr
            if est.flag:
                row["mc_flag"] = est.flag
        rows.append(row)
    return rows


def _hard_checks(rc: RunConfig, cfg: SolveConfig, report: SolveReport,
                 res_surface: GridFunction | None,
                 rows: list[dict]) -> dict:
    """Invariant gates deciding the exit status."""
    grid = cfg.grid
    c = rc.numerics.lemma_constant
    tol = c * (grid.h ** 2 + grid.dt) + 1e-9
    checks = dict(diagnostics.lemma_suite(report, cfg.payoff, grid, c=c))
    if cfg.mode == "projected":
        g = np.asarray(cfg.payoff(grid.nodes), dtype=float)
        gap = float(np.min(report.value.values - g[:, None]))
        checks["obstacle"] = CheckResult(gap >= -tol, gap, -tol)
    if cfg.mode == "european" and (cfg.source is not None
                                   or cfg.initial is not None):
        # bounds presume the plain obstacle data; overrides void them
        checks.pop("lower_bound", None)
        checks.pop("upper_bound", None)
    if cfg.mode == "penalized" and len(report.eps_trace) >= 2:
        deltas = report.eps_trace
        worst = max(b - a for a, b in zip(deltas, deltas[1:]))
        checks["eps_deltas_decreasing"] = CheckResult(worst < 0.0, worst, 0.0)
    if res_surface is not None:
        vals = res_surface.values
        if np.isfinite(vals).any():
            res_min = float(np.nanmin(vals))
            res_max = float(np.nanmax(np.abs(vals)))
            bound = _RESIDUAL_SCALE * (grid.h ** 2 + grid.dt) \
                * max(cfg.payoff.bound, 1.0)
            checks["residual_lower"] = CheckResult(res_min >= -tol,
                                                   res_min, -tol)
            checks["residual_bound"] = CheckResult(res_max <= bound,
                                                   res_max, bound)
    for row in rows:
        if "oracle_value" in row and row.get("rel_gap") is not None:
            name = f"oracle_{row['oracle']}"
            gate = max(_ORACLE_REL_GATE * abs(row["oracle_value"]),
                       1e-3 * cfg.payoff.bound)
            ok = row["abs_gap"] <= gate
            prev = checks.get(name)
            if prev is None or row["abs_gap"] > prev.observed:
                checks[name] = CheckResult(ok and (prev is None
                                                   or prev.passed),
                                           row["abs_gap"], gate)
        if row.get("mc_kind") == "lower_bound":
            margin = row["pde"] - (row["mc_value"]
                                   - 4.0 * row["mc_stderr"])
            prev = checks.get("mc_dominance")
            ok = margin >= 0.0
            if prev is None or margin < prev.observed:
                checks["mc_dominance"] = CheckResult(
                    ok and (prev is None or prev.passed), margin, 0.0)
    return checks


def _artifact_regions(cfg: SolveConfig, report: SolveReport,
                      u: GridFunction) -> tuple:
    """Contact labels and free-boundary crossings at contact resolution.

    The value-error tolerance ``c*(h^2 + dt)`` that gates the invariant
    checks is far coarser than the contact set itself: projection makes
    ``u == g`` exact there, and the penalty confines ``u - g`` to its
    band ``[0, eps]``.  Label at that resolution instead, and only where
    stopping actually pays (``g > 0``) -- far out of the money the value
    decays below any tolerance without the region being a contact set.

    Returns ``(labels, boundary, tol)`` with ``labels[i, m] == 0`` on
    the contact set and ``boundary[m]`` the crossing locations at
    natural time ``t = m * dt``.
    """
    grid = cfg.grid
    if cfg.mode == "penalized":
        tol = float(report.eps_final)
    else:
        tol = 1e-10 * max(1.0, cfg.payoff.bound)
    g = np.asarray(cfg.payoff(grid.nodes), dtype=float)
    gap = u.values - g[:, None]
    contact = (gap <= tol) & (g[:, None] > 0.0)
    labels = np.where(contact, 0, 1).astype(np.int8)
    boundary = []
    for m in range(grid.nt + 1):
        locs = diagnostics.crossings(u.values[:, m], g, grid.nodes, tol)
        if locs.size:
            locs = locs[np.asarray(cfg.payoff(locs), dtype=float) > 0.0]
        boundary.append(locs)
    return labels, boundary, tol


def _execute(rc: RunConfig, cfg: SolveConfig) -> dict:
    """Solve, diagnose, and assemble everything the artifacts need."""
    grid = cfg.grid
    if cfg.mode == "european":
        report = solve_european(cfg)
    else:
        report = solve_vi(cfg)
    u = backward_value(report)
    tol = rc.numerics.lemma_constant * (grid.h ** 2 + grid.dt) + 1e-9

    labels = None
    boundary = None
    contact_tol = None
    smooth = None
    res_surface = None
    if cfg.mode != "european":
        diagnostics.partition(u, cfg.payoff, tol)  # obstacle-dip guard
        labels, boundary, contact_tol = _artifact_regions(cfg, report, u)
        smooth = diagnostics.smooth_fit_gap(u, cfg.payoff)
        res_surface = residual_vi(report.value, cfg)

    reduced_gap = None
    if rc.numerics.operator_form == "reduced":
        gf = GridFunction(grid, np.asarray(cfg.payoff(grid.nodes), float),
                          extension="clamp_payoff", payoff=cfg.payoff)
        try:
            reduced_gap = generator.consistency_check(cfg.op, cfg.coeffs, gf)
        except UnsupportedOperation:
            reduced_gap = None

    rows = _probe_rows(rc, cfg, report)
    checks = _hard_checks(rc, cfg, report, res_surface, rows)
    failed = sorted(k for k, v in checks.items() if not v.passed)

    res_stats = None
    if res_surface is not None and np.isfinite(res_surface.values).any():
        vals = res_surface.values
        res_stats = {
            "max_abs": float(np.nanmax(np.abs(vals))),
            "min": float(np.nanmin(vals)),
            "evaluated": int(np.isfinite(vals).sum()),
        }

    return {
        "report": report,
        "u": u,
        "labels": labels,
        "boundary": boundary,
        "contact_tol": contact_tol,
        "smooth": smooth,
        "res_stats": res_stats,
        "reduced_gap": reduced_gap,
        "rows": rows,
        "checks": checks,
        "failed": failed,
        "tol": tol,
    }


# ---------------------------------------------------------------------------
# artifacts


def _jsonable(obj):
    """JSON-safe deep copy: numpy scalars to python, non-finite to None."""
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer, int)) or isinstance(obj, (str, bool)) \
            or obj is None:
        return int(obj) if isinstance(obj, np.integer) else obj
    raise TypeError(f"not JSON-serializable: {type(obj)}")


def _region_label(labels, i: int, m: int) -> str:
    if labels is None:
        return "-"
    return "C" if labels[i, m] == 1 else "S"


def _write_surface(path: Path, rc: RunConfig, cfg: SolveConfig,
                   bundle: dict) -> None:
    grid = cfg.grid
    u = bundle["u"]
    g = np.asarray(cfg.payoff(grid.nodes), dtype=float)
    labels = bundle["labels"]
    lines = ["x,t,u,g,region"]
    for m in range(grid.nt + 1):
        t = float(grid.times[m])
        col = u.values[:, m]
        for i, x in enumerate(grid.nodes):
            lines.append(f"{float(x)!r},{t!r},{float(col[i])!r},"
                         f"{float(g[i])!r},{_region_label(labels, i, m)}")
    path.write_text("\n".join(lines) + "\n")


def _write_boundary(path: Path, cfg: SolveConfig, bundle: dict) -> None:
    lines = ["t,b"]
    if bundle["boundary"] is not None:
        for m, curve in enumerate(bundle["boundary"]):
            t = cfg.grid.times[m]
            for b in np.atleast_1d(curve):
                lines.append(f"{float(t)!r},{float(b)!r}")
    path.write_text("\n".join(lines) + "\n")


def _diagnostics_payload(rc: RunConfig, cfg: SolveConfig,
                         bundle: dict) -> dict:
    report = bundle["report"]
    checks = {name: {"passed": bool(res.passed),
                     "observed": res.observed, "bound": res.bound}
              for name, res in bundle["checks"].items()}
    smooth = bundle["smooth"]
    labels = bundle["labels"]
    payload = {
        "mode": cfg.mode,
        "family": cfg.model.family,
        "grid": {"nx": cfg.grid.nx, "nt": cfg.grid.nt,
                 "h": cfg.grid.h, "dt": cfg.grid.dt,
                 "pad": cfg.grid.pad, "t_final": cfg.grid.t_final},
        "seed": rc.oracle.seed,
        "tolerance": bundle["tol"],
        "checks": checks,
        "failed_checks": bundle["failed"],
        "residuals": dict(report.residuals),
        "eps_trace": list(report.eps_trace),
        "eps_final": report.eps_final,
        "anchor": report.anchor,
        "truncation_mass": report.truncation_mass,
        "warnings": list(report.warnings),
        "smooth_fit": None if smooth is None else {
            "max_gap": smooth.max_gap, "median_gap": smooth.median_gap,
            "grad_max": smooth.grad_max, "unreliable": smooth.unreliable,
        },
        "residual_vi": bundle["res_stats"],
        "regions": None if labels is None else {
            "continuation": int((labels == 1).sum()),
            "stopping": int((labels == 0).sum()),
            "contact_tol": bundle["contact_tol"],
        },
        "boundary_points": 0 if bundle["boundary"] is None else
        int(sum(len(np.atleast_1d(c)) for c in bundle["boundary"])),
        "reduced_form_gap": bundle["reduced_gap"],
        "probes": bundle["rows"],
    }
    return _jsonable(payload)


def _write_summary(path: Path, rc: RunConfig, cfg: SolveConfig,
                   bundle: dict) -> None:
    report = bundle["report"]
    p = rc.problem
    lines = [
        f"mode={cfg.mode} family={cfg.model.family} payoff={p.payoff} "
        f"strike={p.strike} horizon={p.horizon}",
        f"grid: nx={cfg.grid.nx} nt={cfg.grid.nt} h={cfg.grid.h:.6g} "
        f"dt={cfg.grid.dt:.6g} pad={cfg.grid.pad}",
    ]
    for row in bundle["rows"]:
        bits = [f"probe x={row['x']:+.4f} t={row['t']:.4f}: "
                f"value={row['pde']:.6f}"]
        if "oracle_value" in row:
            bits.append(f"{row['oracle']}={row['oracle_value']:.6f} "
                        f"(gap {row['abs_gap']:.2e})")
        if "mc_value" in row:
            bits.append(f"mc[{row['mc_kind']}]={row['mc_value']:.6f}"
                        f"+-{row['mc_stderr']:.1e}")
        lines.append("  ".join(bits))
    if report.eps_trace:
        trace = ", ".join(f"{d:.3e}" for d in report.eps_trace)
        lines.append(f"eps deltas: {trace} (final eps={report.eps_final})")
    n_pass = sum(1 for v in bundle["checks"].values() if v.passed)
    lines.append(f"checks: {n_pass}/{len(bundle['checks'])} passed")
    for name in bundle["failed"]:
        res = bundle["checks"][name]
        lines.append(f"FAILED {name}: observed {res.observed:.6g} "
                     f"vs bound {res.bound:.6g}")
    path.write_text("\n".join(lines) + "\n")


def _write_artifacts(rc: RunConfig, cfg: SolveConfig, bundle: dict) -> Path:
    out = Path(rc.output.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    formats = rc.output.formats
    if "csv" in formats:
        _write_surface(out / "surface.csv", rc, cfg, bundle)
        _write_boundary(out / "boundary.csv", cfg, bundle)
    if "json" in formats:
        payload = _diagnostics_payload(rc, cfg, bundle)
        (out / "diagnostics.json").write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n")
        (out / "effective_config.json").write_text(rc.to_json())
    _write_summary(out / "summary.txt", rc, cfg, bundle)
    return out


# ---------------------------------------------------------------------------
# entry points


def run(config_path, out_dir=None, seed=None, refine: int = 0,
        stream=None) -> int:
    """Solve a configured problem, write artifacts, gate on invariants."""
    stream = sys.stdout if stream is None else stream
    try:
        rc = RunConfig.from_path(config_path)
        if out_dir is not None:
            rc.output.out_dir = str(out_dir)
        if seed is not None:
            rc.oracle.seed = int(seed)
        cfg = rc.build_solve_config(refine)
    except (ConfigError, ParameterError) as exc:
        print(f"config error: {exc}", file=stream)
        return 2
    try:
        bundle = _execute(rc, cfg)
    except (ConfigError, ParameterError) as exc:
        print(f"config error: {exc}", file=stream)
        return 2
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=stream)
        return 3
    where = _write_artifacts(rc, cfg, bundle)
    print(f"artifacts written to {where}", file=stream)
    if bundle["failed"]:
        print(f"invariant violation: {', '.join(bundle['failed'])}",
              file=stream)
        return 3
    print(f"all {len(bundle['checks'])} checks passed", file=stream)
    return 0


def compare(rc: RunConfig, which: Sequence[str] | None = None,
            refine: int = 0) -> list[dict]:
    """Probe table: PDE value vs oracles vs path estimates.

    Returns one dict per probe with keys among ``x, t, pde, oracle,
    oracle_value, abs_gap, rel_gap, mc_kind, mc_value, mc_stderr``.
    """
    if which is not None:
        rc = dataclasses.replace(
            rc, oracle=dataclasses.replace(rc.oracle, which=list(which)))
    cfg = rc.build_solve_config(refine)
    if cfg.mode == "european":
        report = solve_european(cfg)
    else:
        report = solve_vi(cfg)
    return _probe_rows(rc, cfg, report)


def compare_cli(config_path, seed=None, out_dir=None, refine: int = 0,
                stream=None) -> int:
    stream = sys.stdout if stream is None else stream
    try:
        rc = RunConfig.from_path(config_path)
        if seed is not None:
            rc.oracle.seed = int(seed)
        rows = compare(rc, refine=refine)
    except (ConfigError, ParameterError) as exc:
        print(f"config error: {exc}", file=stream)
        return 2
    header = f"{'x':>9} {'t':>7} {'pde':>12} {'oracle':>12} " \
             f"{'mc':>12} {'stderr':>9} {'abs gap':>10} {'rel gap':>10}"
    print(header, file=stream)
    for row in rows:
        oracle_s = f"{row['oracle_value']:.6f}" if "oracle_value" in row \
            else "-"
        mc_s = f"{row['mc_value']:.6f}" if "mc_value" in row else "-"
        se_s = f"{row['mc_stderr']:.1e}" if "mc_stderr" in row else "-"
        ag = f"{row['abs_gap']:.2e}" if "abs_gap" in row else "-"
        rg = f"{row['rel_gap']:.2e}" if row.get("rel_gap") is not None \
            else "-"
        print(f"{row['x']:>9.4f} {row['t']:>7.3f} {row['pde']:>12.6f} "
              f"{oracle_s:>12} {mc_s:>12} {se_s:>9} {ag:>10} {rg:>10}",
              file=stream)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        cols = ["x", "t", "pde", "oracle", "oracle_value", "abs_gap",
                "rel_gap", "mc_kind", "mc_value", "mc_stderr"]
        lines = [",".join(cols)]
        for row in rows:
            lines.append(",".join(
                "" if row.get(c) is None else
                (row[c] if isinstance(row.get(c), str) else repr(row[c]))
                for c in cols))
        (out / "compare.csv").write_text("\n".join(lines) + "\n")
        print(f"table written to {out / 'compare.csv'}", file=stream)
    return 0


# ---------------------------------------------------------------------------
# self test


def _selftest_cases() -> list[tuple[str, callable]]:
    sig, rate = 0.2, 0.04
    a = 0.5 * sig * sig

    def case_operator_kills_constants():
        model = levy.merton(1.5, -0.05, 0.25)
        grid = SpaceTimeGrid(-0.5, 0.5, 1.5, 60, 0.5, 10)
        op = generator.build_operator(model, grid)
        gf = GridFunction(grid, np.ones(grid.nx + 1), extension="linear")
        out = generator.apply_nonlocal(op, gf)
        assert np.max(np.abs(out)) < 1e-10, "constants must be annihilated"

    def case_penalty_values():
        from . import penalty as penalty_mod
        spec = penalty_mod.build(0.1, -2.0)
        assert spec.value(0.0) == -2.0, "value at zero must equal anchor"
        assert spec.value(1.0) == 0.0, "vanishes beyond the band"
        ys = np.linspace(-1.0, 1.0, 201)
        vals = spec.value(ys)
        assert np.all(vals <= 0.0), "penalty is nonpositive"
        assert np.all(np.diff(vals) >= -1e-15), "penalty is nondecreasing"

    def case_payoff_bounds():
        g = payoff_mod.put(1.0)
        xs = np.linspace(-3.0, 3.0, 401)
        vals = g(xs)
        assert np.all(vals >= 0.0) and np.all(vals <= 1.0), \
            "put values stay in [0, strike]"
        steps = np.abs(np.diff(vals)) / np.diff(xs)
        assert np.max(steps) <= g.lipschitz + 1e-9, "Lipschitz bound"

    def case_grid_refinement():
        grid = SpaceTimeGrid(-1.0, 1.0, 1.0, 40, 1.0, 10)
        fine = grid.refined()
        assert fine.nx == 80 and fine.nt == 20
        assert abs(fine.h - 0.5 * grid.h) < 1e-15

    def case_density_nonnegative():
        model = levy.nig(6.0, -1.0, 0.3)
        ys = np.concatenate([-np.geomspace(1e-3, 2.0, 50),
                             np.geomspace(1e-3, 2.0, 50)])
        assert np.all(np.asarray(levy.density(model, ys)) >= 0.0)

    def case_constant_fixed_point():
        flat = payoff_mod.tabulated([-50.0, 50.0], [0.7, 0.7])
        grid = SpaceTimeGrid(-1.0, 1.0, 1.0, 24, 0.5, 6)
        coeffs = CoefficientField.constants(1.0, 0.0, 0.0)
        cfg = SolveConfig(grid, levy.none(), coeffs, flat, mode="european")
        rep = solve_european(cfg)
        assert np.max(np.abs(rep.value.values - 0.7)) < 1e-12

    def small_put_solve():
        model = levy.merton(1.5, -0.05, 0.25)
        b = rate - a - levy.exp_compensator(model)
        coeffs = CoefficientField.constants(a, b, rate)
        grid = SpaceTimeGrid(-0.5, 0.5, 1.5, 60, 0.25, 20)
        cfg = SolveConfig(grid, model, coeffs, payoff_mod.put(1.0),
                          mode="projected")
        return cfg, solve_vi(cfg)

    def case_zero_obstacle():
        model = levy.merton(1.5, -0.05, 0.25)
        coeffs = CoefficientField.constants(a, 0.0, rate)
        grid = SpaceTimeGrid(-0.5, 0.5, 1.5, 40, 0.25, 10)
        zero = payoff_mod.tabulated([-50.0, 50.0], [0.0, 0.0])
        cfg = SolveConfig(grid, model, coeffs, zero, mode="projected")
        rep = solve_vi(cfg)
        assert np.all(rep.value.values == 0.0), "zero reward, zero value"

    def case_terminal_condition():
        cfg, rep = small_put_solve()
        u = backward_value(rep)
        g = np.asarray(cfg.payoff(cfg.grid.nodes), float)
        assert np.array_equal(u.values[:, -1], g), "terminal slice equals g"

    def case_terminal_all_stopping():
        cfg, rep = small_put_solve()
        u = backward_value(rep)
        tol = 10.0 * (cfg.grid.h ** 2 + cfg.grid.dt) + 1e-9
        part = diagnostics.partition(u, cfg.payoff, tol)
        assert np.all(part.labels[:, -1] == 0), "terminal slice is contact"

    def case_residual_nan_frame():
        cfg, rep = small_put_solve()
        res = residual_vi(rep.value, cfg).values
        assert np.all(np.isnan(res[:, 0])) and np.all(np.isnan(res[:, -1]))
        assert np.isfinite(res).any()

    def case_mc_deterministic_path():
        co = CoefficientField(
            a=lambda x, t: np.zeros_like(np.asarray(x, float)),
            b=lambda x, t: np.full_like(np.asarray(x, float), 0.3),
            r=lambda x, t: np.zeros_like(np.asarray(x, float)))
        batch = mc.simulate(levy.none(), co, 0.1, 1.0, 20, 8, 3)
        assert np.max(np.abs(batch.states[:, -1] - 0.4)) < 1e-12

    def case_mc_constant_reward():
        coeffs = CoefficientField.constants(a, 0.0, 0.0)
        batch = mc.simulate(levy.none(), coeffs, 0.0, 1.0, 50, 8, 4)
        flat = payoff_mod.tabulated([-50.0, 50.0], [2.5, 2.5])
        est = mc.european_estimate(batch, flat, 0.0)
        assert est.price == 2.5 and est.stderr == 0.0

    return [
        ("operator-kills-constants", case_operator_kills_constants),
        ("penalty-template-values", case_penalty_values),
        ("payoff-put-bounds", case_payoff_bounds),
        ("grid-refinement", case_grid_refinement),
        ("density-nonnegative", case_density_nonnegative),
        ("constant-fixed-point", case_constant_fixed_point),
        ("zero-obstacle-zero-value", case_zero_obstacle),
        ("terminal-condition", case_terminal_condition),
        ("terminal-all-stopping", case_terminal_all_stopping),
        ("residual-nan-frame", case_residual_nan_frame),
        ("mc-deterministic-path", case_mc_deterministic_path),
        ("mc-constant-reward", case_mc_constant_reward),
    ]


def selftest(stream=None) -> int:
    """Run the quick invariant suite; 0 if every case passes, else 3."""
    stream = sys.stdout if stream is None else stream
    failed = []
    for name, fn in _selftest_cases():
        try:
            fn()
        except Exception as exc:  # report and continue
            failed.append(name)
            print(f"FAIL {name}: {exc}", file=stream)
        else:
            print(f"PASS {name}", file=stream)
    if failed:
        print(f"selftest failed: {', '.join(failed)}", file=stream)
        return 3
    print(f"selftest passed ({len(_selftest_cases())} cases)", file=stream)
    return 0
