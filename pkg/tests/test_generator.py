"""Discrete generator tests.

The jump-operator identities are checked against moment integrals of the
jump density computed with the adaptive quadrature engine (itself
validated against a brute-force Riemann oracle in test_levy.py):

* constants are annihilated;
* the identity map picks up exactly the signed mean of jumps beyond 1;
* squares pick up the full second moment plus the cross term;
* the small/large split recombines to the full operator to rounding for
  every admissible cut, and the small half carries exactly the second
  moment below the cut.
"""

import numpy as np
import pytest

from jumpstop import levy
from jumpstop.errors import ParameterError, UnsupportedOperation
from jumpstop.generator import (apply_local, apply_nonlocal,
                                apply_nonlocal_ext, apply_nonlocal_split,
                                apply_reduced, build_operator,
                                consistency_check, drift_adjustment,
                                operator_summary, stability_rate)
from jumpstop.grids import CoefficientField, GridFunction, SpaceTimeGrid

GRID = SpaceTimeGrid(x_lo=-2.0, x_hi=2.0, pad=1.5, nx=280,
                     t_final=1.0, nt=10)

MODELS = {
    "merton": levy.merton(intensity=1.5, jump_mean=-0.05, jump_std=0.25),
    "kou": levy.kou(intensity=1.0, p_up=0.4, eta_up=12.0, eta_down=8.0),
    "vg": levy.variance_gamma(sigma=0.2, nu=0.3, theta=-0.1),
    "nig": levy.nig(shape=6.0, skew=-1.0, scale=0.3),
    "ts_sym": levy.tempered_stable(0.5, 0.5, 1.2, 1.2, 3.0, 3.0),
    "ts_asym": levy.tempered_stable(0.3, 0.6, 0.4, 1.5, 2.0, 4.0),
}


@pytest.fixture(scope="module")
def ops():
    return {name: build_operator(m, GRID) for name, m in MODELS.items()}


def _gf(fn):
    return GridFunction(GRID, fn(GRID.nodes), extension="clamp_payoff",
                        payoff=fn)


def _both_sides(model, f, lo, hi):
    """Integrate ``f`` (taking the signed jump size) against the density."""
    return levy.integrate_density(model, lambda t: f(t), lo, hi, side="+") + \
        levy.integrate_density(model, lambda t: f(-t), lo, hi, side="-")


def _big_mean_signed(model, op):
    return _both_sides(model, lambda y: y, 1.0, op.radius + 2.0)


def _full_var(model, op):
    return _both_sides(model, lambda y: y * y, 0.0, op.radius + 2.0)


# --- identities on polynomial slices --------------------------------------

@pytest.mark.parametrize("name", sorted(MODELS))
def test_annihilates_constants(ops, name):
    out = apply_nonlocal(ops[name], _gf(lambda x: np.ones_like(x)))
    assert np.max(np.abs(out)) <= 1e-10 * max(1.0, ops[name].far_mass)


@pytest.mark.parametrize("name", sorted(MODELS))
def test_identity_map_picks_up_tail_mean(ops, name):
    op = ops[name]
    out = apply_nonlocal(op, _gf(lambda x: x))
    want = _big_mean_signed(MODELS[name], op)
    tol = 1e-6 * max(1.0, abs(want))
    assert np.max(np.abs(out - want)) <= tol


@pytest.mark.parametrize("name", sorted(MODELS))
def test_square_picks_up_second_moment(ops, name):
    op = ops[name]
    out = apply_nonlocal(op, _gf(lambda x: x * x))
    model = MODELS[name]
    want = _full_var(model, op) + 2.0 * GRID.nodes * \
        _big_mean_signed(model, op)
    tol = 1e-6 * max(1.0, float(np.max(np.abs(want))))
    assert np.max(np.abs(out - want)) <= tol


# --- split invariance and per-half identities ------------------------------

@pytest.mark.parametrize("name", ["merton", "nig", "ts_asym"])
@pytest.mark.parametrize("eps", [0.25, 0.5, 1.0])
def test_split_recombines_exactly(ops, name, eps):
    op = ops[name]
    gf = _gf(lambda x: np.sin(1.3 * x) + 0.3 * x * x)
    full = apply_nonlocal(op, gf)
    small, large = apply_nonlocal_split(op, gf, eps)
    scale = max(1.0, float(np.max(np.abs(full))))
    assert np.max(np.abs(small + large - full)) <= 1e-11 * scale


@pytest.mark.parametrize("name", sorted(MODELS))
@pytest.mark.parametrize("eps", [0.25, 1.0])
def test_small_half_carries_small_second_moment(ops, name, eps):
    op = ops[name]
    small, _ = apply_nonlocal_split(op, _gf(lambda x: x * x), eps)
    want = levy.tails(MODELS[name], eps).small_var
    assert np.max(np.abs(small - want)) <= 1e-6 * max(1.0, want)


@pytest.mark.parametrize("eps", [0.25, 1.0])
def test_small_half_kills_linear_slices(ops, eps):
    small, large = apply_nonlocal_split(ops["nig"], _gf(lambda x: x), eps)
    assert np.max(np.abs(small)) <= 1e-12
    want = _big_mean_signed(MODELS["nig"], ops["nig"])
    assert np.max(np.abs(large - want)) <= 1e-6 * max(1.0, abs(want))


def test_split_rejects_cell_interior_cut(ops):
    op = ops["kou"]
    mids = 0.5 * (op.cell_lo + op.cell_hi)
    wide = mids[(op.cell_hi - op.cell_lo) > 0.4 * op.h]
    gf = _gf(lambda x: x * x)
    with pytest.raises(ParameterError):
        apply_nonlocal_split(op, gf, float(wide[0]))
    with pytest.raises(ParameterError):
        apply_nonlocal_split(op, gf, 1.5)
    with pytest.raises(ParameterError):
        apply_nonlocal_split(op, gf, 0.25 * op.y_core)


# --- agreement with direct quadrature on a generic smooth slice ------------

@pytest.mark.parametrize("name", ["kou", "nig"])
def test_matches_quadrature_on_smooth_function(ops, name):
    op = ops[name]
    model = MODELS[name]
    out = apply_nonlocal(op, _gf(np.sin))
    for x0 in (-0.7, 0.0, 1.1):
        i0 = int(round((x0 - GRID.nodes[0]) / GRID.h))
        x0 = GRID.nodes[i0]

        def small_part(y, x0=x0):
            # cancellation-free sin(x0+y) - sin(x0) - y cos(x0): the naive
            # form is rounding noise near y ~ 0, amplified by the density
            return np.sin(x0) * (-2.0 * np.sin(0.5 * y) ** 2) + \
                np.cos(x0) * (np.sin(y) - y)

        def large_part(y, x0=x0):
            return np.sin(x0 + y) - np.sin(x0)

        want = _both_sides(model, small_part, 0.0, 1.0) + \
            _both_sides(model, large_part, 1.0, op.radius + 2.0)
        assert abs(out[i0] - want) <= 1e-4


# --- structural facts ------------------------------------------------------

@pytest.mark.parametrize("name", sorted(MODELS))
def test_moment_bookkeeping(ops, name):
    op = ops[name]
    model = MODELS[name]
    mass = _both_sides(model, lambda y: np.ones_like(y), op.y_core,
                       op.radius + 2.0)
    assert op.far_mass == pytest.approx(mass, rel=1e-8)
    comp = _both_sides(model, lambda y: y, op.y_core, 1.0)
    assert op.compensator == pytest.approx(comp, rel=1e-8, abs=1e-12)
    small = levy.tails(model, op.y_core).small_var
    assert op.core_var == pytest.approx(small, rel=1e-7)


@pytest.mark.parametrize("name", sorted(MODELS))
def test_monotone_profile_is_nonnegative(ops, name):
    op = ops[name]
    assert np.all(op.far_kernel >= 0.0)
    assert np.all(op.core_stencil >= 0.0)
    assert stability_rate(op, "monotone") > 0.0
    assert stability_rate(op, "accurate") > 0.0


def test_monotone_apply_respects_minimum(ops):
    op = ops["nig"]
    rng = np.random.default_rng(7)
    for _ in range(20):
        vals = rng.uniform(0.5, 2.0, GRID.nx + 1)
        i0 = rng.integers(GRID.nx // 4, 3 * GRID.nx // 4)
        vals[i0] = 0.0
        ne = op.n_ext
        ext = np.concatenate([np.full(ne, 0.75), vals, np.full(ne, 0.75)])
        out = apply_nonlocal_ext(op, ext, profile="monotone",
                                 with_compensator=False)
        assert out[i0] >= -1e-12


def test_linearity(ops):
    op = ops["merton"]
    rng = np.random.default_rng(11)
    u = GridFunction(GRID, rng.standard_normal(GRID.nx + 1), extension="zero")
    w = GridFunction(GRID, rng.standard_normal(GRID.nx + 1), extension="zero")
    both = GridFunction(GRID, 2.0 * u.values - 3.0 * w.values,
                        extension="zero")
    lhs = apply_nonlocal(op, both)
    rhs = 2.0 * apply_nonlocal(op, u) - 3.0 * apply_nonlocal(op, w)
    assert np.max(np.abs(lhs - rhs)) <= 1e-10 * max(1.0,
                                                    np.max(np.abs(rhs)))


# --- reduced form for finite-variation models ------------------------------

@pytest.mark.parametrize("name", ["merton", "kou", "vg"])
def test_reduced_form_consistency(ops, name):
    coeffs = CoefficientField.constants(a=0.05, b=0.1, r=0.04)
    gf = _gf(lambda x: np.cos(0.9 * x) + 0.1 * x * x)
    gap = consistency_check(ops[name], coeffs, gf)
    assert gap <= 1e-5


def test_reduced_form_consistency_fv_tempered_stable():
    model = levy.tempered_stable(0.3, 0.6, 0.4, 0.9, 2.0, 4.0)
    op = build_operator(model, GRID)
    coeffs = CoefficientField.constants(a=0.05, b=0.1, r=0.04)
    gap = consistency_check(op, coeffs, _gf(lambda x: np.sin(x)))
    assert gap <= 1e-5
    assert drift_adjustment(op) == pytest.approx(
        levy.tails(model, 0.5).fv_drift, rel=1e-7, abs=1e-10)


def test_reduced_form_rejects_infinite_variation(ops):
    coeffs = CoefficientField.constants(a=0.05, b=0.1, r=0.04)
    gf = _gf(lambda x: np.sin(x))
    for name in ("nig", "ts_asym"):
        with pytest.raises(UnsupportedOperation):
            consistency_check(ops[name], coeffs, gf)
        with pytest.raises(UnsupportedOperation):
            apply_reduced(ops[name], gf)


# --- local part and trivial model ------------------------------------------

def test_local_part_exact_on_quadratics():
    coeffs = CoefficientField.constants(a=0.07, b=-0.3, r=0.02)
    out = apply_local(coeffs, _gf(lambda x: x * x))
    want = 0.07 * 2.0 + (-0.3) * 2.0 * GRID.nodes
    assert np.max(np.abs(out - want)) <= 1e-11


def test_trivial_model_gives_zero_operator():
    op = build_operator(levy.none(), GRID)
    gf = _gf(lambda x: np.sin(x))
    assert np.max(np.abs(apply_nonlocal(op, gf))) == 0.0
    assert stability_rate(op) == 0.0
    assert drift_adjustment(op) == 0.0
    summary = operator_summary(op)
    assert summary["cells"] == 0 and summary["far_mass"] == 0.0


def test_summary_fields(ops):
    s = operator_summary(ops["nig"])
    assert s["family"] == "nig"
    assert s["cells"] > 100
    assert s["rate_monotone"] > 0.0 and s["rate_accurate"] > 0.0
    assert s["fv_core"] is None
