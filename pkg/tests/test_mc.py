"""Path simulation and policy estimates: moments, oracles, determinism.

Expected values come from independent oracles computed first (closed-form
put prices, a 5000-step binomial tree, Poisson/Gaussian moments); random
comparisons use fixed seeds and 4-standard-error windows.
"""

import numpy as np
import pytest

from jumpstop import levy, mc, payoff
from jumpstop.errors import ParameterError
from jumpstop.grids import CoefficientField

SIG, R = 0.2, 0.04
A = 0.5 * SIG * SIG
PUT = payoff.put(1.0)

BS_PUT = 0.06003997632506752        # closed form, frozen
BINOMIAL_PUT = 0.06403947802179197  # 5000-step tree, frozen
MERTON_PUT = 0.11765465521320372    # mixture series, frozen


def diffusion_coeffs():
    return CoefficientField.constants(A, R - A, R)


def merton_setup():
    mod = levy.merton(1.5, -0.05, 0.25)
    b = R - A - levy.exp_compensator(mod)
    return mod, CoefficientField.constants(A, b, R)


def degenerate_coeffs(drift: float, rate: float) -> CoefficientField:
    return CoefficientField(
        a=lambda x, t: np.zeros_like(np.asarray(x, dtype=float)),
        b=lambda x, t: np.full_like(np.asarray(x, dtype=float), drift),
        r=lambda x, t: np.full_like(np.asarray(x, dtype=float), rate))


@pytest.fixture(scope="module")
def diffusion_batch():
    return mc.simulate(levy.none(), diffusion_coeffs(), 0.0, 1.0,
                       100_000, 64, 17)


@pytest.fixture(scope="module")
def merton_batch():
    mod, coeffs = merton_setup()
    return mc.simulate(mod, coeffs, 0.0, 1.0, 100_000, 64, 13)


# ---------------------------------------------------------------------------
# simulation


def test_drift_only_paths_are_exact():
    batch = mc.simulate(levy.none(), degenerate_coeffs(0.3, 0.0),
                        0.1, 1.0, 50, 16, 7)
    assert np.max(np.abs(batch.states[:, -1] - 0.4)) < 1e-12
    assert batch.n_paths == 50 and batch.n_steps == 16
    assert batch.x0 == 0.1


def test_gaussian_terminal_moments():
    batch = mc.simulate(levy.none(), diffusion_coeffs(), 0.0, 1.0,
                        100_000, 64, 11)
    xT = batch.states[:, -1]
    n = batch.n_paths
    se_mean = SIG / np.sqrt(n)
    se_var = SIG ** 2 * np.sqrt(2.0 / n)
    assert abs(xT.mean() - (R - A)) <= 4.0 * se_mean
    assert abs(xT.var(ddof=1) - SIG ** 2) <= 4.0 * se_var


def test_jump_count_matches_poisson_rate(merton_batch):
    lam, T = 1.5, 1.0
    se = np.sqrt(lam * T / merton_batch.n_paths)
    assert abs(merton_batch.jump_counts.mean() - lam * T) <= 4.0 * se
    # finite-activity family: every jump sampled, nothing substituted
    assert merton_batch.eps_mc == 0.0
    assert merton_batch.small_var == 0.0


def test_split_scheme_for_infinite_activity():
    mod = levy.nig(6.0, -1.0, 0.3)
    b = R - A - levy.exp_compensator(mod)
    coeffs = CoefficientField.constants(A, b, R)
    batch = mc.simulate(mod, coeffs, 0.0, 0.5, 20_000, 32, 23)
    assert batch.eps_mc == 0.01
    assert batch.small_var == pytest.approx(levy.tails(mod, 0.01).small_var)
    assert np.all(np.isfinite(batch.states))
    assert batch.jump_counts.mean() > 1.0  # activity above the split is high


def test_seed_determinism_and_sensitivity():
    mod, coeffs = merton_setup()
    b1 = mc.simulate(mod, coeffs, 0.0, 1.0, 1000, 16, 99)
    b2 = mc.simulate(mod, coeffs, 0.0, 1.0, 1000, 16, 99)
    b3 = mc.simulate(mod, coeffs, 0.0, 1.0, 1000, 16, 98)
    assert np.array_equal(b1.states, b2.states)
    assert np.array_equal(b1.jump_counts, b2.jump_counts)
    assert not np.array_equal(b1.states, b3.states)


def test_simulate_argument_validation():
    with pytest.raises(ParameterError):
        mc.simulate(levy.none(), diffusion_coeffs(), 0.0, 1.0, 0, 8, 1)
    with pytest.raises(ParameterError):
        mc.simulate(levy.none(), diffusion_coeffs(), 0.0, 0.0, 10, 8, 1)
    with pytest.raises(ParameterError):
        mc.simulate(levy.nig(6.0, -1.0, 0.3), diffusion_coeffs(),
                    0.0, 1.0, 10, 8, 1, eps_mc=0.0)


def test_intensity_cap_error_suggests_larger_split():
    mod = levy.tempered_stable(0.2, 0.2, 1.5, 1.5, 3.0, 3.0)
    with pytest.raises(ParameterError, match="eps_mc"):
        mc.simulate(mod, diffusion_coeffs(), 0.0, 1.0, 10, 8, 1,
                    eps_mc=1e-6)


# ---------------------------------------------------------------------------
# european estimates


def test_constant_reward_zero_rate_is_exact():
    batch = mc.simulate(levy.none(), degenerate_coeffs(0.3, 0.0),
                        0.1, 1.0, 50, 16, 7)
    flat = payoff.tabulated([-50.0, 50.0], [2.5, 2.5])
    est = mc.european_estimate(batch, flat, 0.0)
    assert est.price == 2.5 and est.stderr == 0.0


def test_european_put_within_4se(diffusion_batch):
    est = mc.european_estimate(diffusion_batch, PUT, R)
    assert est.stderr < 1e-3
    assert abs(est.price - BS_PUT) <= 4.0 * est.stderr


def test_jump_european_put_within_4se(merton_batch):
    est = mc.european_estimate(merton_batch, PUT, R)
    assert abs(est.price - MERTON_PUT) <= 4.0 * est.stderr


def test_callable_rate_matches_scalar(merton_batch):
    sub = mc.PathBatch(merton_batch.states[:2000], merton_batch.times,
                       merton_batch.seed, merton_batch.eps_mc,
                       merton_batch.small_var, merton_batch.jump_counts[:2000])
    a = mc.european_estimate(sub, PUT, R)
    b = mc.european_estimate(
        sub, PUT, lambda x, t: np.full_like(np.asarray(x, float), R))
    assert a.price == pytest.approx(b.price, abs=1e-14)
    assert a.stderr == pytest.approx(b.stderr, abs=1e-14)


# ---------------------------------------------------------------------------
# stopping lower bound


def test_lower_bound_brackets_binomial(diffusion_batch):
    lb = mc.stopping_lower_bound(diffusion_batch, PUT, R)
    assert lb.flag == ""
    assert lb.stderr < 1e-3
    # honest lower bound: never significantly above the tree price ...
    assert lb.price <= BINOMIAL_PUT + 4.0 * lb.stderr
    # ... and the policy is near-optimal (within 1% plus noise)
    assert lb.price >= 0.99 * BINOMIAL_PUT - 4.0 * lb.stderr


def test_stopping_dominates_european(diffusion_batch, merton_batch):
    for batch in (diffusion_batch, merton_batch):
        eu = mc.european_estimate(batch, PUT, R)
        lb = mc.stopping_lower_bound(batch, PUT, R)
        assert lb.price >= eu.price - 4.0 * (eu.stderr + lb.stderr)


def test_immediate_exercise_dominance_deep_in_the_money():
    mod, coeffs = merton_setup()
    batch = mc.simulate(mod, coeffs, -0.3, 1.0, 20_000, 32, 41)
    lb = mc.stopping_lower_bound(batch, PUT, R)
    g0 = float(PUT(np.array([-0.3]))[0])
    assert lb.price >= g0 - 4.0 * lb.stderr


def test_zero_reward_gives_exact_zero(diffusion_batch):
    zero = payoff.tabulated([-50.0, 50.0], [0.0, 0.0])
    lb = mc.stopping_lower_bound(diffusion_batch, zero, R)
    assert lb.price == 0.0 and lb.stderr == 0.0


def test_degenerate_paths_fall_back_with_flag():
    # no noise at all: every regression is rank-deficient
    batch = mc.simulate(levy.none(), degenerate_coeffs(0.0, R),
                        -0.1, 1.0, 12_000, 16, 5)
    lb = mc.stopping_lower_bound(batch, PUT, R)
    assert lb.flag != ""
    g0 = float(PUT(np.array([-0.1]))[0])
    assert lb.price == pytest.approx(g0)
    assert lb.stderr == 0.0


def test_policy_preconditions(diffusion_batch):
    small = mc.PathBatch(diffusion_batch.states[:100], diffusion_batch.times,
                         0, 0.0, 0.0, diffusion_batch.jump_counts[:100])
    with pytest.raises(ParameterError):
        mc.stopping_lower_bound(small, PUT, R)
    with pytest.raises(ParameterError):
        mc.stopping_lower_bound(diffusion_batch, PUT, R, basis_degree=0)


# ---------------------------------------------------------------------------
# value-function regularity seen through paths


def test_lipschitz_modulus_common_random_numbers():
    # same seed at two starts: with constant coefficients the paths shift
    # rigidly, so the estimated modulus is bounded by the reward's constant
    mod, coeffs = merton_setup()
    d = 0.01
    pa = mc.european_estimate(
        mc.simulate(mod, coeffs, 0.0, 1.0, 20_000, 32, 31), PUT, R)
    pb = mc.european_estimate(
        mc.simulate(mod, coeffs, d, 1.0, 20_000, 32, 31), PUT, R)
    modulus = abs(pb.price - pa.price) / d
    assert modulus <= PUT.lipschitz * 1.1
