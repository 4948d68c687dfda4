import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from condlab.environment import EnvLaw, constant_environment, environment_from_weights, sample_environment
from condlab.lattice import Lattice
from condlab.mixing import (BRUTE_FORCE_LIMIT, correlation_norm, half_torus, mixing_report, t1_exact,
                            t1_sitting_lower, t1_upper_spectral, t2_bounds, t2_exact_details,
                            t2_exact_small)


def uniform(N, d=1):
    return constant_environment(Lattice(d, N))


def test_three_cycle_worst_start_time():
    # D(t) = (4/3) exp(-3t)
    assert t1_exact(uniform(3), 0.1) == pytest.approx(math.log(40 / 3) / 3, rel=1e-6)


def test_three_cycle_stationary_start_time():
    # C(t) = (8/9) exp(-3t)
    detail = t2_exact_details(uniform(3), 0.1)
    assert detail.time == pytest.approx(math.log(80 / 9) / 3, rel=1e-6)
    assert detail.monotone


def test_worst_start_time_near_one():
    env = sample_environment(EnvLaw(1.0), Lattice(1, 6), 0)
    times = [t1_exact(env, e) for e in (0.5, 0.9, 0.99, 0.999)]
    assert all(b <= a for a, b in zip(times, times[1:]))
    assert 0 < times[-1] < times[0]


def test_eps_must_be_a_probability_level():
    env = uniform(4)
    for eps in (0.0, 1.0, -0.5, 2.0):
        for fn in (t1_exact, t2_exact_small, t2_bounds, t1_upper_spectral, t1_sitting_lower):
            with pytest.raises(ValueError):
                fn(env, eps)


def test_mixing_needs_torus():
    with pytest.raises(ValueError):
        t1_exact(constant_environment(Lattice(1, 3, "box")), 0.1)


def test_slow_site_delays_mixing():
    w = np.ones(8)
    w[3] = 1e-6
    env = environment_from_weights(Lattice(1, 8), w)
    lower = t1_sitting_lower(env, 0.1)
    assert lower == pytest.approx(math.log(1 / (0.1 + 1 / 8)) / (2e-6))
    assert t1_exact(env, 0.1) >= lower


def test_correlation_norm_needs_small_lattice():
    with pytest.raises(ValueError):
        correlation_norm(np.zeros((BRUTE_FORCE_LIMIT + 1,) * 2))


def test_correlation_norm_matches_full_enumeration():
    rng = np.random.default_rng(3)
    M = rng.standard_normal((6, 6))
    M = M + M.T
    best = 0.0
    for bits in range(64):
        g = np.array([1.0 if bits >> i & 1 else -1.0 for i in range(6)])
        best = max(best, np.abs(M @ g).sum())
    assert correlation_norm(M) == pytest.approx(best, rel=1e-14)


def test_zero_time_when_eps_exceeds_initial_correlation():
    env = uniform(3)
    assert t2_exact_details(env, 0.01).values[0] == pytest.approx(8 / 9)
    assert t2_exact_small(env, 0.9) == 0.0
    assert t2_exact_small(env, 0.88) > 0.0


@pytest.mark.parametrize("lat", [Lattice(1, 8), Lattice(1, 12), Lattice(1, 20), Lattice(2, 4)])
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_time_ordering_on_small_tori(lat, seed):
    env = sample_environment(EnvLaw(0.7), lat, seed)
    eps = 0.1
    t1 = t1_exact(env, eps)
    t2 = t2_exact_small(env, eps)
    lo, hi = t2_bounds(env, eps)
    assert t2 <= t1 * (1 + 1e-6)
    assert lo <= t2 <= hi * (1 + 1e-6)
    assert t1 <= t1_upper_spectral(env, eps)
    assert t1 >= t1_sitting_lower(env, eps)


@settings(max_examples=15)
@given(st.integers(0, 2 ** 32), st.floats(0.02, 0.9))
def test_time_ordering_random(seed, eps):
    env = sample_environment(EnvLaw(0.5), Lattice(1, 10), seed)
    t2 = t2_exact_small(env, eps)
    lo, hi = t2_bounds(env, eps)
    assert lo <= t2 <= hi * (1 + 1e-6)
    assert t2 <= t1_exact(env, eps) * (1 + 1e-6)


def test_spectral_upper_bound_is_not_loose_for_uniform_ring():
    env = uniform(16)
    exact = t1_exact(env, 0.1)
    upper = t1_upper_spectral(env, 0.1)
    assert math.isfinite(upper) and exact <= upper <= 20 * exact


def test_halving_eps_adds_tau_log_two():
    env = sample_environment(EnvLaw(1.0), Lattice(2, 5), 9)
    a, b = t1_upper_spectral(env, 0.2), t1_upper_spectral(env, 0.1)
    lam = (math.log(5 / 0.2)) / a
    assert b - a == pytest.approx(math.log(2) / lam, rel=1e-12)


def test_half_torus_witness_grows_quadratically():
    lows = [t2_bounds(uniform(N), 0.1)[0] for N in (8, 16, 32)]
    slope = np.polyfit(np.log([8, 16, 32]), np.log(lows), 1)[0]
    assert abs(slope - 2) <= 0.3


def test_upper_positive_at_small_eps():
    lo, hi = t2_bounds(uniform(8), 0.01)
    assert hi > 0 and lo <= hi


def test_half_torus_shape():
    assert half_torus(uniform(5)).sum() == 2
    assert half_torus(uniform(4, d=2)).sum() == 8


def test_report_prefers_exact_values():
    rep = mixing_report(uniform(3), 0.1)
    assert rep.methods == {"t1": "exact", "t2": "exact"}
    assert rep.t2_value == rep.t2
    big = mixing_report(sample_environment(EnvLaw(1.0), Lattice(1, 24), 0), 0.1)
    assert big.t2 is None and big.methods["t2"] == "bounds-midpoint"
    assert big.t2_value == pytest.approx(sum(big.t2_bounds) / 2)
