import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from condlab.bounds import carne_varopoulos
from condlab.environment import EnvLaw, constant_environment, environment_from_weights, make_rng, sample_environment
from condlab.lattice import Lattice
from condlab.operators import assemble_generator, heat_kernel_row
from condlab.walker import (MCEstimate, annealed_box, annealed_return_prob, estimate_return_prob,
                            exit_statistics, required_radius, simulate, simulate_many)


def test_zero_horizon_path_stays_put():
    env = sample_environment(EnvLaw(1.0), Lattice(2, 4), 0)
    path = simulate(env, (1, 2), 0.0, make_rng(0))
    assert path.sites == [env.lattice.index((1, 2))] and path.jump_times == []


def test_negative_horizon_rejected():
    with pytest.raises(ValueError):
        simulate(constant_environment(Lattice(1, 4)), (0,), -1.0, make_rng(0))


def test_first_holding_time_has_unit_mean():
    env = environment_from_weights(Lattice(1, 4), [0.5, 1.0, 1.0, 1.0])
    holds = np.array([p.times[1] for p in simulate_many(env, (0,), 20.0, 10 ** 5, make_rng(11))])
    est = MCEstimate.from_samples(holds)
    assert abs(est.mean - 1.0) <= 3 * est.stderr


@given(st.integers(0, 2 ** 32), st.booleans())
def test_paths_are_nearest_neighbor_and_increasing(seed, torus):
    lat = Lattice(2, 3, "torus" if torus else "box")
    env = sample_environment(EnvLaw(0.5), lat, seed)
    table = lat.neighbor_table
    for path in simulate_many(env, 0, 5.0, 5, make_rng(seed)):
        times = np.asarray(path.times)
        assert times[0] == 0.0 and np.all(np.diff(times) > 0) and times[-1] <= 5.0
        for a, b in zip(path.sites, path.sites[1:]):
            assert b in table[a]
        assert math.isfinite(path.n_jumps)
        if path.exited:
            assert path.exit_time <= 5.0 and path.position(5.0) == -1


def test_same_seed_same_path():
    env = sample_environment(EnvLaw(0.5), Lattice(2, 6), 3)
    a = simulate(env, 0, 10.0, make_rng(5))
    b = simulate(env, 0, 10.0, make_rng(5))
    assert a.times == b.times and a.sites == b.sites


def test_return_estimate_at_time_zero():
    env = sample_environment(EnvLaw(1.0), Lattice(1, 8), 0)
    assert estimate_return_prob(env, 0, 0.0, 10, make_rng(0)).as_row() == (1.0, 0.0, 10)


def test_return_estimate_matches_kernel():
    env = sample_environment(EnvLaw(0.5), Lattice(1, 8), 21)
    exact = heat_kernel_row(assemble_generator(env), 0, 2.0)[0]
    est = estimate_return_prob(env, 0, 2.0, 10 ** 5, make_rng(21))
    assert abs(est.mean - exact) <= 3 * est.stderr


def test_return_estimate_is_reproducible():
    env = sample_environment(EnvLaw(0.5), Lattice(2, 4), 2)
    a = estimate_return_prob(env, 0, 1.5, 1000, make_rng(9))
    b = estimate_return_prob(env, 0, 1.5, 1000, make_rng(9))
    assert a == b


def test_exit_statistics_at_time_zero():
    env = constant_environment(Lattice(1, 5, "box"))
    stats = exit_statistics(env, (0,), 0.0, 100, make_rng(0), k=2)
    assert stats.exit.mean == 0.0 and stats.many_jumps.mean == 0.0


@given(st.integers(0, 2 ** 32), st.integers(1, 3))
def test_outer_exit_needs_enough_jumps(seed, k):
    env = sample_environment(EnvLaw(1.0), Lattice(2, 4, "box"), seed)
    stats = exit_statistics(env, (0, 0), 3.0, 300, make_rng(seed), k=k, radius=4 - k)
    assert stats.pathwise_ok
    assert stats.outer_exit.mean <= stats.many_jumps.mean


def test_exit_start_must_lie_inside():
    env = constant_environment(Lattice(1, 5, "box"))
    with pytest.raises(ValueError):
        exit_statistics(env, (5,), 1.0, 10, make_rng(0), k=1, radius=3)


def test_exit_probability_below_tail_bound():
    env = constant_environment(Lattice(1, 20, "box"))
    stats = exit_statistics(env, (0,), 1.0, 10 ** 5, make_rng(20), k=1)
    assert stats.radius == 19
    assert stats.exit.mean <= carne_varopoulos(1.0, 20, 1) + 3 * max(stats.exit.stderr, 1 / 10 ** 5)


def test_annealed_at_time_zero_is_one():
    est = annealed_return_prob(0.5, Lattice(1, 3, "box"), [0.0, 1.0], 5, seed=1)
    assert est.estimates[0].mean == 1.0


def test_annealed_above_sitting_still():
    t_grid = [0.5, 2.0, 8.0]
    lat = annealed_box(1, t_grid)
    assert lat.N == required_radius(8.0) == 9
    est = annealed_return_prob(0.5, lat, t_grid, 200, seed=4)
    for k, t in enumerate(t_grid):
        still = np.mean(np.exp(-est.rate_origin * t))
        lower = np.mean(np.exp(-2 * est.omega_origin * t))
        assert np.all(est.rate_origin <= 2 * est.omega_origin + 1e-15)
        assert est.means[k] >= still - 1e-12
        assert est.means[k] >= lower - 3 * est.stderrs[k]


def test_annealed_warns_on_small_box():
    with pytest.warns(UserWarning):
        est = annealed_return_prob(0.5, Lattice(1, 2, "box"), [100.0], 2, seed=0)
    assert est.warning is not None


def test_annealed_methods_agree():
    lat = Lattice(1, 5, "box")
    exact = annealed_return_prob(0.5, lat, [1.0, 2.0], 4, seed=8)
    mc = annealed_return_prob(0.5, lat, [1.0, 2.0], 4, method=("mc", 20000), seed=8)
    diff = np.abs(exact.per_env - mc.per_env)
    p = exact.per_env
    assert np.all(diff <= 4 * np.sqrt(p * (1 - p) / 20000) + 1e-12)
