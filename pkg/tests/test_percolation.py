import io
import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from condlab.environment import (EnvLaw, constant_environment, environment_from_weights, make_rng,
                                 monotone_couple, sample_environment)
from condlab.lattice import Lattice
from condlab.percolation import (GoodField, Graph, Strip, crossing_event, distinct_strips, ell_epsilon,
                                 epsilon_good, good_clusters, good_field, induced_subgraph,
                                 isoperimetric_constant, rate_one_relaxation_time,
                                 strip_crossing)


def brute_isoperimetric(graph):
    n = graph.n
    best = 0.0
    for r in range(1, n):
        for A in itertools.combinations(range(n), r):
            A = set(A)
            edge = sum((u in A) != (v in A) for u, v in graph.edges)
            best = max(best, len(A) * (n - len(A)) / (n * edge))
    return best


def random_animal(lat, size, rng):
    sites = {0}
    table = lat.neighbor_table
    while len(sites) < size:
        x = int(rng.choice(sorted(sites)))
        sites.add(int(table[x, rng.integers(table.shape[1])]))
    return np.array(sorted(sites))


def test_uniform_field_is_one_cluster():
    lab = good_clusters(constant_environment(Lattice(2, 6)), 0.5)
    assert len(lab.sizes) == 1 and lab.largest_size == 36 and lab.eta_bad == 0.0


def test_alternating_sites_are_singletons():
    env = environment_from_weights(Lattice(1, 8), [1.0, 0.1] * 4)
    lab = good_clusters(env, 0.5)
    assert list(lab.sizes) == [1, 1, 1, 1]
    assert lab.largest == 0 and lab.eta_bad == 7 / 8


def test_no_good_sites_gives_empty_cluster():
    lab = good_clusters(environment_from_weights(Lattice(1, 4), [0.1] * 4), 0.5)
    assert lab.largest == -1 and lab.largest_size == 0 and lab.eta_bad == 1.0


def test_ties_go_to_smallest_index():
    env = environment_from_weights(Lattice(1, 8), [0.1, 1, 1, 0.1, 0.1, 1, 1, 0.1])
    lab = good_clusters(env, 0.5)
    assert lab.largest == 0 and list(np.flatnonzero(lab.in_largest)) == [1, 2]


def test_threshold_is_inclusive_unless_strict():
    env = environment_from_weights(Lattice(1, 3), [0.5, 0.4, 1.0])
    assert list(good_field(env, 0.5).good) == [True, False, True]
    assert list(good_field(env, 0.5, strict=True).good) == [False, False, True]


def test_epsilon_good_threshold():
    env = environment_from_weights(Lattice(1, 4), [0.25, 0.26, 0.5, 1.0])
    field = epsilon_good(env, 1.0)
    assert field.threshold == 0.25 and list(field.good) == [False, True, True, True]


def test_bad_density_small_in_two_dimensions():
    lat = Lattice(2, 64)
    eta = [good_clusters(sample_environment(EnvLaw(1.0), lat, s), 0.05).eta_bad for s in range(50)]
    assert np.mean(eta) <= 0.10


@given(st.integers(0, 2 ** 32), st.floats(0.05, 0.95))
def test_density_identity_and_maximality(seed, xi):
    env = sample_environment(EnvLaw(1.0), Lattice(2, 6), seed)
    lab = good_clusters(env, xi)
    assert lab.largest_density + lab.eta_bad == 1.0
    good = env.omega >= xi
    assert np.array_equal(lab.labels >= 0, good)
    for u, v in env.lattice.bond_array:
        if good[u] and good[v]:
            assert lab.labels[u] == lab.labels[v]
    if lab.largest >= 0:
        assert lab.largest_size == lab.sizes.max()


def test_cluster_csv():
    buf = io.StringIO()
    good_clusters(environment_from_weights(Lattice(1, 3), [1.0, 0.1, 1.0]), 0.5).to_csv(buf)
    assert buf.getvalue().splitlines() == ["site,cluster_id,is_largest", "0,0,1", "1,-1,0", "2,0,1"]


def test_isoperimetric_examples():
    ring = induced_subgraph(Lattice(1, 4), np.arange(4))
    assert isoperimetric_constant(ring) == 0.5
    assert isoperimetric_constant(Graph(2, np.array([[0, 1]]))) == 0.5
    assert isoperimetric_constant(Graph(1, np.zeros((0, 2), dtype=int))) == 0.0


def test_isoperimetric_limit():
    with pytest.raises(ValueError):
        isoperimetric_constant(Graph(19, np.zeros((0, 2), dtype=int)))


def test_isoperimetric_matches_subset_enumeration():
    lat = Lattice(2, 16)
    rng = make_rng(7)
    for size in range(2, 11):
        graph = induced_subgraph(lat, random_animal(lat, size, rng))
        assert isoperimetric_constant(graph) == pytest.approx(brute_isoperimetric(graph), rel=1e-12)


def test_cheeger_consistency():
    lat = Lattice(2, 32)
    rng = make_rng(8)
    for k in range(50):
        graph = induced_subgraph(lat, random_animal(lat, int(rng.integers(2, 15)), rng))
        assert rate_one_relaxation_time(graph) <= 8 * isoperimetric_constant(graph) ** 2 * (1 + 1e-12)


def test_path_relaxation_time():
    graph = Graph(5, np.array([[i, i + 1] for i in range(4)]))
    assert rate_one_relaxation_time(graph) == pytest.approx(1 / (2 * (1 - math.cos(math.pi / 5))))


def straight(lat, L):
    return Strip((0,) * lat.d, ((0, 1, lat.N // 2),), 1, 1, L)


def test_crossing_trivial_fields():
    lat = Lattice(2, 8)
    for L in (1, 2):
        s = straight(lat, L)
        assert strip_crossing(GoodField(lat, 0.5, np.ones(lat.n_sites, bool)), s)
        assert not strip_crossing(GoodField(lat, 0.5, np.zeros(lat.n_sites, bool)), s)


def test_crossing_needs_connection_between_short_sides():
    lat = Lattice(2, 8)
    s = straight(lat, 2)
    g = s.grid(lat)
    good = np.zeros(lat.n_sites, bool)
    good[g[:, 0]] = True
    assert strip_crossing(GoodField(lat, 0.5, good), s)
    good[g[2, 0]] = False
    assert not strip_crossing(GoodField(lat, 0.5, good), s)
    good[g[1:4, 1]] = True
    assert strip_crossing(GoodField(lat, 0.5, good), s)


@given(st.integers(0, 2 ** 32), st.integers(1, 3))
def test_crossing_is_monotone(seed, L):
    lat = Lattice(2, 10)
    rng = make_rng(seed)
    good = rng.random(lat.n_sites) < 0.6
    more = good | (rng.random(lat.n_sites) < 0.3)
    for s in distinct_strips_sample(lat, L):
        if strip_crossing(GoodField(lat, 0.5, good), s):
            assert strip_crossing(GoodField(lat, 0.5, more), s)


def distinct_strips_sample(lat, L):
    return [straight(lat, L), Strip((2, 3), ((0, 1, 3), (1, -1, 2)), 1, 1, L)]


@pytest.mark.parametrize("L", [1, 2])
def test_crossing_event_matches_all_strips(L):
    lat = Lattice(2, 7)
    strips = distinct_strips(lat, L)
    outcomes = []
    for seed in range(12):
        density = 0.9 + 0.008 * seed if L == 1 else 0.8 + 0.015 * seed
        field = GoodField(lat, 0.5, make_rng(seed).random(lat.n_sites) < density)
        outcomes.append(crossing_event(field, L))
        assert outcomes[-1] == all(strip_crossing(field, s) for s in strips)
    assert any(outcomes) and not all(outcomes)


def test_ell_epsilon_trivial_fields():
    lat = Lattice(2, 10)
    assert ell_epsilon(constant_environment(lat), 1.0) == 1
    assert ell_epsilon(environment_from_weights(lat, np.full(lat.n_sites, 0.01)), 1.0) == math.inf


def test_ell_epsilon_needs_torus_in_two_dimensions():
    with pytest.raises(ValueError):
        ell_epsilon(constant_environment(Lattice(1, 10)), 1.0)
    with pytest.raises(ValueError):
        ell_epsilon(constant_environment(Lattice(2, 3, "box")), 1.0)


@pytest.mark.parametrize("seed", range(6))
def test_ell_epsilon_is_monotone(seed):
    lat = Lattice(2, 10)
    env = sample_environment(EnvLaw(2.0), lat, seed)
    ells = [ell_epsilon(env, eps) for eps in (0.25, 0.5, 1.0, 2.0)]
    assert all(a >= b for a, b in zip(ells, ells[1:]))
    up = monotone_couple(env, np.sqrt)
    assert ell_epsilon(up, 0.5) <= ells[1]
