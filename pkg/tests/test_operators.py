import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.linalg import expm

from condlab.environment import (EnvLaw, Environment, constant_environment, environment_from_weights,
                                 make_rng, sample_environment)
from condlab.lattice import Lattice
from condlab.operators import (Mode, assemble_generator, dirichlet_form, heat_kernel, heat_kernel_row,
                               incidence_factor, return_probabilities, spectrum, trace_heat)


def test_uniform_ring_of_four():
    op = assemble_generator(constant_environment(Lattice(1, 4)))
    assert np.allclose(spectrum(op).values, [0, 2, 2, 4], atol=1e-12)
    assert np.allclose(op.generator.sum(axis=1), 0)


def test_single_site_box_is_killed_on_both_sides():
    op = assemble_generator(constant_environment(Lattice(1, 0, "box")))
    assert op.mode is Mode.DIRICHLET
    assert np.array_equal(op.neg_dense(), [[2.0]])


def test_mode_must_match_lattice():
    with pytest.raises(ValueError):
        assemble_generator(constant_environment(Lattice(1, 4)), Mode.DIRICHLET)


def test_form_examples():
    op = assemble_generator(constant_environment(Lattice(1, 4)))
    f = np.array([1.0, 0, 0, 0])
    assert dirichlet_form(op, f, f) == 2.0
    assert f @ op.neg_dense() @ f == 2.0
    assert dirichlet_form(op, np.ones(4), np.ones(4)) == 0.0


@given(st.integers(0, 2 ** 32), st.booleans())
def test_form_is_bilinear_and_matches_matrix(seed, torus):
    lat = Lattice(2, 4, "torus" if torus else "box")
    op = assemble_generator(sample_environment(EnvLaw(0.7), lat, seed))
    rng = make_rng(seed)
    f, g, h = rng.standard_normal((3, op.n))
    lhs = dirichlet_form(op, f, g + h)
    assert abs(lhs - dirichlet_form(op, f, g) - dirichlet_form(op, f, h)) <= 1e-12 * max(1, abs(lhs))
    assert abs(dirichlet_form(op, f, g) - f @ op.neg_dense() @ g) <= 1e-10 * max(1, abs(lhs))


@given(st.integers(0, 2 ** 32), st.booleans())
def test_generator_structure(seed, torus):
    lat = Lattice(2, 3, "torus" if torus else "box")
    op = assemble_generator(sample_environment(EnvLaw(0.5), lat, seed))
    A = op.dense()
    assert np.array_equal(A, A.T)
    adjacent = np.zeros_like(A, dtype=bool)
    for u, v in lat.bond_array:
        adjacent[u, v] = adjacent[v, u] = True
    off = A - np.diag(np.diag(A))
    assert np.all((off > 0) == adjacent)
    rows = A.sum(axis=1)
    if torus:
        assert np.allclose(rows, 0, atol=1e-14)
    else:
        assert np.all(rows <= 1e-14)
    assert np.linalg.eigvalsh(-A).min() >= -1e-12


def test_three_cycle_spectrum():
    spec = spectrum(assemble_generator(constant_environment(Lattice(1, 3))), vectors=True)
    assert np.allclose(spec.values, [0, 3, 3], atol=1e-12)
    v0 = spec.vectors[:, 0]
    assert np.allclose(np.abs(v0), 1 / math.sqrt(3))


def test_smallest_k_matches_dense_on_random_tori():
    worst = 0.0
    for s in range(30):
        op = assemble_generator(sample_environment(EnvLaw(1.0), Lattice(2, 8), s))
        got = spectrum(op, k=4, seed=s).values
        worst = max(worst, np.max(np.abs(got - spectrum(op).values[:4])))
    assert worst <= 1e-8


def test_smallest_k_finds_repeated_eigenvalues():
    op = assemble_generator(constant_environment(Lattice(2, 6)))
    assert np.allclose(spectrum(op, k=5).values, spectrum(op).values[:5], atol=1e-10)


def test_jacobi_recovers_tiny_gap():
    # the dense solver resolves eigenvalues only relative to the largest rate
    w = np.ones(20)
    w[3], w[11], w[15] = 1e-22, 1e-19, 3e-8
    op = assemble_generator(environment_from_weights(Lattice(1, 20), w))
    mpmath.mp.dps = 60
    M = mpmath.zeros(op.n, op.n)
    for (x, y), c in zip(op.bonds, op.conductances):
        c = mpmath.mpf(float(c))
        M[x, x] += c
        M[y, y] += c
        M[x, y] -= c
        M[y, x] -= c
    exact = np.array([float(e) for e in sorted(mpmath.eigsy(M, eigvals_only=True))])
    got = spectrum(op, method="jacobi").values
    assert np.all(np.abs(got[1:] / exact[1:] - 1) <= 1e-12)


@pytest.mark.parametrize("lat", [Lattice(1, 30), Lattice(2, 6), Lattice(1, 10, "box"), Lattice(2, 3, "box")])
def test_jacobi_agrees_with_dense_on_tame_weights(lat):
    op = assemble_generator(sample_environment(EnvLaw(2.0), lat, 3))
    G = incidence_factor(op)
    assert np.allclose(G.T @ G, op.neg_dense(), atol=1e-14)
    a = spectrum(op, vectors=True)
    j = spectrum(op, vectors=True, method="jacobi")
    assert np.max(np.abs(a.values - j.values)) <= 1e-12
    ka = (a.vectors * np.exp(-a.values)) @ a.vectors.T
    kj = (j.vectors * np.exp(-j.values)) @ j.vectors.T
    assert np.max(np.abs(ka - kj)) <= 1e-12


def test_three_cycle_return_probability():
    op = assemble_generator(constant_environment(Lattice(1, 3)))
    for t in (0.0, 0.3, 1.0, 4.0):
        exact = 1 / 3 + (2 / 3) * math.exp(-3 * t)
        assert abs(heat_kernel_row(op, 0, t)[0] - exact) <= 1e-12
        assert abs(return_probabilities(op, 0, [t])[0] - exact) <= 1e-12


def test_kernel_at_time_zero_is_indicator():
    op = assemble_generator(sample_environment(EnvLaw(1.0), Lattice(2, 4), 2))
    assert np.array_equal(heat_kernel_row(op, 5, 0.0), np.eye(op.n)[5])


def test_slow_site_holds_at_least_exponentially():
    op = assemble_generator(environment_from_weights(Lattice(1, 4), [0.5, 1.0, 1.0, 1.0]))
    assert op.rates[0] == 1.0
    for t in (0.5, 1.0, 3.0):
        row = heat_kernel_row(op, 0, t)
        assert row[0] >= math.exp(-t)
        assert abs(row.sum() - 1) <= 1e-12


@given(st.integers(0, 2 ** 32), st.floats(0.0, 5.0), st.booleans())
def test_kernel_routes_agree_with_expm(seed, t, torus):
    lat = Lattice(2, 3, "torus" if torus else "box")
    op = assemble_generator(sample_environment(EnvLaw(0.8), lat, seed))
    E = expm(op.dense() * t)
    assert np.max(np.abs(heat_kernel(op, t) - E)) <= 1e-10
    assert np.max(np.abs(heat_kernel(op, t, method="uniformization") - E)) <= 1e-10


@given(st.integers(0, 2 ** 32), st.floats(0.01, 3.0), st.floats(0.01, 3.0))
def test_symmetry_and_semigroup(seed, t, s):
    op = assemble_generator(sample_environment(EnvLaw(0.6), Lattice(1, 4, "box"), seed))
    Pt, Ps, Pts = heat_kernel(op, t), heat_kernel(op, s), heat_kernel(op, t + s)
    assert np.max(np.abs(Pt - Pt.T)) <= 1e-10
    assert np.max(np.abs(Pt @ Ps - Pts)) <= 1e-8


def test_dirichlet_eigenvalues_increase_with_weights():
    rng = make_rng(2024)
    for k in range(100):
        lat = Lattice(1, 4, "box") if k % 2 else Lattice(2, 1, "box")
        amb = lat.ambient()
        inner, _, _ = lat.ambient_maps
        low = 1.0 - rng.random(amb.n_sites)
        high = low + (1.0 - low) * rng.random(amb.n_sites)
        a = spectrum(assemble_generator(Environment(lat, low[inner], 0, 1.0, ambient_omega=low))).values
        b = spectrum(assemble_generator(Environment(lat, high[inner], 0, 1.0, ambient_omega=high))).values
        assert np.all(b >= a - 1e-12)


def test_trace_examples():
    op = assemble_generator(constant_environment(Lattice(1, 4)))
    assert trace_heat(op, 0.0) == pytest.approx(4.0)
    for t in (0.1, 1.0, 2.5):
        assert trace_heat(op, t) == pytest.approx(1 + 2 * math.exp(-2 * t) + math.exp(-4 * t), abs=1e-12)
    assert trace_heat(op, 60.0) == pytest.approx(1.0, abs=1e-12)


@given(st.integers(0, 2 ** 32), st.floats(0.0, 4.0))
def test_trace_routes_agree(seed, t):
    op = assemble_generator(sample_environment(EnvLaw(1.2), Lattice(2, 2, "box"), seed))
    assert abs(trace_heat(op, t) - trace_heat(op, t, route="kernel")) <= 1e-9


def test_spectrum_csv(tmp_path):
    import io

    buf = io.StringIO()
    spectrum(assemble_generator(constant_environment(Lattice(1, 3)))).to_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "index,eigenvalue" and len(lines) == 4
