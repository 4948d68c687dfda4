"""Acceptance suite: each criterion is a function returning a pass/fail record."""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, TextIO

import numpy as np
from scipy.linalg import expm

from .bounds import bond_weights_w, carne_varopoulos, eta_pathset, good_pathset, saloffcoste_bound
from .environment import EnvLaw, constant_environment, make_rng, sample_environment
from .experiments import ExperimentConfig, fit_exponent, ell_threshold, run
from .lattice import Boundary, Lattice
from .mixing import t2_bounds
from .operators import (assemble_generator, lanczos_smallest, return_probabilities, spectrum,
                        uniformization)
from .percolation import Graph, ell_epsilon, isoperimetric_constant, rate_one_relaxation_time
from .seeding import hash64
from .walker import estimate_return_prob, exit_statistics


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} criterion {self.number:2d} {self.title}: {self.detail}"


def _within(value: float, lo: float, hi: float) -> bool:
    return lo <= value <= hi


def torus_eigenvalues_closed_form(d: int, N: int) -> np.ndarray:
    k = np.arange(N)
    one = 2.0 * (1.0 - np.cos(2 * np.pi * k / N))
    vals = one
    for _ in range(d - 1):
        vals = np.add.outer(vals, one).ravel()
    return np.sort(vals)


def criterion_1() -> CriterionResult:
    worst = 0.0
    for d in (1, 2):
        for N in range(3, 17):
            env = constant_environment(Lattice(d, N, Boundary.TORUS))
            got = spectrum(assemble_generator(env)).values
            worst = max(worst, float(np.max(np.abs(got - torus_eigenvalues_closed_form(d, N)))))
    return CriterionResult(1, "analytic torus spectra", worst <= 1e-9, f"max |error| = {worst:.3e} (tol 1e-9)")


def _random_instance(i: int):
    rng = make_rng(hash64("acceptance", 2, i))
    d = 1 + i % 2
    boundary = Boundary.TORUS if (i // 2) % 2 == 0 else Boundary.BOX
    if d == 1:
        N = int(rng.integers(8, 60))
    else:
        N = int(rng.integers(4, 10)) if boundary is Boundary.TORUS else int(rng.integers(2, 6))
    gamma = float(rng.choice([0.3, 0.5, 1.0, 2.0, 5.0]))
    t = float(rng.choice([0.1, 0.5, 1.0, 3.0]))
    env = sample_environment(EnvLaw(gamma), Lattice(d, N, boundary), hash64("acceptance-env", i))
    return env, t


def criterion_2() -> CriterionResult:
    worst_eig = worst_heat = 0.0
    for i in range(30):
        env, t = _random_instance(i)
        op = assemble_generator(env)
        dense = np.linalg.eigvalsh(op.neg_dense())
        k = min(6, op.n - 1)
        vals, _, _ = lanczos_smallest(lambda v: -(op.generator @ v), op.n, k, seed=i)
        worst_eig = max(worst_eig, float(np.max(np.abs(np.sort(vals) - dense[:k]))))
        E = expm(op.dense() * t)
        for x in (0, op.n // 2):
            start = np.zeros(op.n)
            start[x] = 1.0
            worst_heat = max(worst_heat, float(np.max(np.abs(uniformization(op, start, t) - E[x]))))
    ok = worst_eig <= 1e-8 and worst_heat <= 1e-8
    return CriterionResult(2, "iterative/uniformization oracles", ok,
                           f"max |dlambda| = {worst_eig:.3e}, max heat-kernel error = {worst_heat:.3e} (tol 1e-8)")


def _mc_cases():
    cases = []
    for i in range(20):
        rng = make_rng(hash64("acceptance", 3, i))
        d = 1 + i % 2
        boundary = Boundary.TORUS if i % 4 < 2 else Boundary.BOX
        N = int(rng.integers(4, 9)) if boundary is Boundary.TORUS else int(rng.integers(2, 5))
        gamma = float(rng.choice([0.5, 1.0, 3.0]))
        t = float(rng.choice([0.5, 1.0, 2.0, 5.0]))
        env = sample_environment(EnvLaw(gamma), Lattice(d, N, boundary), hash64("acceptance-env", 3, i))
        cases.append((env, t))
    return cases


def _mc_case_ok(env, t, walk_seed, n=100_000):
    lat = env.lattice
    x = lat.index((0,) * lat.d) if not lat.is_torus else 0
    exact = float(return_probabilities(assemble_generator(env), x, [t])[0])
    est = estimate_return_prob(env, x, t, n, make_rng(walk_seed))
    sigma = math.sqrt(max(exact * (1 - exact), 1e-300) / n)
    return abs(est.mean - exact) <= 3 * sigma, abs(est.mean - exact) / sigma


def criterion_3() -> CriterionResult:
    failures = []
    worst = 0.0
    for i, (env, t) in enumerate(_mc_cases()):
        ok, z = _mc_case_ok(env, t, hash64("acceptance-walk", 3, i))
        worst = max(worst, z)
        if not ok:
            failures.append(i)
    rerun_ok = all(_mc_case_ok(env, t, hash64("acceptance-walk-rerun", 3, i))[0]
                   for i, (env, t) in enumerate(_mc_cases()) if i in failures)
    ok = len(failures) <= 1 and rerun_ok
    return CriterionResult(3, "Monte Carlo vs exact return probability", ok,
                           f"{len(failures)} of 20 outside 3 sigma (max |z| = {worst:.2f}), rerun ok = {rerun_ok}")


def criterion_4() -> CriterionResult:
    cfg = ExperimentConfig.build("comparison-lemma", {"seed": 4})
    res = run(cfg)
    ok = bool(res.summary["holds"])
    return CriterionResult(4, "monotone coupling comparison", ok, res.summary_text())


def eden_animal(size: int, rng: np.random.Generator, lat: Lattice) -> np.ndarray:
    """Random connected set grown site by site from the center of a large torus."""
    start = lat.index((lat.N // 2,) * lat.d)
    chosen = [start]
    member = {start}
    while len(chosen) < size:
        frontier = sorted({int(y) for x in chosen for y in lat.neighbor_table[x] if y >= 0} - member)
        pick = frontier[int(rng.integers(len(frontier)))]
        chosen.append(pick)
        member.add(pick)
    return np.array(sorted(chosen), dtype=np.int64)


def _cheeger_audit(count: int = 50) -> int:
    from .percolation import induced_subgraph

    lat = Lattice(2, 32, Boundary.TORUS)
    rng = make_rng(hash64("acceptance", 5, "eden"))
    bad = 0
    for _ in range(count):
        size = int(rng.integers(2, 15))
        graph = induced_subgraph(lat, eden_animal(size, rng, lat))
        if rate_one_relaxation_time(graph) > 8 * isoperimetric_constant(graph) ** 2 * (1 + 1e-12):
            bad += 1
    return bad


def _saloffcoste_audit() -> int:
    bad = 0
    cases = [(1, 12, 1.0, 1.0, s) for s in range(5)] + [(2, 8, 3.0, 1.0, s) for s in range(3)]
    for d, N, gamma, eps, s in cases:
        env = sample_environment(EnvLaw(gamma), Lattice(d, N, Boundary.TORUS), hash64("acceptance", 5, d, N, s))
        ell = ell_epsilon(env, eps) if d >= 2 else math.inf
        paths = eta_pathset(env.lattice) if math.isinf(ell) else good_pathset(env, eps, int(ell))
        for weights in (None, bond_weights_w(env, eps)):
            rep = saloffcoste_bound(env, paths, weights)
            if not rep.holds:
                bad += 1
    return bad


def _exit_audit() -> int:
    bad = 0
    cases = [(constant_environment(Lattice(1, 20, Boundary.BOX)), 1.0)]
    for j, (d, N, t) in enumerate([(1, 3, 1.0), (1, 5, 3.0), (1, 8, 10.0), (2, 3, 1.0), (2, 4, 2.0), (2, 5, 3.0)]):
        env = sample_environment(EnvLaw(1.0), Lattice(d, N, Boundary.BOX), hash64("acceptance", 5, "exit", j))
        cases.append((env, t))
        cases.append((constant_environment(Lattice(d, N, Boundary.BOX)), t))
    for j, (env, t) in enumerate(cases):
        lat = env.lattice
        st = exit_statistics(env, (0,) * lat.d, t, 20_000, make_rng(hash64("acceptance-exit", j)),
                             k=1, radius=lat.N - 1)
        # exiting B_{N-1} means reaching distance N
        if st.exit.mean - 3 * st.exit.stderr > carne_varopoulos(t, lat.N, lat.d):
            bad += 1
    return bad


def criterion_5() -> CriterionResult:
    audit = run(ExperimentConfig.build("bound-audit", {"seed": 5}))
    audit1 = run(ExperimentConfig.build("bound-audit", {"seed": 5, "d": "1", "N": "12", "seeds": "5"}))
    sc = audit.summary["saloff_coste_violations"] + audit1.summary["saloff_coste_violations"] + _saloffcoste_audit()
    pc = audit.summary["poincare_violations"] + audit1.summary["poincare_violations"]
    ch = audit.summary["cheeger_violations"] + audit1.summary["cheeger_violations"] + _cheeger_audit()
    cv = _exit_audit()
    ok = sc == pc == ch == cv == 0
    return CriterionResult(5, "bound dominance", ok,
                           f"violations: saloff-coste {sc}, poincare {pc}, cheeger {ch}, carne-varopoulos {cv}")


def _slope(res) -> float:
    return res.summary["fit"].slope


def criterion_6() -> CriterionResult:
    s3 = _slope(run(ExperimentConfig.build("t1-scaling", {"gamma": repr(1 / 3), "seed": 6})))
    s1 = _slope(run(ExperimentConfig.build("t1-scaling", {"gamma": "1.0", "seed": 6})))
    ok = _within(s3, 2.25, 3.75) and _within(s1, 1.5, 2.5)
    return CriterionResult(6, "T1 scaling exponent", ok,
                           f"gamma=1/3 slope {s3:.3f} (want [2.25, 3.75]); gamma=1 slope {s1:.3f} (want [1.5, 2.5])")


def _uniform_witness_floor(N_grid: Sequence[int], eps: float) -> float:
    """Half of ``min_N N^-2 * witness`` for the homogeneous torus."""
    return 0.5 * min(t2_bounds(constant_environment(Lattice(1, N, Boundary.TORUS)), eps)[0] / N ** 2
                     for N in N_grid)


def criterion_7() -> CriterionResult:
    parts = []
    ok = True
    for g in (1 / 3, 1.0):
        res = run(ExperimentConfig.build("t2-scaling", {"gamma": repr(g), "seed": 7}))
        s = _slope(res)
        floor = _uniform_witness_floor(res.config["N_grid"], res.config["eps"])
        lowest = min(r["lower"] / r["N"] ** 2 for r in res.rows)
        good = _within(s, 1.5, 2.5) and lowest >= floor and res.summary["dominated"] == 1
        ok &= good
        parts.append(f"gamma={g:.4g} slope {s:.3f} (want [1.5, 2.5]), min N^-2 witness {lowest:.4g} "
                     f"(floor {floor:.4g}), T2<=T1 {bool(res.summary['dominated'])}")
    return CriterionResult(7, "T2 scaling exponent", ok, "; ".join(parts))


def criterion_8() -> CriterionResult:
    s_heavy = _slope(run(ExperimentConfig.build("annealed-decay", {"gamma": "0.25", "seed": 8})))
    s_light = _slope(run(ExperimentConfig.build("annealed-decay", {"gamma": "2.0", "seed": 8})))
    ok = _within(s_heavy, -0.35, -0.15) and _within(s_light, -0.70, -0.35)
    return CriterionResult(8, "annealed return-probability decay", ok,
                           f"gamma=0.25 slope {s_heavy:.3f} (want [-0.35, -0.15]); "
                           f"gamma=2 slope {s_light:.3f} (want [-0.70, -0.35])")


def criterion_9() -> CriterionResult:
    res = run(ExperimentConfig.build("min-omega", {"seed": 9}))
    ratios = [float(v) for v in res.summary["median_log_ratio"].split(",")]
    slope = _slope(res)
    ok = all(_within(r, -2.5, -1.5) for r in ratios) and _within(slope, -2.5, -1.5)
    return CriterionResult(9, "minimum weight scaling", ok,
                           f"median log(min)/log N in [{min(ratios):.3f}, {max(ratios):.3f}], slope {slope:.3f} "
                           f"(want within 25% of -2)")


def criterion_10() -> CriterionResult:
    res = run(ExperimentConfig.build("localization", {"seed": 10}))
    s = res.summary
    ok = s["violations"] == 0 and bool(s["ordered"])
    return CriterionResult(10, "eigenvector localization", ok,
                           f"violations {s['violations']}; low-mode mass {s['low_mass']:.4f} < density "
                           f"{s['density']:.4f} < mid-mode mass {s['mid_mass']:.4f}: {bool(s['ordered'])}")


def criterion_11() -> CriterionResult:
    res = run(ExperimentConfig.build("ell-epsilon", {"seed": 11}))
    frac = res.summary["exceed_fraction"]
    thr = ell_threshold(2, 0.5, 1.0)
    return CriterionResult(11, "crossing width frequency", frac <= 0.1,
                           f"P(ell > {thr}) = {frac:.3f} (want <= 0.1)")


SMALL_CONFIGS: Dict[str, Dict[str, str]] = {
    "annealed-decay": {"t_grid": "1,2,4", "n_env": "4", "method": "mc", "n_walk": "2000", "radius": "6"},
    "t1-scaling": {"N_grid": "8,10,12", "seeds": "2"},
    "t2-scaling": {"N_grid": "4,8,12", "seeds": "2"},
    "bound-audit": {"N": "4", "seeds": "2"},
    "localization": {"N": "8", "seeds": "2"},
    "comparison-lemma": {"t_grid": "1,2", "n_env": "3", "radius": "5"},
    "min-omega": {"N_grid": "16,32,64", "seeds": "3"},
    "ell-epsilon": {"N": "12", "seeds": "3"},
}


def criterion_12() -> CriterionResult:
    mismatched = []
    for name, values in SMALL_CONFIGS.items():
        cfg = ExperimentConfig.build(name, {**values, "seed": "12"})
        first = run(cfg, workers=1).to_csv()
        again = run(cfg, workers=1).to_csv()
        parallel = run(cfg, workers=2).to_csv()
        if not first == again == parallel:
            mismatched.append(name)
    ok = not mismatched
    return CriterionResult(12, "determinism", ok,
                           f"{len(SMALL_CONFIGS)} experiments rerun serially and in parallel; mismatches: "
                           f"{', '.join(mismatched) or 'none'}")


CRITERIA: Dict[int, Callable[[], CriterionResult]] = {
    1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5, 6: criterion_6,
    7: criterion_7, 8: criterion_8, 9: criterion_9, 10: criterion_10, 11: criterion_11, 12: criterion_12,
}


def run_criteria(which: Optional[Sequence[int]] = None, stream: Optional[TextIO] = None) -> List[CriterionResult]:
    results = []
    for n in which or sorted(CRITERIA):
        res = CRITERIA[n]()
        results.append(res)
        if stream is not None:
            print(res.line(), file=stream, flush=True)
    return results


if __name__ == "__main__":
    sys.exit(0 if all(r.passed for r in run_criteria(stream=sys.stdout)) else 3)
