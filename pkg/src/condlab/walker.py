"""Event-driven simulation of the conductance walk and Monte Carlo estimators."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .environment import EnvLaw, Environment, make_rng, sample_environment
from .lattice import Lattice
from .operators import (
    DENSE_LIMIT,
    SparseOperator,
    assemble_generator,
    return_probabilities,
    site_index,
)
from .seeding import hash64


@dataclass
class MCEstimate:
    mean: float
    stderr: float
    count: int

    @classmethod
    def from_samples(cls, samples, ddof: int = 0) -> "MCEstimate":
        x = np.asarray(samples, dtype=float)
        if x.size < 1:
            raise ValueError("need at least one sample")
        sd = float(np.std(x, ddof=ddof)) if x.size > ddof else 0.0
        return cls(float(np.mean(x)), sd / math.sqrt(x.size), int(x.size))

    def as_row(self) -> Tuple[float, float, int]:
        return self.mean, self.stderr, self.count


@dataclass
class WalkPath:
    """One trajectory: ``sites[i]`` is occupied on ``[times[i], times[i+1])``.

    ``times[0]`` is 0; later entries are jump times. ``exited`` marks a walk
    killed on leaving a box, in which case the last jump leads outside and
    is recorded in ``exit_time`` only.
    """

    start: int
    times: List[float]
    sites: List[int]
    t_max: float
    exited: bool = False
    exit_time: Optional[float] = None

    @property
    def jump_times(self) -> List[float]:
        return self.times[1:]

    @property
    def n_jumps(self) -> int:
        return len(self.times) - 1 + (1 if self.exited else 0)

    def position(self, t: float) -> int:
        """Site at time ``t``, or -1 once killed."""
        if self.exited and t >= self.exit_time:
            return -1
        k = int(np.searchsorted(self.times, t, side="right")) - 1
        return self.sites[k]


class _Tables:
    """Per-site neighbor indices, cumulative slot conductances and total rates."""

    def __init__(self, op: SparseOperator, env: Environment):
        lat = op.lattice
        nbr = lat.neighbor_table
        slot_c = env.exterior_conductances()
        rows, slots = np.nonzero(nbr >= 0)
        gen = op.generator
        slot_c[rows, slots] = np.asarray(gen[rows, nbr[rows, slots]]).ravel()
        self.nbr = nbr
        self.cum = np.cumsum(slot_c, axis=1)
        self.rate = self.cum[:, -1].copy()
        self.coords = lat.coords


def _tables(env: Environment) -> _Tables:
    return _Tables(assemble_generator(env), env)


def _trajectory(tab: _Tables, x: int, t_max: float, rng: np.random.Generator) -> WalkPath:
    path = WalkPath(x, [0.0], [x], float(t_max))
    t = 0.0
    while True:
        rate = tab.rate[x]
        t += -math.log(1.0 - rng.random()) / rate
        if t > t_max:
            return path
        slot = int(np.searchsorted(tab.cum[x], rng.random() * rate, side="right"))
        slot = min(slot, tab.cum.shape[1] - 1)
        y = int(tab.nbr[x, slot])
        if y < 0:
            path.exited = True
            path.exit_time = t
            return path
        x = y
        path.times.append(t)
        path.sites.append(x)


def simulate(env: Environment, x0, t_max: float, rng: np.random.Generator) -> WalkPath:
    """Single trajectory up to ``t_max`` (Gillespie scheme)."""
    return simulate_many(env, x0, t_max, 1, rng)[0]


def simulate_many(env: Environment, x0, t_max: float, n: int, rng: np.random.Generator) -> List[WalkPath]:
    """``n`` trajectories from ``x0``, drawn one after another from ``rng``."""
    if t_max < 0:
        raise ValueError("t_max must be nonnegative")
    tab = _tables(env)
    x = site_index(env.lattice, x0)
    return [_trajectory(tab, x, t_max, rng) for _ in range(n)]


@dataclass
class _Ensemble:
    positions: np.ndarray  # (K, m) site at each record time, -1 if killed
    jumps: np.ndarray  # (K, m) jumps made by each record time
    exit_times: np.ndarray  # (R, m) first time outside each exit radius
    kill_times: np.ndarray


def _run_walkers(tab: _Tables, starts: np.ndarray, record_times: Sequence[float],
                 rng: np.random.Generator, exit_radii: Sequence[int] = ()) -> _Ensemble:
    """Advance many independent walkers together until every one passes the horizon."""
    record_times = np.asarray(record_times, dtype=float)
    t_max = float(record_times.max())
    m = len(starts)
    K, R = len(record_times), len(exit_radii)
    positions = np.full((K, m), -1, dtype=np.int64)
    jumps = np.zeros((K, m), dtype=np.int64)
    exit_times = np.full((R, m), np.inf)
    kill_times = np.full(m, np.inf)
    pos = np.asarray(starts, dtype=np.int64).copy()
    clock = np.zeros(m)
    count = np.zeros(m, dtype=np.int64)
    radii = np.asarray(exit_radii, dtype=np.int64)
    if R:
        far = np.abs(tab.coords[pos]).max(axis=1)
        for r in range(R):
            exit_times[r, far > radii[r]] = 0.0
    active = np.arange(m)
    while active.size:
        p = pos[active]
        rate = tab.rate[p]
        hold = -np.log1p(-rng.random(active.size)) / rate
        nxt = clock[active] + hold
        cur = clock[active]
        for k in range(K):
            tk = record_times[k]
            sel = (cur <= tk) & (tk < nxt)
            if sel.any():
                positions[k, active[sel]] = p[sel]
                jumps[k, active[sel]] = count[active[sel]]
        go = nxt <= t_max
        active, p, rate, nxt = active[go], p[go], rate[go], nxt[go]
        if not active.size:
            break
        u = rng.random(active.size) * rate
        slot = (u[:, None] < tab.cum[p]).argmax(axis=1)
        new = tab.nbr[p, slot]
        clock[active] = nxt
        count[active] += 1
        killed = new < 0
        if killed.any():
            kidx = active[killed]
            kill_times[kidx] = nxt[killed]
            for r in range(R):
                first = np.isinf(exit_times[r, kidx])
                exit_times[r, kidx[first]] = nxt[killed][first]
            for k in range(K):
                later = record_times[k] >= nxt[killed]
                jumps[k, kidx[later]] = count[kidx[later]]
        alive = ~killed
        active, new, nxt = active[alive], new[alive], nxt[alive]
        pos[active] = new
        if R:
            far = np.abs(tab.coords[new]).max(axis=1)
            for r in range(R):
                hit = (far > radii[r]) & np.isinf(exit_times[r, active])
                exit_times[r, active[hit]] = nxt[hit]
    return _Ensemble(positions, jumps, exit_times, kill_times)


def estimate_return_prob(env: Environment, x0, t: float, n_samples: int,
                         rng: np.random.Generator) -> MCEstimate:
    """Fraction of simulated walks from ``x0`` sitting at ``x0`` at time ``t``."""
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    if t < 0:
        raise ValueError("t must be nonnegative")
    x = site_index(env.lattice, x0)
    if t == 0:
        return MCEstimate(1.0, 0.0, int(n_samples))
    ens = _run_walkers(_tables(env), np.full(n_samples, x), [t], rng)
    return MCEstimate.from_samples(ens.positions[0] == x)


@dataclass
class ExitStatistics:
    """Exit and jump-count estimates for a walk started inside a box."""

    exit: MCEstimate  # P[tau_radius <= t]
    outer_exit: MCEstimate  # P[tau_{radius+k} <= t]
    many_jumps: MCEstimate  # P[n_t >= k]
    radius: int
    k: int
    pathwise_ok: bool  # every walk leaving B_{radius+k} made at least k jumps


def exit_statistics(env: Environment, x0, t: float, n_samples: int, rng: np.random.Generator,
                    k: int = 1, radius: Optional[int] = None) -> ExitStatistics:
    """Estimate ``P[tau_radius <= t]`` and ``P[n_t >= k]`` on a box environment.

    ``radius + k`` must not exceed the box radius; the default radius is the
    largest allowed. Jumps are counted until time ``t`` or until the walk leaves
    the box, whichever comes first.
    """
    lat = env.lattice
    if lat.is_torus:
        raise ValueError("exit statistics need a box environment")
    if radius is None:
        radius = lat.N - k
    if radius < 0 or radius + k > lat.N:
        raise ValueError("need 0 <= radius and radius + k <= box radius")
    x = site_index(lat, x0)
    if np.abs(lat.coords[x]).max() > radius:
        raise ValueError("start must lie inside the exit box")
    if t == 0:
        zero = MCEstimate(0.0, 0.0, int(n_samples))
        return ExitStatistics(zero, zero, zero, radius, k, True)
    ens = _run_walkers(_tables(env), np.full(n_samples, x), [t], rng, exit_radii=[radius, radius + k])
    exited = ens.exit_times[0] <= t
    outer = ens.exit_times[1] <= t
    many = ens.jumps[0] >= k
    ok = bool(np.all(many[outer]))
    return ExitStatistics(MCEstimate.from_samples(exited), MCEstimate.from_samples(outer),
                          MCEstimate.from_samples(many), radius, k, ok)


@dataclass
class AnnealedEstimate:
    """Environment-averaged return probability on a grid of times."""

    times: np.ndarray
    estimates: List[MCEstimate]
    per_env: np.ndarray  # (n_env, K) quenched values
    omega_origin: np.ndarray  # weight at the origin, per environment
    rate_origin: np.ndarray  # total jump rate at the origin, per environment
    method: str
    radius: int
    warning: Optional[str] = None
    seeds: List[int] = field(default_factory=list)

    @property
    def means(self) -> np.ndarray:
        return np.array([e.mean for e in self.estimates])

    @property
    def stderrs(self) -> np.ndarray:
        return np.array([e.stderr for e in self.estimates])


def required_radius(t_max: float) -> int:
    """Box radius keeping exit leakage below the Carne-Varopoulos tail."""
    return int(math.ceil(3.0 * math.sqrt(t_max)))


def annealed_box(d: int, t_grid: Sequence[float]) -> Lattice:
    return Lattice(d, max(1, required_radius(max(t_grid))), "box")


def annealed_return_prob(
    law: Union[EnvLaw, float],
    lat: Lattice,
    t_grid: Sequence[float],
    n_env: int,
    method: Union[str, Tuple[str, int]] = "exact",
    seed: int = 0,
    seeds: Optional[Sequence[int]] = None,
) -> AnnealedEstimate:
    """Average of ``P^omega_0[X_t = 0]`` over ``n_env`` sampled environments.

    ``method`` is ``"exact"`` (Dirichlet heat kernel on the box) or
    ``("mc", n_walk)``. Environment seeds default to ``hash64(seed, "env", i)``.
    """
    if not isinstance(law, EnvLaw):
        law = EnvLaw(float(law))
    if lat.is_torus:
        raise ValueError("annealed return probabilities use a box lattice")
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.size == 0 or np.any(t_grid < 0):
        raise ValueError("t_grid must be nonempty and nonnegative")
    if n_env < 1:
        raise ValueError("n_env must be at least 1")
    if isinstance(method, str):
        kind, n_walk = method, 0
    else:
        kind, n_walk = method
    if kind not in ("exact", "mc"):
        raise ValueError(f"unknown method {method!r}")
    if kind == "exact" and lat.n_sites > DENSE_LIMIT:
        raise ValueError(f"box with {lat.n_sites} sites exceeds the dense limit")
    if kind == "mc" and n_walk < 1:
        raise ValueError("Monte Carlo method needs n_walk >= 1")
    warning = None
    need = required_radius(float(t_grid.max()))
    if lat.N < need:
        warning = f"box radius {lat.N} is below ceil(3*sqrt(t_max)) = {need}; exit leakage may bias the estimate"
        warnings.warn(warning)
    if seeds is None:
        seeds = [hash64(seed, "env", i) for i in range(n_env)]
    seeds = list(seeds)[:n_env]
    origin = lat.index((0,) * lat.d)
    values = np.empty((len(seeds), t_grid.size))
    omega0 = np.empty(len(seeds))
    rate0 = np.empty(len(seeds))
    for i, s in enumerate(seeds):
        env = sample_environment(law, lat, s)
        op = assemble_generator(env)
        omega0[i] = env.omega[origin]
        rate0[i] = op.rates[origin]
        if kind == "exact":
            values[i] = return_probabilities(op, origin, t_grid)
        else:
            tab = _Tables(op, env)
            ens = _run_walkers(tab, np.full(n_walk, origin), t_grid, make_rng(hash64(s, "walk")))
            values[i] = (ens.positions == origin).mean(axis=1)
    values[:, t_grid == 0] = 1.0
    ests = [MCEstimate.from_samples(values[:, k], ddof=1 if len(seeds) > 1 else 0)
            for k in range(t_grid.size)]
    return AnnealedEstimate(t_grid, ests, values, omega0, rate0, kind, lat.N, warning, seeds)
