"""Canonical paths, sausages and the analytic bounds built on them."""

from __future__ import annotations

import csv
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, TextIO, Tuple

import numpy as np

from .environment import Environment
from .lattice import Lattice, torus_distance
from .operators import assemble_generator, site_index, spectrum
from .percolation import (
    ClusterLabeling,
    Strip,
    epsilon_good,
    ell_epsilon,
    induced_subgraph,
)


class PathConstructionError(RuntimeError):
    pass


@dataclass
class LatticePath:
    """Sites (linear indices) of a nearest-neighbor path."""

    sites: np.ndarray

    @property
    def length(self) -> int:
        return max(0, len(self.sites) - 1)

    def bond_ids(self, lat: Lattice) -> np.ndarray:
        return path_bond_ids(lat, self.sites)

    def weighted_length(self, lat: Lattice, weights: np.ndarray) -> float:
        """``sum over bonds of 1/W(b)`` for bond weights ``W``."""
        return float(np.sum(1.0 / weights[self.bond_ids(lat)]))


def slot_bond_table(lat: Lattice) -> np.ndarray:
    """(n_sites, 2d) bond id of each neighbor slot, -1 for exterior slots."""
    table = getattr(lat, "_slot_bonds", None)
    if table is None:
        b = lat.bond_array
        lookup = {(int(u), int(v)): k for k, (u, v) in enumerate(b)}
        nbr = lat.neighbor_table
        table = np.full(nbr.shape, -1, dtype=np.int64)
        for x in range(lat.n_sites):
            for s, y in enumerate(nbr[x]):
                if y >= 0:
                    table[x, s] = lookup[(min(x, int(y)), max(x, int(y)))]
        lat._slot_bonds = table
    return table


def path_bond_ids(lat: Lattice, sites: np.ndarray) -> np.ndarray:
    sites = np.asarray(sites, dtype=np.int64)
    if sites.size < 2:
        return np.zeros(0, dtype=np.int64)
    a, b = sites[:-1], sites[1:]
    match = lat.neighbor_table[a] == b[:, None]
    if not match.any(axis=1).all():
        raise ValueError("consecutive path sites are not neighbors")
    return slot_bond_table(lat)[a, match.argmax(axis=1)]


def eta_segments(lat: Lattice, x, y) -> List[Tuple[Tuple[int, ...], int, int, int]]:
    """Segments ``(start, axis, sign, steps)`` of the path matching coordinates in order.

    Each differing coordinate is moved the longer way around the torus; when
    both ways have equal length the positive direction is used.
    """
    if not lat.is_torus:
        raise ValueError("eta paths are defined on the torus")
    N = lat.N
    cur = list(lat.site(site_index(lat, x)))
    target = lat.site(site_index(lat, y))
    segs = []
    for axis in range(lat.d):
        up = (target[axis] - cur[axis]) % N
        if up == 0:
            continue
        down = N - up
        sign, steps = (1, up) if up >= down else (-1, down)
        segs.append((tuple(cur), axis, sign, steps))
        cur[axis] = target[axis]
    return segs


def eta_path(lat: Lattice, x, y) -> LatticePath:
    """The deterministic long-way path from ``x`` to ``y`` (empty when equal)."""
    segs = eta_segments(lat, x, y)
    if not segs:
        return LatticePath(np.zeros(0, dtype=np.int64))
    pts = [np.array(segs[0][0], dtype=np.int64)]
    for _, axis, sign, steps in segs:
        for _ in range(steps):
            nxt = pts[-1].copy()
            nxt[axis] = (nxt[axis] + sign) % lat.N
            pts.append(nxt)
    return LatticePath(lat.indices(np.array(pts)))


def sausage(lat: Lattice, x, y, L: int) -> List[Strip]:
    """Strips of width ``L`` around the long-way path from ``x`` to ``y``.

    With ``k`` differing coordinates and ``k < d`` there is one strip, widened
    along the first coordinate that does not change. With ``k = d`` there are
    two: the first segment widened along the second axis towards where the
    second segment heads, and the remaining segments widened along the first
    axis on the side where the first segment arrives from, so that the two
    overlap in an ``L x L`` square.
    """
    if not lat.is_torus:
        raise ValueError("sausages are defined on the torus")
    if lat.d < 2:
        raise ValueError("sausages need a second axis to widen along (d >= 2)")
    if lat.N <= 3 * L:
        raise ValueError(f"need N > 3L, got N={lat.N}, L={L}")
    if L < 1:
        raise ValueError("width must be positive")
    segs = eta_segments(lat, x, y)
    if not segs:
        return []
    moves = tuple((axis, sign, steps) for _, axis, sign, steps in segs)
    k = len(segs)
    if k < lat.d:
        used = {axis for _, axis, _, _ in segs}
        free = min(i for i in range(lat.d) if i not in used)
        return [Strip(segs[0][0], moves, free, 1, L)]
    first_axis, first_sign = moves[0][0], moves[0][1]
    second_axis, second_sign = moves[1][0], moves[1][1]
    head = Strip(segs[0][0], moves[:1], second_axis, second_sign, L)
    tail = Strip(segs[1][0], moves[1:], first_axis, -first_sign, L)
    return [head, tail]


def sausage_sites(lat: Lattice, strips: Sequence[Strip]) -> np.ndarray:
    if not strips:
        return np.zeros(0, dtype=np.int64)
    return np.unique(np.concatenate([s.grid(lat).ravel() for s in strips]))


@dataclass
class PathSet:
    """One path per ordered pair; ``paths[x * n + y]`` joins ``x`` to ``y``."""

    lattice: Lattice
    paths: List[np.ndarray]
    name: str = ""

    def path(self, x: int, y: int) -> np.ndarray:
        return self.paths[x * self.lattice.n_sites + y]

    @property
    def max_length(self) -> int:
        return max((len(p) - 1 for p in self.paths), default=0)

    def bond_lists(self) -> List[np.ndarray]:
        lat = self.lattice
        return [path_bond_ids(lat, p) for p in self.paths]


def eta_pathset(lat: Lattice) -> PathSet:
    n = lat.n_sites
    paths = []
    for x in range(n):
        for y in range(n):
            paths.append(eta_path(lat, x, y).sites if x != y else np.array([x], dtype=np.int64))
    return PathSet(lat, paths, "eta")


def good_pathset(env: Environment, eps: float, L: int) -> PathSet:
    """Shortest paths inside each sausage avoiding bad sites away from the endpoints.

    An epsilon-bad site may be used only within sup-distance ``L - 1`` of an
    endpoint, so every site at distance more than ``L`` from both endpoints is
    good and every bad bond lies in the corner squares. Among shortest paths
    the lexicographically smallest index sequence is taken.
    """
    lat = env.lattice
    good = epsilon_good(env, eps).good
    n = lat.n_sites
    nbr = lat.neighbor_table.tolist()
    coords = lat.coords
    N = lat.N
    paths: List[np.ndarray] = []
    for x in range(n):
        for y in range(n):
            if x == y:
                paths.append(np.array([x], dtype=np.int64))
                continue
            strips = sausage(lat, x, y, L)
            region = sausage_sites(lat, strips)
            near = np.zeros(region.size, dtype=bool)
            for end in (x, y):
                diff = np.abs(coords[region] - coords[end])
                diff = np.minimum(diff, N - diff)
                near |= diff.max(axis=1) <= L - 1
            allowed = set(region[good[region] | near].tolist())
            path = _lex_shortest(nbr, allowed, x, y)
            if path is None:
                raise PathConstructionError(
                    f"no admissible path from {lat.site(x)} to {lat.site(y)} at width {L}; "
                    f"strips: {strips}"
                )
            paths.append(path)
    return PathSet(lat, paths, f"good(eps={eps}, L={L})")


def _lex_shortest(nbr: List[List[int]], allowed: set, x: int, y: int) -> Optional[np.ndarray]:
    if x not in allowed or y not in allowed:
        return None
    dist = {y: 0}
    queue = deque([y])
    while queue:
        u = queue.popleft()
        if u == x:
            break
        du = dist[u] + 1
        for v in nbr[u]:
            if v in allowed and v not in dist:
                dist[v] = du
                queue.append(v)
    if x not in dist:
        return None
    path = [x]
    u = x
    while u != y:
        want = dist[u] - 1
        u = min(v for v in nbr[u] if dist.get(v) == want)
        path.append(u)
    return np.array(path, dtype=np.int64)


def interior_audit(env: Environment, eps: float, L: int, pathset: PathSet) -> List[Tuple[int, int]]:
    """Pairs whose path has an epsilon-bad site farther than ``L`` from both ends."""
    lat = env.lattice
    good = epsilon_good(env, eps).good
    coords = lat.coords
    N = lat.N
    bad_pairs = []
    n = lat.n_sites
    for x in range(n):
        for y in range(n):
            p = pathset.path(x, y)
            dx = np.abs(coords[p] - coords[x])
            dy = np.abs(coords[p] - coords[y])
            dx = np.minimum(dx, N - dx).max(axis=1)
            dy = np.minimum(dy, N - dy).max(axis=1)
            interior = (dx > L) & (dy > L)
            if np.any(interior & ~good[p]):
                bad_pairs.append((x, y))
    return bad_pairs


def bond_weights_w(env: Environment, eps: float) -> np.ndarray:
    """``W(b) = 1`` on epsilon-good bonds and ``1/N`` on epsilon-bad ones."""
    lat = env.lattice
    good = epsilon_good(env, eps).good
    b = lat.bond_array
    ok = good[b[:, 0]] & good[b[:, 1]]
    return np.where(ok, 1.0, 1.0 / lat.N)


@dataclass
class BoundReport:
    name: str
    value: float
    params: Dict[str, float] = field(default_factory=dict)
    dominated: Optional[float] = None
    details: Dict[str, float] = field(default_factory=dict)

    @property
    def holds(self) -> Optional[bool]:
        if self.dominated is None:
            return None
        return bool(self.value >= self.dominated)

    def to_csv_row(self) -> List[str]:
        params = ";".join(f"{k}={v!r}" for k, v in sorted(self.params.items()))
        dom = "" if self.dominated is None else repr(float(self.dominated))
        return [self.name, params, repr(float(self.value)), dom]


def reports_to_csv(reports: Sequence[BoundReport], stream: TextIO) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["name", "params", "value", "dominated"])
    for r in reports:
        writer.writerow(r.to_csv_row())


def congestion_matrix(pathset: PathSet) -> np.ndarray:
    """``N(b, b')``: number of ordered pairs whose path uses both bonds."""
    nb = len(pathset.lattice.bond_array)
    M = np.zeros((nb, nb), dtype=np.int64)
    for ids in pathset.bond_lists():
        if ids.size:
            ids = np.unique(ids)
            M[np.ix_(ids, ids)] += 1
    return M


def bond_loads(pathset: PathSet, weights: np.ndarray) -> np.ndarray:
    """``sum_{b'} N(b,b')/W(b')`` for each bond, accumulated path by path."""
    nb = len(pathset.lattice.bond_array)
    load = np.zeros(nb)
    for ids in pathset.bond_lists():
        if ids.size:
            ids = np.unique(ids)
            load[ids] += np.sum(1.0 / weights[ids])
    return load


def saloffcoste_bound(env: Environment, pathset: PathSet, weights: Optional[np.ndarray] = None,
                      with_gap: bool = True) -> BoundReport:
    """``N^{-d} max_b (W(b)/c(b)) sum_{b'} N(b,b')/W(b')``, an upper bound on ``1/lambda_2``."""
    lat = env.lattice
    c = env.bond_conductances()
    if weights is None:
        weights = np.ones(len(c))
    load = bond_loads(pathset, weights)
    value = float(lat.N ** (-lat.d) * np.max(weights / c * load))
    dominated = None
    if with_gap:
        dominated = 1.0 / spectrum(assemble_generator(env)).values[1]
    return BoundReport("saloff-coste", value, {"paths": pathset.name}, dominated)


def cluster_relaxation_time(env: Environment, labeling: ClusterLabeling) -> float:
    """Weighted relaxation time of the largest cluster with uniform site mass ``N^{-d}``.

    Equals ``(#G / N^d) / mu_2`` where ``mu_2`` is the gap of the
    conductance-weighted Laplacian restricted to ``G``.
    """
    lat = env.lattice
    sites, graph = labeling.subgraph()
    if graph.n <= 1:
        return 0.0
    w = env.omega[sites]
    A = np.zeros((graph.n, graph.n))
    if len(graph.edges):
        u, v = graph.edges[:, 0], graph.edges[:, 1]
        c = np.minimum(w[u], w[v])
        np.add.at(A, (u, v), -c)
        np.add.at(A, (v, u), -c)
        np.add.at(A, (u, u), c)
        np.add.at(A, (v, v), c)
    vals = np.linalg.eigvalsh(A)
    if vals[1] <= 0:
        return math.inf
    return graph.n / lat.n_sites / float(vals[1])


def q_from_p(p: float) -> float:
    if not 0 < p < 2:
        raise ValueError(f"p must lie in (0, 2), got {p}")
    return 1.0 / (2.0 / p - 1.0)


def poincare_bound(env: Environment, labeling: ClusterLabeling, pathset: PathSet, p: float,
                   eps: float = 0.1) -> BoundReport:
    """Generalized Poincare bound on ``tau(p)`` and the implied bound on ``T2``.

    ``tau(p) <= 2^{2/q} 3^{2/p} eta(B)^{2/p} l* max_b 1/r(b) + 2^{2/q} tau_G``
    with ``r(b) = N^{-d} c(b)`` and ``1 + 1/q = 2/p``; then
    ``T2 <= q eps^{-1/q} tau(p)``. ``value`` is the ``T2`` bound.
    """
    q = q_from_p(p)
    lat = env.lattice
    vol = lat.N ** lat.d
    c = env.bond_conductances()
    eta_b = labeling.eta_bad
    lstar = pathset.max_length
    tau_g = cluster_relaxation_time(env, labeling)
    first = 2 ** (2 / q) * 3 ** (2 / p) * eta_b ** (2 / p) * lstar * float(np.max(vol / c))
    tau_p = first + 2 ** (2 / q) * tau_g
    t2 = q * eps ** (-1 / q) * tau_p
    return BoundReport(
        "poincare-t2", t2, {"p": p, "q": q, "eps": eps},
        details={"tau_p": tau_p, "tau_G": tau_g, "eta_B": eta_b, "l_star": lstar, "first_term": first},
    )


def proposition_bound(env: Environment, eps: float, C: float = 1.0,
                      ell: Optional[float] = None) -> BoundReport:
    """``C (l_eps + 1)^{2d} (N^{2+eps} + max 1/omega)``; infinite when ``l_eps`` is."""
    lat = env.lattice
    if ell is None:
        ell = ell_epsilon(env, eps)
    if math.isinf(ell):
        value = math.inf
    else:
        value = C * (ell + 1) ** (2 * lat.d) * (lat.N ** (2 + eps) + float(np.max(1.0 / env.omega)))
    return BoundReport("proposition", value, {"eps": eps, "C": C, "ell": ell})


def carne_varopoulos(t: float, N: float, d: int, c: float = 1.0) -> float:
    """Exit tail bound ``2 t N^{d-1} exp(-N^2/(4t)) + exp(-c t)``."""
    if t <= 0 or N <= 0:
        raise ValueError("t and N must be positive")
    if c <= 0:
        raise ValueError("c must be positive")
    return 2.0 * t * N ** (d - 1) * math.exp(-N * N / (4.0 * t)) + math.exp(-c * t)
