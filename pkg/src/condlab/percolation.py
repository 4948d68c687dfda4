"""Good-site fields, clusters, isoperimetric constants, strip crossings and ell_epsilon."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, List, Optional, TextIO, Tuple

import numpy as np
from scipy import ndimage
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .environment import Environment
from .lattice import Lattice

ISOPERIMETRIC_LIMIT = 18


@dataclass
class GoodField:
    """Boolean field of good sites; ``strict`` means ``omega > threshold``."""

    lattice: Lattice
    threshold: float
    good: np.ndarray
    strict: bool = False
    epsilon: Optional[float] = None


def good_field(env: Environment, threshold: float, strict: bool = False) -> GoodField:
    w = env.omega
    good = w > threshold if strict else w >= threshold
    return GoodField(env.lattice, float(threshold), good, strict)


def epsilon_good(env: Environment, eps: float) -> GoodField:
    """Sites with ``omega > N**(-eps)``."""
    f = good_field(env, env.lattice.N ** (-float(eps)), strict=True)
    f.epsilon = float(eps)
    return f


@dataclass
class Graph:
    """Small undirected graph: vertex count and an (m, 2) edge array."""

    n: int
    edges: np.ndarray

    def laplacian(self) -> np.ndarray:
        L = np.zeros((self.n, self.n))
        if len(self.edges):
            u, v = self.edges[:, 0], self.edges[:, 1]
            np.add.at(L, (u, v), -1.0)
            np.add.at(L, (v, u), -1.0)
            np.add.at(L, (u, u), 1.0)
            np.add.at(L, (v, v), 1.0)
        return L


@dataclass
class ClusterLabeling:
    """Clusters of good sites, ids ordered by smallest member index.

    ``labels[x]`` is the cluster id of a good site and -1 for bad sites.
    ``largest`` is the id of the largest cluster ``G`` (ties go to the
    cluster with the smallest member index), or -1 when nothing is good.
    """

    lattice: Lattice
    labels: np.ndarray
    sizes: np.ndarray
    largest: int

    @property
    def in_largest(self) -> np.ndarray:
        if self.largest < 0:
            return np.zeros(self.lattice.n_sites, dtype=bool)
        return self.labels == self.largest

    @property
    def largest_size(self) -> int:
        return int(self.sizes[self.largest]) if self.largest >= 0 else 0

    @property
    def largest_density(self) -> float:
        return self.largest_size / self.lattice.n_sites

    @property
    def eta_bad(self) -> float:
        """Fraction of sites outside the largest cluster."""
        return (self.lattice.n_sites - self.largest_size) / self.lattice.n_sites

    def subgraph(self, cluster: Optional[int] = None) -> Tuple[np.ndarray, Graph]:
        """Sites of a cluster (default: the largest) and its induced graph."""
        cid = self.largest if cluster is None else cluster
        sites = np.flatnonzero(self.labels == cid) if cid >= 0 else np.array([], dtype=np.int64)
        return sites, induced_subgraph(self.lattice, sites)

    def to_csv(self, stream: TextIO) -> None:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(["site", "cluster_id", "is_largest"])
        big = self.in_largest
        for i, lab in enumerate(self.labels):
            writer.writerow([i, int(lab), int(big[i])])


def induced_subgraph(lat: Lattice, sites: np.ndarray) -> Graph:
    """Graph on ``sites`` (local numbering) with the lattice bonds among them."""
    sites = np.asarray(sites, dtype=np.int64)
    local = np.full(lat.n_sites, -1, dtype=np.int64)
    local[sites] = np.arange(sites.size)
    b = lat.bond_array
    keep = (local[b[:, 0]] >= 0) & (local[b[:, 1]] >= 0)
    return Graph(int(sites.size), local[b[keep]])


def label_clusters(lat: Lattice, good: np.ndarray) -> ClusterLabeling:
    n = lat.n_sites
    good = np.asarray(good, dtype=bool)
    b = lat.bond_array
    keep = good[b[:, 0]] & good[b[:, 1]]
    adj = coo_matrix((np.ones(int(keep.sum())), (b[keep, 0], b[keep, 1])), shape=(n, n))
    _, raw = connected_components(adj, directed=False)
    labels = np.full(n, -1, dtype=np.int64)
    if not good.any():
        return ClusterLabeling(lat, labels, np.zeros(0, dtype=np.int64), -1)
    raw_good = raw[good]
    idx = np.flatnonzero(good)
    # renumber clusters by their smallest member
    first = {}
    for r, i in zip(raw_good, idx):
        if r not in first:
            first[r] = i
    order = sorted(first, key=first.get)
    remap = {r: k for k, r in enumerate(order)}
    labels[idx] = np.array([remap[r] for r in raw_good], dtype=np.int64)
    sizes = np.bincount(labels[idx], minlength=len(order))
    # argmax returns the first maximum, i.e. the smallest minimal index
    return ClusterLabeling(lat, labels, sizes, int(np.argmax(sizes)))


def good_clusters(env: Environment, threshold: float, strict: bool = False) -> ClusterLabeling:
    """Cluster the sites with ``omega >= threshold`` (``>`` if ``strict``)."""
    f = good_field(env, threshold, strict)
    return label_clusters(env.lattice, f.good)


def isoperimetric_constant(graph: Graph, limit: int = ISOPERIMETRIC_LIMIT) -> float:
    """Exhaustive ``sup_A #A #(G-A) / (#G #boundary(A))`` over proper subsets.

    Returns 0 for at most one vertex and ``inf`` for a disconnected graph.
    """
    n = graph.n
    if n > limit:
        raise ValueError(f"graph with {n} vertices exceeds the exhaustive limit {limit}")
    if n <= 1:
        return 0.0
    # A and its complement give the same ratio, so fix the last vertex outside A
    masks = np.arange(1, 2 ** (n - 1), dtype=np.int64)
    size = np.bitwise_count(masks).astype(np.int64)
    boundary = np.zeros(masks.size, dtype=np.int64)
    for u, v in graph.edges:
        boundary += ((masks >> u) ^ (masks >> v)) & 1
    if np.any(boundary == 0):
        return math.inf
    ratio = size * (n - size) / (n * boundary)
    return float(ratio.max())


def rate_one_relaxation_time(graph: Graph) -> float:
    """Inverse spectral gap of the rate-1 walk on a graph (0 for one vertex)."""
    if graph.n <= 1:
        return 0.0
    vals = np.linalg.eigvalsh(graph.laplacian())
    if vals[1] <= 1e-12 * max(1.0, vals[-1]):
        return math.inf
    return float(1.0 / vals[1])


@dataclass(frozen=True)
class Strip:
    """A width-``width`` ribbon swept along a base path of axis-parallel segments.

    ``segments`` are ``(axis, sign, steps)`` moves starting at ``start``; the
    ribbon adds offsets ``0 .. width-1`` along ``widen_axis`` in direction
    ``widen_sign``. Its short sides are the first and last cross-sections.
    """

    start: Tuple[int, ...]
    segments: Tuple[Tuple[int, int, int], ...]
    widen_axis: int
    widen_sign: int
    width: int

    @property
    def length(self) -> int:
        return sum(s for _, _, s in self.segments)

    def base_offsets(self) -> np.ndarray:
        d = len(self.start)
        pts = [np.zeros(d, dtype=np.int64)]
        for axis, sign, steps in self.segments:
            step = np.zeros(d, dtype=np.int64)
            step[axis] = sign
            for _ in range(steps):
                pts.append(pts[-1] + step)
        return np.array(pts)

    def shape(self) -> Tuple:
        """Translation-invariant description with the widening made positive."""
        return (self.segments, self.widen_axis, self.width)

    def origin(self) -> np.ndarray:
        """Corner from which the positively widened shape is translated."""
        o = np.array(self.start, dtype=np.int64)
        if self.widen_sign < 0:
            o[self.widen_axis] -= self.width - 1
        return o

    def grid(self, lat: Lattice) -> np.ndarray:
        """(length+1, width) array of site indices."""
        return _shape_grid(lat, self.shape(), self.origin()[None])[0]

    def key(self, lat: Lattice) -> Tuple:
        """Canonical key: equal keys mean the same ribbon of sites."""
        g = self.grid(lat)
        rows = tuple(map(tuple, g))
        rev = tuple(map(tuple, g[::-1]))
        return (self.width, min(rows, rev))


@lru_cache(maxsize=4096)
def _shape_offsets(shape: Tuple, d: int) -> np.ndarray:
    segments, widen_axis, width = shape
    base = Strip((0,) * d, segments, widen_axis, 1, width).base_offsets()
    wide = np.zeros((width, d), dtype=np.int64)
    wide[:, widen_axis] = np.arange(width)
    off = base[:, None, :] + wide[None, :, :]
    off.flags.writeable = False
    return off


def _shape_grid(lat: Lattice, shape: Tuple, origins: np.ndarray) -> np.ndarray:
    off = _shape_offsets(shape, lat.d)
    coords = origins[:, None, None, :] + off[None]
    coords = lat.wrap(coords)
    return lat.indices(coords.reshape(-1, lat.d)).reshape(coords.shape[:-1])


def strip_crossing(field: GoodField, strip: Strip) -> bool:
    """True iff good sites inside the strip connect its two short sides."""
    return bool(_batch_crossing(field.good[strip.grid(field.lattice)[None]])[0])


_PLANAR = np.zeros((3, 3, 3), dtype=bool)
_PLANAR[1] = ndimage.generate_binary_structure(2, 1)


def _batch_crossing(good: np.ndarray) -> np.ndarray:
    """Crossing indicator for a stack of (rows, width) good-site grids."""
    labels, _ = ndimage.label(good, structure=_PLANAR)
    first, last = labels[:, 0, :], labels[:, -1, :]
    hits = np.isin(first, np.unique(last[last > 0])) & (first > 0)
    return hits.any(axis=1)


def _straight(shape: Tuple) -> bool:
    return len(shape[0]) == 1


@lru_cache(maxsize=64)
def strip_family(lat: Lattice, L: int) -> Tuple[Tuple, ...]:
    """Distinct strip shapes needed for the crossing event at width ``L``.

    Every sausage strip is a translate of one of these shapes or a sub-strip
    (same band, shorter base) of one. Straight shapes keep only the longest
    base per (axis, widening axis), since crossing a strip forces a crossing
    of every sub-strip cut from it.
    """
    from .bounds import sausage

    origin = (0,) * lat.d
    shapes = set()
    for i in range(1, lat.n_sites):
        for s in sausage(lat, origin, lat.site(i), L):
            shapes.add(s.shape())
    longest: Dict[Tuple, Tuple] = {}
    bent = []
    for sh in shapes:
        if _straight(sh):
            (axis, _, steps), = sh[0]
            k = (axis, sh[1])
            if k not in longest or steps > longest[k][0][0][2]:
                longest[k] = (((axis, 1, steps),), sh[1], sh[2])
        else:
            bent.append(sh)
    return tuple(sorted(longest.values())) + tuple(sorted(bent))


def crossing_event(field: GoodField, L: int) -> bool:
    """Whether every strip of every sausage of width ``L`` is crossed."""
    lat = field.lattice
    origins = lat.coords
    for shape in strip_family(lat, L):
        grids = _shape_grid(lat, shape, origins)
        if not _batch_crossing(field.good[grids]).all():
            return False
    return True


def ell_epsilon(env: Environment, eps: float) -> float:
    """Smallest ``L`` with ``3L < N`` whose crossing event holds, else ``inf``."""
    lat = env.lattice
    if not lat.is_torus:
        raise ValueError("ell_epsilon is defined on the torus")
    if lat.d < 2:
        raise ValueError("ell_epsilon needs d >= 2")
    field = epsilon_good(env, eps)
    if not field.good.any():
        return math.inf
    L = 1
    while 3 * L < lat.N:
        if crossing_event(field, L):
            return L
        L += 1
    return math.inf


def distinct_strips(lat: Lattice, L: int) -> List[Strip]:
    """All sausage strips over ordered pairs, deduplicated by canonical key.

    Quadratic in the number of sites; meant for small lattices and audits.
    """
    from .bounds import sausage

    seen = {}
    for i in range(lat.n_sites):
        x = lat.site(i)
        for j in range(lat.n_sites):
            for s in sausage(lat, x, lat.site(j), L):
                seen.setdefault(s.key(lat), s)
    return [seen[k] for k in sorted(seen)]
