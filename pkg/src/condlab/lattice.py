"""Hypercubic tori and boxes: site indexing, neighbor slots and bonds."""

from __future__ import annotations

from enum import Enum
from functools import cached_property
from typing import List, Tuple, Union

import numpy as np

Site = Tuple[int, ...]
Bond = Tuple[Site, Site]


class Boundary(str, Enum):
    TORUS = "torus"
    BOX = "box"


class _Exterior:
    """Marker for a neighbor slot that leaves a Dirichlet box."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "EXTERIOR"


EXTERIOR = _Exterior()


class Lattice:
    """Discrete torus of side ``N`` or box ``[-N, N]^d``.

    Sites are tuples of ints. Torus coordinates live in ``[0, N)``, box
    coordinates in ``[-N, N]``. The linear index is row-major over the
    coordinates (shifted by ``N`` for boxes), so index order agrees with
    lexicographic order of the coordinate tuples.

    Neighbor slots are ordered axis by axis, minus direction first:
    ``x - e_1, x + e_1, x - e_2, x + e_2, ...``.
    """

    def __init__(self, d: int, N: int, boundary: Union[Boundary, str] = Boundary.TORUS):
        boundary = Boundary(boundary)
        if int(d) != d or d < 1:
            raise ValueError(f"dimension must be a positive integer, got {d}")
        if int(N) != N:
            raise ValueError(f"N must be an integer, got {N}")
        if boundary is Boundary.TORUS and N < 3:
            raise ValueError(f"torus side must be at least 3, got {N}")
        if boundary is Boundary.BOX and N < 0:
            raise ValueError(f"box radius must be nonnegative, got {N}")
        self.d = int(d)
        self.N = int(N)
        self.boundary = boundary

    def __repr__(self):
        return f"Lattice(d={self.d}, N={self.N}, boundary={self.boundary.value!r})"

    def __eq__(self, other):
        return (
            isinstance(other, Lattice)
            and (self.d, self.N, self.boundary) == (other.d, other.N, other.boundary)
        )

    def __hash__(self):
        return hash((self.d, self.N, self.boundary))

    @property
    def is_torus(self) -> bool:
        return self.boundary is Boundary.TORUS

    @property
    def side(self) -> int:
        return self.N if self.is_torus else 2 * self.N + 1

    @property
    def offset(self) -> int:
        return 0 if self.is_torus else self.N

    @property
    def n_sites(self) -> int:
        return self.side ** self.d

    @cached_property
    def _strides(self) -> np.ndarray:
        return self.side ** np.arange(self.d - 1, -1, -1, dtype=np.int64)

    @cached_property
    def coords(self) -> np.ndarray:
        """(n_sites, d) array of site coordinates in index order."""
        grid = np.indices((self.side,) * self.d).reshape(self.d, -1).T
        return (grid - self.offset).astype(np.int64)

    def contains(self, x) -> bool:
        x = tuple(x)
        if len(x) != self.d:
            return False
        lo, hi = -self.offset, self.side - self.offset
        return all(lo <= int(c) < hi for c in x)

    def index(self, x) -> int:
        if not self.contains(x):
            raise IndexError(f"site {tuple(x)} is not in {self}")
        return int(np.dot(np.asarray(x, dtype=np.int64) + self.offset, self._strides))

    def indices(self, coords: np.ndarray) -> np.ndarray:
        """Vectorized index of an (m, d) coordinate array (no range check)."""
        return (np.asarray(coords, dtype=np.int64) + self.offset) @ self._strides

    def site(self, i: int) -> Site:
        if not 0 <= i < self.n_sites:
            raise IndexError(f"index {i} out of range for {self}")
        return tuple(int(c) for c in self.coords[i])

    def wrap(self, coords: np.ndarray) -> np.ndarray:
        """Reduce coordinates mod N on a torus (identity on a box)."""
        if self.is_torus:
            return np.mod(coords, self.N)
        return coords

    @cached_property
    def neighbor_table(self) -> np.ndarray:
        """(n_sites, 2d) int array of neighbor indices, -1 for exterior slots."""
        n, d = self.n_sites, self.d
        table = np.empty((n, 2 * d), dtype=np.int64)
        for axis in range(d):
            for k, step in enumerate((-1, 1)):
                moved = self.coords.copy()
                moved[:, axis] += step
                if self.is_torus:
                    table[:, 2 * axis + k] = self.indices(np.mod(moved, self.N))
                else:
                    inside = np.all(np.abs(moved) <= self.N, axis=1)
                    col = np.full(n, -1, dtype=np.int64)
                    col[inside] = self.indices(moved[inside])
                    table[:, 2 * axis + k] = col
        return table

    @cached_property
    def bond_array(self) -> np.ndarray:
        """(n_bonds, 2) array of interior bonds as index pairs, sorted, smaller index first."""
        pairs = []
        for axis in range(self.d):
            plus = self.neighbor_table[:, 2 * axis + 1]
            src = np.arange(self.n_sites, dtype=np.int64)
            keep = plus >= 0
            pairs.append(np.stack([src[keep], plus[keep]], axis=1))
        allpairs = np.concatenate(pairs, axis=0)
        allpairs.sort(axis=1)
        order = np.lexsort((allpairs[:, 1], allpairs[:, 0]))
        return allpairs[order]

    @cached_property
    def exterior_slots(self) -> np.ndarray:
        """Boolean (n_sites, 2d) mask of slots leaving the box (all False on a torus)."""
        return self.neighbor_table < 0

    def ambient(self) -> "Lattice":
        """The box of radius N + 1, which holds every exterior neighbor of a box."""
        if self.is_torus:
            raise ValueError("only boxes have an ambient layer")
        return Lattice(self.d, self.N + 1, Boundary.BOX)

    @cached_property
    def ambient_maps(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Index maps into the ambient box.

        Returns ``(inner, halo, exterior)`` where ``inner[i]`` is the ambient
        index of box site ``i``, ``halo`` lists ambient indices outside the box
        in index order, and ``exterior[i, s]`` is the ambient index of the
        exterior neighbor in slot ``s`` (-1 on interior slots).
        """
        amb = self.ambient()
        inner = amb.indices(self.coords)
        mask = np.ones(amb.n_sites, dtype=bool)
        mask[inner] = False
        halo = np.flatnonzero(mask)
        ext = np.full((self.n_sites, 2 * self.d), -1, dtype=np.int64)
        for axis in range(self.d):
            for k, step in enumerate((-1, 1)):
                slot = 2 * axis + k
                rows = np.flatnonzero(self.exterior_slots[:, slot])
                moved = self.coords[rows].copy()
                moved[:, axis] += step
                ext[rows, slot] = amb.indices(moved)
        return inner, halo, ext


def neighbors(lat: Lattice, x) -> List[Union[Site, _Exterior]]:
    """The 2d neighbor slots of ``x``; box slots outside the box are ``EXTERIOR``."""
    i = lat.index(x)
    return [EXTERIOR if j < 0 else lat.site(int(j)) for j in lat.neighbor_table[i]]


def bonds(lat: Lattice) -> List[Bond]:
    """Every interior nearest-neighbor bond once, smaller endpoint first."""
    return [(lat.site(int(u)), lat.site(int(v))) for u, v in lat.bond_array]


def torus_distance(lat: Lattice, x, y) -> int:
    """Sup-norm distance between two sites, with wrap-around on a torus."""
    diff = np.abs(np.asarray(x) - np.asarray(y))
    if lat.is_torus:
        diff = np.minimum(diff, lat.N - diff)
    return int(diff.max()) if diff.size else 0
