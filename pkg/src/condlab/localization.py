"""How much of each torus eigenvector lives on the good cluster, and how well
the low cluster modes capture it."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional, TextIO

import numpy as np

from .environment import Environment
from .operators import DENSE_LIMIT, assemble_generator, spectrum
from .percolation import Graph, good_clusters

RELATIVE_SLACK = 1e-8
ABSOLUTE_SLACK = 1e-12


@dataclass
class ClusterSpectrum:
    """Unit-weight Laplacian spectrum of the largest cluster of ``omega >= N^-eps``.

    ``sites`` are lattice indices of the cluster in increasing order; column ``k``
    of ``vectors`` is the k-th eigenvector in that site order.
    """

    eps: float
    sites: np.ndarray
    graph: Graph
    values: np.ndarray
    vectors: np.ndarray

    @property
    def size(self) -> int:
        return int(self.sites.size)


def cluster_spectrum(env: Environment, eps: float) -> ClusterSpectrum:
    lat = env.lattice
    labeling = good_clusters(env, lat.N ** (-float(eps)))
    sites, graph = labeling.subgraph()
    if graph.n > DENSE_LIMIT:
        raise ValueError(f"cluster of {graph.n} sites exceeds the dense limit")
    if graph.n == 0:
        return ClusterSpectrum(eps, sites, graph, np.zeros(0), np.zeros((0, 0)))
    vals, vecs = np.linalg.eigh(graph.laplacian())
    return ClusterSpectrum(eps, sites, graph, np.maximum(vals, 0.0), vecs)


def default_cutoff(d: int, N: int, gamma: float) -> int:
    """``floor(N^(d - eta))`` with ``eta = (1 + gamma) / (1/2 + 1/d)``."""
    eta = (1 + gamma) / (0.5 + 1.0 / d)
    return int(math.floor(N ** (d - eta)))


@dataclass
class LocalizationProfile:
    """Cluster masses and projection residuals of the unit-norm torus eigenvectors.

    ``coefficients[k, i]`` is the overlap of eigenvector ``i`` (restricted to the
    cluster) with cluster mode ``k``; residuals for any cutoff follow from it.
    """

    eps: float
    j: int
    box_values: np.ndarray
    masses: np.ndarray
    coefficients: np.ndarray
    cluster: ClusterSpectrum
    n_sites: int
    d: int
    N: int

    @property
    def density(self) -> float:
        return self.cluster.size / self.n_sites

    def _cutoff(self, j: Optional[int]) -> int:
        if j is None:
            return self.j
        return int(min(max(j, 1), max(self.cluster.size, 1)))

    def residuals(self, j: Optional[int] = None) -> np.ndarray:
        """``sum over the cluster of (psi_i - P^j psi_i)^2`` for every ``i``."""
        j = self._cutoff(j)
        kept = (self.coefficients[:j] ** 2).sum(axis=0)
        return np.maximum(self.masses - kept, 0.0)

    def bound(self, j: Optional[int] = None, factor: Optional[float] = None) -> np.ndarray:
        """``factor * N^eps * lambda_i / mu_j``; ``factor`` defaults to ``2^d``."""
        j = self._cutoff(j)
        factor = 2.0 ** self.d if factor is None else factor
        mu = self.cluster.values[j - 1]
        scale = self.N ** self.eps
        if mu <= 0:
            return np.full(self.box_values.shape, np.inf)
        return factor * scale * self.box_values / mu

    def violations(self, j: Optional[int] = None, factor: Optional[float] = None) -> np.ndarray:
        """Indices ``i`` where the residual exceeds the bound beyond the slack."""
        r = self.residuals(j)
        b = self.bound(j, factor)
        return np.flatnonzero(r > b * (1 + RELATIVE_SLACK) + ABSOLUTE_SLACK)

    def mean_mass(self, indices) -> float:
        return float(np.mean(self.masses[np.asarray(indices)]))

    def to_csv(self, stream: TextIO) -> None:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(["i", "lambda_i", "mass", "residual"])
        r = self.residuals()
        for i, (lam, m, res) in enumerate(zip(self.box_values, self.masses, r), start=1):
            writer.writerow([i, repr(float(lam)), repr(float(m)), repr(float(res))])


def localization_profile(env: Environment, eps: float, j: Optional[int] = None) -> LocalizationProfile:
    lat = env.lattice
    if not lat.is_torus:
        raise ValueError("the localization diagnostic runs on the torus")
    if lat.n_sites > DENSE_LIMIT:
        raise ValueError(f"{lat.n_sites} sites exceed the dense limit")
    box = spectrum(assemble_generator(env), vectors=True)
    clus = cluster_spectrum(env, eps)
    psi_on_cluster = box.vectors[clus.sites]
    masses = (psi_on_cluster ** 2).sum(axis=0)
    coeff = clus.vectors.T @ psi_on_cluster
    if j is None:
        j = default_cutoff(lat.d, lat.N, env.gamma)
    j = int(min(max(j, 1), max(clus.size, 1)))
    return LocalizationProfile(
        float(eps), j, np.maximum(box.values, 0.0), masses, coeff, clus, lat.n_sites, lat.d, lat.N)


def low_modes(count: int = 5) -> np.ndarray:
    """Zero-based indices of the ``count`` lowest nonconstant modes."""
    return np.arange(1, count + 1)


def mid_modes(n: int, fraction: float = 0.1) -> np.ndarray:
    """Zero-based indices of a centered band covering ``fraction`` of the spectrum."""
    half = max(1, int(round(n * fraction / 2)))
    c = n // 2
    return np.arange(c - half, c + half)
