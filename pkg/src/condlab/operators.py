"""Generators of the conductance walk: assembly, spectra, heat kernels."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence, TextIO, Union

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eigh_tridiagonal, lapack
from scipy.stats import poisson

from .environment import Environment
from .lattice import Lattice

DENSE_LIMIT = 4096
POISSON_TAIL = 1e-12


class Mode(str, Enum):
    PERIODIC = "periodic"
    DIRICHLET = "dirichlet"


class LanczosError(RuntimeError):
    """Raised when the iterative eigensolver does not reach its tolerance."""

    def __init__(self, message, residuals):
        super().__init__(f"{message}; residual norms: {np.array2string(np.asarray(residuals), precision=3)}")
        self.residuals = np.asarray(residuals)


def site_index(lat: Lattice, x) -> int:
    """Accept a coordinate tuple or a linear index."""
    if isinstance(x, (int, np.integer)):
        if not 0 <= int(x) < lat.n_sites:
            raise IndexError(f"index {x} out of range for {lat}")
        return int(x)
    return lat.index(x)


@dataclass(frozen=True, eq=False)
class SparseOperator:
    """The generator ``L`` as a symmetric sparse matrix.

    Off-diagonal entries are the bond conductances; the diagonal is minus the
    total jump rate, killing included in Dirichlet mode. ``-L`` is positive
    semidefinite.
    """

    lattice: Lattice
    mode: Mode
    generator: sp.csr_matrix
    bonds: np.ndarray
    conductances: np.ndarray
    killing: np.ndarray

    @property
    def n(self) -> int:
        return self.lattice.n_sites

    @property
    def rates(self) -> np.ndarray:
        """Total jump rate out of each site (killing included)."""
        return -self.generator.diagonal()

    def dense(self) -> np.ndarray:
        return self.generator.toarray()

    def neg_dense(self) -> np.ndarray:
        return -self.generator.toarray()


def assemble_generator(env: Environment, mode: Optional[Union[Mode, str]] = None) -> SparseOperator:
    """Build ``L f(x) = sum_y c(x,y)(f(y) - f(x))`` (minus killing on a box).

    The mode defaults to periodic on a torus and Dirichlet on a box.
    """
    lat = env.lattice
    if mode is None:
        mode = Mode.PERIODIC if lat.is_torus else Mode.DIRICHLET
    mode = Mode(mode)
    if mode is Mode.PERIODIC and not lat.is_torus:
        raise ValueError("periodic generator needs a torus lattice")
    if mode is Mode.DIRICHLET and lat.is_torus:
        raise ValueError("Dirichlet generator needs a box lattice")
    n = lat.n_sites
    bonds = lat.bond_array
    c = env.bond_conductances()
    killing = env.exterior_conductances().sum(axis=1)
    u, v = bonds[:, 0], bonds[:, 1]
    out_rate = np.bincount(u, weights=c, minlength=n) + np.bincount(v, weights=c, minlength=n)
    diag = -(out_rate + killing)
    rows = np.concatenate([u, v, np.arange(n)])
    cols = np.concatenate([v, u, np.arange(n)])
    vals = np.concatenate([c, c, diag])
    gen = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    gen.sort_indices()
    return SparseOperator(lat, mode, gen, bonds, c, killing)


def dirichlet_form(op: SparseOperator, f, g) -> float:
    """Half the sum over ordered neighbor pairs of c (df)(dg), plus killing."""
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    if f.shape != (op.n,) or g.shape != (op.n,):
        raise ValueError(f"vectors must have length {op.n}")
    u, v = op.bonds[:, 0], op.bonds[:, 1]
    bulk = np.sum(op.conductances * (f[u] - f[v]) * (g[u] - g[v]))
    return float(bulk + np.sum(op.killing * f * g))


@dataclass
class Spectrum:
    """Eigenvalues of ``-L`` in ascending order, optional orthonormal eigenvectors."""

    values: np.ndarray
    vectors: Optional[np.ndarray] = None
    method: str = "dense"
    residuals: Optional[np.ndarray] = field(default=None, repr=False)

    def gap(self) -> float:
        return float(self.values[1])

    def to_csv(self, stream: TextIO) -> None:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(["index", "eigenvalue"])
        for i, lam in enumerate(self.values):
            writer.writerow([i + 1, repr(float(lam))])


def _operator_scale(op: SparseOperator) -> float:
    # Gershgorin bound on the spectral radius of -L
    return float(max(1.0, 2.0 * op.rates.max()))


def spectrum(
    op: SparseOperator,
    k: Optional[int] = None,
    vectors: bool = False,
    dense_limit: int = DENSE_LIMIT,
    tol: float = 1e-10,
    maxiter: Optional[int] = None,
    seed: int = 0,
    method: str = "auto",
) -> Spectrum:
    """Full spectrum (``k=None``, dense solver) or the ``k`` smallest (Lanczos).

    ``method="jacobi"`` computes the full spectrum from the square-root factor
    of ``-L`` and keeps small eigenvalues accurate relative to their own size,
    which the dense solvers only achieve relative to the largest rate.
    """
    if method not in ("auto", "jacobi"):
        raise ValueError(f"unknown spectrum method {method!r}")
    if k is None:
        if op.n > dense_limit:
            raise ValueError(f"{op.n} sites exceed the dense limit {dense_limit}")
        if method == "jacobi":
            return jacobi_spectrum(op, vectors)
        if op.lattice.d == 1 and not op.lattice.is_torus:
            # a segment gives a tridiagonal matrix in index order
            diag = op.rates
            off = -op.generator.diagonal(1)
            if vectors:
                vals, vecs = eigh_tridiagonal(diag, off)
                return Spectrum(vals, vecs, "tridiagonal")
            return Spectrum(eigh_tridiagonal(diag, off, eigvals_only=True), None, "tridiagonal")
        a = op.neg_dense()
        if vectors:
            vals, vecs = np.linalg.eigh(a)
            return Spectrum(vals, vecs, "dense")
        return Spectrum(np.linalg.eigvalsh(a), None, "dense")
    if not 1 <= k <= op.n:
        raise ValueError(f"k must lie in [1, {op.n}], got {k}")
    neg = (-op.generator).tocsr()
    vals, vecs, res = lanczos_smallest(
        neg.dot, op.n, k, tol=tol * _operator_scale(op), maxiter=maxiter, seed=seed
    )
    return Spectrum(vals, vecs if vectors else None, "lanczos", res)


def incidence_factor(op: SparseOperator) -> np.ndarray:
    """Matrix ``G`` with ``G^T G = -L``: one row per bond, one per killed site."""
    kill = np.flatnonzero(op.killing > 0)
    rows = max(len(op.bonds) + kill.size, op.n)
    G = np.zeros((rows, op.n))
    idx = np.arange(len(op.bonds))
    s = np.sqrt(op.conductances)
    G[idx, op.bonds[:, 0]] = s
    G[idx, op.bonds[:, 1]] = -s
    G[len(op.bonds) + np.arange(kill.size), kill] = np.sqrt(op.killing[kill])
    return G


def jacobi_spectrum(op: SparseOperator, vectors: bool = False) -> Spectrum:
    """Spectrum of ``-L`` as squared singular values of its incidence factor.

    Uses the preconditioned one-sided Jacobi SVD, whose singular values carry
    high relative accuracy for row-graded factors such as this one.
    """
    G = incidence_factor(op)
    # joba=2 selects the variant accurate for diagonally scaled matrices
    sva, _, v, work, _, info = lapack.dgejsv(G, joba=2, jobu=3, jobv=0 if vectors else 3,
                                             jobr=1, jobt=0, jobp=1)
    if info != 0:
        raise np.linalg.LinAlgError(f"Jacobi SVD failed with info={info}")
    sigma = sva[: op.n] * (work[0] / work[1])
    order = np.argsort(sigma)
    vals = sigma[order] ** 2
    vecs = v[:, order] if vectors else None
    return Spectrum(vals, vecs, "jacobi")


def _orthogonalize(w: np.ndarray, basis: np.ndarray) -> np.ndarray:
    # two passes of classical Gram-Schmidt keep the basis orthonormal to machine precision
    for _ in range(2):
        w = w - basis @ (basis.T @ w)
    return w


def lanczos_smallest(matvec, n: int, k: int, tol: float = 1e-10, maxiter: Optional[int] = None,
                     seed: int = 0):
    """Smallest ``k`` eigenpairs of a symmetric operator.

    Block Lanczos with block size ``k`` and full reorthogonalization. A random
    starting block of size ``k`` sees every eigenspace of multiplicity up to
    ``k``, so repeated eigenvalues among the wanted ones are not missed. Ritz
    pairs come from an explicit Rayleigh-Ritz projection, so the reported
    residuals ``||A v - theta v||`` are exact. ``maxiter`` counts applications
    of the operator to a single vector.
    """
    if maxiter is None:
        maxiter = 10 * n
    rng = np.random.default_rng(seed)
    Q = np.zeros((n, n))
    W = np.zeros((n, n))
    m = 0
    breakdown = 1e-3 * tol

    def extend(block):
        # orthonormalize candidate columns against the basis, replacing dead ones
        nonlocal m
        for col in block.T:
            if m == n:
                return
            w = _orthogonalize(col, Q[:, :m])
            nw = np.linalg.norm(w)
            tries = 0
            while nw <= max(breakdown, 1e-8 * np.linalg.norm(col)) and tries < 5:
                w = _orthogonalize(rng.standard_normal(n), Q[:, :m])
                nw = np.linalg.norm(w)
                col = w
                tries += 1
            if nw <= breakdown:
                continue
            Q[:, m] = w / nw
            m += 1

    residuals = np.full(k, np.inf)
    extend(rng.standard_normal((n, k)))
    done = 0
    used = 0
    next_check = k
    while True:
        for j in range(done, m):
            W[:, j] = matvec(Q[:, j])
        used += m - done
        done = m
        if m >= next_check or m == n or used >= maxiter:
            # geometric check schedule keeps the Rayleigh-Ritz cost near linear in m
            next_check = max(m + k, int(1.15 * m))
            vals, vecs, residuals = _ritz(Q[:, :m], W[:, :m], k)
            if np.all(residuals <= tol) or m == n:
                return vals, Q[:, :m] @ vecs, residuals
        if used >= maxiter:
            raise LanczosError(f"Lanczos did not converge in {maxiter} iterations", residuals)
        start = max(0, m - k)
        extend(W[:, start:m].copy())
        if m == done:
            raise LanczosError("Lanczos basis cannot be extended", residuals)


def _ritz(Q: np.ndarray, W: np.ndarray, k: int):
    H = Q.T @ W
    H = 0.5 * (H + H.T)
    theta, S = np.linalg.eigh(H)
    theta, S = theta[:k], S[:, :k]
    R = W @ S - (Q @ S) * theta
    return theta, S, np.linalg.norm(R, axis=0)


def uniformization(op: SparseOperator, start: np.ndarray, t: float) -> np.ndarray:
    """Apply ``exp(tL)`` to the columns of ``start`` by uniformization.

    ``exp(tL) = sum_n Poisson(n; Lambda t) P^n`` with ``P = I + L/Lambda``;
    the series stops once the remaining Poisson mass is below 1e-12.
    """
    if t < 0:
        raise ValueError(f"time must be nonnegative, got {t}")
    v = np.array(start, dtype=float)
    lam = float(op.rates.max())
    mu = lam * t
    if mu == 0.0:
        return v
    n_max = int(poisson.isf(POISSON_TAIL, mu)) + 1
    weights = poisson.pmf(np.arange(n_max + 1), mu)
    P = (sp.identity(op.n, format="csr") + op.generator / lam).tocsr()
    out = weights[0] * v
    for w in weights[1:]:
        v = P @ v
        out += w * v
    return out


def heat_kernel_row(op: SparseOperator, x, t: float) -> np.ndarray:
    """The row ``p_t(x, .)`` computed by uniformization."""
    i = site_index(op.lattice, x)
    e = np.zeros(op.n)
    e[i] = 1.0
    # L is symmetric, so the column exp(tL) e_x equals the row
    return uniformization(op, e, t)


def heat_kernel(op: SparseOperator, t: float, method: str = "spectral",
                spec: Optional[Spectrum] = None) -> np.ndarray:
    """Full matrix ``p_t``, by spectral decomposition or uniformization."""
    if t < 0:
        raise ValueError(f"time must be nonnegative, got {t}")
    if method == "uniformization":
        return uniformization(op, np.eye(op.n), t)
    if method != "spectral":
        raise ValueError(f"unknown heat kernel method {method!r}")
    if spec is None or spec.vectors is None:
        spec = spectrum(op, vectors=True)
    V = spec.vectors
    return (V * np.exp(-spec.values * t)) @ V.T


def return_probabilities(op: SparseOperator, x, times: Sequence[float],
                         spec: Optional[Spectrum] = None) -> np.ndarray:
    """``p_t(x, x)`` for each ``t`` from one dense eigendecomposition."""
    i = site_index(op.lattice, x)
    if spec is None or spec.vectors is None:
        spec = spectrum(op, vectors=True)
    weights = spec.vectors[i] ** 2
    times = np.asarray(times, dtype=float)
    if np.any(times < 0):
        raise ValueError("times must be nonnegative")
    # clip tiny negative eigenvalues from rounding so large t does not blow up
    vals = np.maximum(spec.values, 0.0)
    return np.exp(-np.outer(times, vals)) @ weights


def trace_heat(op: SparseOperator, t: float, route: str = "spectrum") -> float:
    """``sum_i exp(-lambda_i t)``, via the spectrum or via ``sum_x p_t(x,x)``."""
    if t < 0:
        raise ValueError(f"time must be nonnegative, got {t}")
    if route == "spectrum":
        vals = spectrum(op).values
        return float(np.sum(np.exp(-np.maximum(vals, 0.0) * t)))
    if route == "kernel":
        return float(np.trace(uniformization(op, np.eye(op.n), t)))
    raise ValueError(f"unknown trace route {route!r}")
