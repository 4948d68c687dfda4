"""Worst-start (T1) and stationary-start (T2) convergence times on the torus."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from .environment import Environment
from .operators import DENSE_LIMIT, assemble_generator, spectrum

BRUTE_FORCE_LIMIT = 20
RTOL = 1e-6
# above this many sites the relative-accuracy solver gets too slow
JACOBI_LIMIT = 1024


def _spectrum(env: Environment, vectors: bool = False):
    method = "jacobi" if env.lattice.n_sites <= JACOBI_LIMIT else "auto"
    return spectrum(assemble_generator(env), vectors=vectors, method=method)


class _Kernel:
    """Dense spectral representation of ``p_t`` for repeated evaluation."""

    def __init__(self, env: Environment):
        lat = env.lattice
        if not lat.is_torus:
            raise ValueError("mixing times are defined on the torus")
        if lat.n_sites > DENSE_LIMIT:
            raise ValueError(f"{lat.n_sites} sites exceed the dense limit")
        spec = _spectrum(env, vectors=True)
        self.values = np.maximum(spec.values, 0.0)
        self.vectors = spec.vectors
        self.n = lat.n_sites
        self.uniform = 1.0 / self.n
        if not self.values[1] > 0:
            raise ArithmeticError("spectral gap is not resolved in double precision")
        self.tau = 1.0 / self.values[1]

    def centered(self, t: float) -> np.ndarray:
        """``p_t - 1/n``, dropping the stationary mode exactly."""
        V = self.vectors[:, 1:]
        return (V * np.exp(-self.values[1:] * t)) @ V.T


def _check_eps(eps: float) -> None:
    if not 0 < eps < 1:
        raise ValueError(f"epsilon must lie in (0, 1), got {eps}")


def _first_below(fn: Callable[[float], float], eps: float, scale: float,
                 rtol: float = RTOL) -> Tuple[float, float]:
    """Bracket and bisect a nonincreasing function; returns ``(lo, hi)`` with
    ``fn(lo) > eps >= fn(hi)``."""
    lo, hi = 0.0, scale
    while fn(hi) > eps:
        lo, hi = hi, 2.0 * hi
        if hi > 1e300:
            raise RuntimeError("failed to bracket the convergence time")
    atol = 1e-9 * scale
    while hi - lo > min(rtol * hi, atol) and hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if fn(mid) > eps:
            lo = mid
        else:
            hi = mid
    return lo, hi


def worst_start_distance(kernel: _Kernel, t: float) -> float:
    """``max_x sum_y |p_t(x,y) - N^{-d}|``."""
    return float(np.abs(kernel.centered(t)).sum(axis=1).max())


def t1_exact(env: Environment, eps: float) -> float:
    """``inf{t : max_x sum_y |p_t(x,y) - N^{-d}| <= eps}`` to relative accuracy 1e-6."""
    _check_eps(eps)
    k = _Kernel(env)
    _, hi = _first_below(lambda t: worst_start_distance(k, t), eps, k.tau)
    return hi


def t1_upper_spectral(env: Environment, eps: float) -> float:
    """``tau * log(N^{d/2} / eps)`` with ``tau = 1/lambda_2``."""
    _check_eps(eps)
    lat = env.lattice
    lam2 = _spectrum(env).values[1]
    return float(math.log(lat.N ** (lat.d / 2) / eps) / lam2)


def t1_sitting_lower(env: Environment, eps: float) -> float:
    """Time the slowest site keeps its walker with probability above ``eps + N^{-d}``."""
    _check_eps(eps)
    lat = env.lattice
    level = eps + lat.N ** (-lat.d)
    if level >= 1:
        return 0.0
    return float(math.log(1.0 / level) / (2 * lat.d * float(np.min(env.omega))))


def _sign_vectors(n: int, chunk: int = 1 << 15):
    """Chunks of the 2^(n-1) sign vectors with last entry +1, as columns."""
    total = 1 << (n - 1)
    bits = np.arange(n - 1, dtype=np.int64)
    for start in range(0, total, chunk):
        idx = np.arange(start, min(total, start + chunk), dtype=np.int64)
        G = np.ones((n, idx.size))
        G[:-1] = 1.0 - 2.0 * ((idx[None, :] >> bits[:, None]) & 1)
        yield G


def correlation_norm(M: np.ndarray) -> float:
    """``max over sign vectors g of sum_x |(M g)(x)|`` by exhaustive enumeration."""
    n = M.shape[0]
    if n > BRUTE_FORCE_LIMIT:
        raise ValueError(f"{n} sites exceed the brute-force limit {BRUTE_FORCE_LIMIT}")
    best = 0.0
    for G in _sign_vectors(n):
        best = max(best, float(np.abs(M @ G).sum(axis=0).max()))
    return best


@dataclass
class T2Detail:
    time: float
    monotone: bool
    grid: np.ndarray
    values: np.ndarray


def t2_exact_details(env: Environment, eps: float, grid_points: int = 16) -> T2Detail:
    """Exact T2 together with the monotonicity check on a grid."""
    _check_eps(eps)
    k = _Kernel(env)
    if k.n > BRUTE_FORCE_LIMIT:
        raise ValueError(f"{k.n} sites exceed the brute-force limit {BRUTE_FORCE_LIMIT}; use t2_bounds")

    def C(t):
        return correlation_norm(k.centered(t) / k.n)

    c0 = C(0.0)
    if c0 <= eps:
        return T2Detail(0.0, True, np.zeros(1), np.array([c0]))
    _, top = _first_below(C, eps, k.tau, rtol=1e-2)
    grid = np.linspace(0.0, top, grid_points + 1)
    vals = np.array([c0] + [C(t) for t in grid[1:]])
    monotone = bool(np.all(np.diff(vals) <= 1e-12 * c0))
    if not monotone:
        warnings.warn("correlation functional increased between grid points")
    first = int(np.argmax(vals <= eps))
    lo, hi = grid[first - 1], grid[first]
    while hi - lo > RTOL * hi:
        mid = 0.5 * (lo + hi)
        if C(mid) > eps:
            lo = mid
        else:
            hi = mid
    return T2Detail(hi, monotone, grid, vals)


def t2_exact_small(env: Environment, eps: float) -> float:
    """``inf{t : C(t) <= eps}`` with ``C`` the exhaustive correlation functional (<= 20 sites)."""
    return t2_exact_details(env, eps).time


def half_torus(env: Environment) -> np.ndarray:
    """Indicator of ``{x : 0 <= x_1 < floor(N/2)}``."""
    lat = env.lattice
    return lat.coords[:, 0] < lat.N // 2


def t2_bounds(env: Environment, eps: float) -> Tuple[float, float]:
    """``(lower, upper)`` around T2.

    ``upper`` is where ``sum_{x,y} |M_xy|`` drops to ``eps``. ``lower`` is the
    last time found at which the half-torus witness ``|P(X_0 not in A, X_t in A) -
    eta(A) eta(A^c)|`` still exceeds ``eps``.
    """
    _check_eps(eps)
    k = _Kernel(env)
    A = half_torus(env).astype(float)
    Ac = 1.0 - A

    def total(t):
        return float(np.abs(k.centered(t)).sum()) / k.n

    def witness(t):
        return abs(float(Ac @ k.centered(t) @ A)) / k.n

    if total(0.0) <= eps:
        upper = 0.0
    else:
        _, upper = _first_below(total, eps, k.tau)
    if witness(0.0) <= eps:
        return 0.0, upper
    # beyond upper the witness stays below eps, so scan [0, upper] for the first drop
    grid = np.linspace(0.0, upper, 65)
    vals = np.array([witness(t) for t in grid])
    first = int(np.argmax(vals <= eps))
    lo, hi = grid[first - 1], grid[first]
    while hi - lo > RTOL * hi:
        mid = 0.5 * (lo + hi)
        if witness(mid) > eps:
            lo = mid
        else:
            hi = mid
    return lo, upper


@dataclass
class MixingReport:
    eps: float
    t1: Optional[float] = None
    t1_bounds: Tuple[float, float] = (0.0, math.inf)
    t2: Optional[float] = None
    t2_bounds: Tuple[float, float] = (0.0, math.inf)
    methods: Dict[str, str] = field(default_factory=dict)

    @property
    def t2_value(self) -> float:
        """Exact T2 when available, otherwise the midpoint of its bounds."""
        if self.t2 is not None:
            return self.t2
        return 0.5 * (self.t2_bounds[0] + self.t2_bounds[1])


def mixing_report(env: Environment, eps: float, exact_t2: Optional[bool] = None) -> MixingReport:
    """Compute every available T1/T2 quantity for a torus environment."""
    rep = MixingReport(eps)
    rep.t1 = t1_exact(env, eps)
    rep.t1_bounds = (t1_sitting_lower(env, eps), t1_upper_spectral(env, eps))
    rep.methods["t1"] = "exact"
    rep.t2_bounds = t2_bounds(env, eps)
    if exact_t2 is None:
        exact_t2 = env.lattice.n_sites <= BRUTE_FORCE_LIMIT
    if exact_t2:
        rep.t2 = t2_exact_small(env, eps)
        rep.methods["t2"] = "exact"
    else:
        rep.methods["t2"] = "bounds-midpoint"
    return rep
