"""I.i.d. random weights with polynomial lower tail, and their conductances."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Tuple, Union

import numpy as np

from .lattice import Boundary, Lattice, Site

MAX_SEED = 2**64


@dataclass(frozen=True)
class EnvLaw:
    """Law of a weight: ``P(omega <= a) = a**gamma`` on ``(0, 1]``."""

    gamma: float

    def __post_init__(self):
        if not np.isfinite(self.gamma) or self.gamma <= 0:
            raise ValueError(f"tail exponent must be positive, got {self.gamma}")

    def cdf(self, a):
        a = np.clip(np.asarray(a, dtype=float), 0.0, 1.0)
        return a**self.gamma

    def from_uniform(self, u: np.ndarray) -> np.ndarray:
        return np.asarray(u, dtype=float) ** (1.0 / self.gamma)


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based Philox stream keyed by a 64-bit seed."""
    seed = int(seed)
    if not 0 <= seed < MAX_SEED:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return np.random.Generator(np.random.Philox(key=seed))


def _uniform_open_closed(rng: np.random.Generator, size: int) -> np.ndarray:
    # random() is uniform on [0, 1); flipping gives (0, 1]
    return 1.0 - rng.random(size)


class Environment:
    """Site weights on a lattice, plus the ambient layer for a box.

    For a box, ``ambient_omega`` holds weights on the box of radius ``N + 1``
    so that killing rates at the boundary use honest exterior weights.
    In bond mode the conductances are i.i.d. per bond instead of minima of
    site weights; ``omega`` is then unavailable.
    """

    def __init__(
        self,
        lattice: Lattice,
        omega: Optional[np.ndarray],
        seed: int,
        gamma: float,
        ambient_omega: Optional[np.ndarray] = None,
        bond_weights: Optional[np.ndarray] = None,
        exterior_bond_weights: Optional[np.ndarray] = None,
    ):
        self.lattice = lattice
        self.seed = int(seed)
        self.gamma = float(gamma)
        self.bond_mode = bond_weights is not None
        if self.bond_mode:
            bond_weights = np.asarray(bond_weights, dtype=float)
            if bond_weights.shape != (len(lattice.bond_array),):
                raise ValueError("bond weights do not match the lattice bonds")
            _check_unit_interval(bond_weights)
            if not lattice.is_torus:
                exterior_bond_weights = np.asarray(exterior_bond_weights, dtype=float)
                if exterior_bond_weights.shape != lattice.exterior_slots.shape:
                    raise ValueError("exterior bond weights must have shape (n_sites, 2d)")
            self._omega = None
        else:
            omega = np.asarray(omega, dtype=float)
            if omega.shape != (lattice.n_sites,):
                raise ValueError(
                    f"expected {lattice.n_sites} weights, got shape {omega.shape}"
                )
            _check_unit_interval(omega)
            if not lattice.is_torus:
                if ambient_omega is None:
                    raise ValueError("a box environment needs ambient weights")
                ambient_omega = np.asarray(ambient_omega, dtype=float)
                inner, _, _ = lattice.ambient_maps
                if ambient_omega.shape != (lattice.ambient().n_sites,):
                    raise ValueError("ambient weights do not match the ambient box")
                if not np.array_equal(ambient_omega[inner], omega):
                    raise ValueError("ambient weights disagree with the box weights")
                _check_unit_interval(ambient_omega)
            self._omega = omega
        self.ambient_omega = ambient_omega
        self.bond_weights = bond_weights
        self.exterior_bond_weights = exterior_bond_weights

    def __repr__(self):
        mode = "bond" if self.bond_mode else "site"
        return f"Environment({self.lattice!r}, gamma={self.gamma}, seed={self.seed}, mode={mode})"

    @property
    def omega(self) -> np.ndarray:
        if self._omega is None:
            raise ValueError("bond-mode environments have no site weights")
        return self._omega

    @property
    def law(self) -> EnvLaw:
        return EnvLaw(self.gamma)

    def bond_conductances(self) -> np.ndarray:
        """Conductance of every bond in ``lattice.bond_array`` order."""
        if self.bond_mode:
            return self.bond_weights
        u, v = self.lattice.bond_array.T
        return np.minimum(self._omega[u], self._omega[v])

    def exterior_conductances(self) -> np.ndarray:
        """(n_sites, 2d) conductances of bonds leaving the box; zero elsewhere."""
        lat = self.lattice
        out = np.zeros(lat.exterior_slots.shape)
        if lat.is_torus:
            return out
        mask = lat.exterior_slots
        if self.bond_mode:
            out[mask] = self.exterior_bond_weights[mask]
            return out
        _, _, ext = lat.ambient_maps
        rows, slots = np.nonzero(mask)
        out[rows, slots] = np.minimum(self._omega[rows], self.ambient_omega[ext[rows, slots]])
        return out

    def to_text(self) -> str:
        lat = self.lattice
        header = (
            f"d={lat.d} N={lat.N} boundary={lat.boundary.value} "
            f"gamma={self.gamma!r} seed={self.seed}"
        )
        if self.bond_mode:
            header += " mode=bond"
            values = [self.bond_weights]
            if not lat.is_torus:
                values.append(self.exterior_bond_weights[lat.exterior_slots])
        else:
            values = [self._omega]
            if not lat.is_torus:
                _, halo, _ = lat.ambient_maps
                values.append(self.ambient_omega[halo])
        lines = [header]
        for block in values:
            lines.extend(f"{w:.17g}" for w in block)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Environment":
        lines = text.strip().splitlines()
        fields = dict(item.split("=", 1) for item in lines[0].split())
        lat = Lattice(int(fields["d"]), int(fields["N"]), Boundary(fields["boundary"]))
        gamma, seed = float(fields["gamma"]), int(fields["seed"])
        values = np.array([float(s) for s in lines[1:]], dtype=float)
        n = lat.n_sites
        if fields.get("mode", "site") == "bond":
            nb = len(lat.bond_array)
            ext = None
            if not lat.is_torus:
                ext = np.zeros(lat.exterior_slots.shape)
                ext[lat.exterior_slots] = values[nb:]
            return cls(lat, None, seed, gamma, bond_weights=values[:nb],
                       exterior_bond_weights=ext)
        omega = values[:n]
        ambient = None
        if not lat.is_torus:
            inner, halo, _ = lat.ambient_maps
            ambient = np.empty(lat.ambient().n_sites)
            ambient[inner] = omega
            ambient[halo] = values[n:]
        return cls(lat, omega, seed, gamma, ambient_omega=ambient)

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path: Union[str, Path]) -> "Environment":
        return cls.from_text(Path(path).read_text())


def _check_unit_interval(w: np.ndarray) -> None:
    if w.size and (not np.all(w > 0) or not np.all(w <= 1)):
        raise ValueError("weights must lie in (0, 1]")


def sample_environment(law: EnvLaw, lat: Lattice, seed: int, mode: str = "site") -> Environment:
    """Draw ``omega = U**(1/gamma)`` with ``U`` uniform on (0, 1].

    The k-th site in index order (of the ambient box, for boxes) receives the
    k-th draw of the Philox stream keyed by ``seed``, so every weight is a fixed
    function of (seed, site).
    """
    if not isinstance(law, EnvLaw):
        law = EnvLaw(float(law))
    rng = make_rng(seed)
    if mode == "bond":
        nb = len(lat.bond_array)
        bw = law.from_uniform(_uniform_open_closed(rng, nb))
        ext = None
        if not lat.is_torus:
            ext = np.zeros(lat.exterior_slots.shape)
            mask = lat.exterior_slots
            ext[mask] = law.from_uniform(_uniform_open_closed(rng, int(mask.sum())))
        return Environment(lat, None, seed, law.gamma, bond_weights=bw, exterior_bond_weights=ext)
    if mode != "site":
        raise ValueError(f"unknown sampling mode {mode!r}")
    if lat.is_torus:
        omega = law.from_uniform(_uniform_open_closed(rng, lat.n_sites))
        return Environment(lat, omega, seed, law.gamma)
    amb = lat.ambient()
    ambient = law.from_uniform(_uniform_open_closed(rng, amb.n_sites))
    inner, _, _ = lat.ambient_maps
    return Environment(lat, ambient[inner].copy(), seed, law.gamma, ambient_omega=ambient)


def constant_environment(lat: Lattice, value: float = 1.0, gamma: float = 1.0) -> Environment:
    """Deterministic environment with every weight equal to ``value``."""
    omega = np.full(lat.n_sites, float(value))
    ambient = None if lat.is_torus else np.full(lat.ambient().n_sites, float(value))
    return Environment(lat, omega, 0, gamma, ambient_omega=ambient)


def environment_from_weights(
    lat: Lattice, omega, ambient_value: float = 1.0, gamma: float = 1.0, seed: int = 0
) -> Environment:
    """Wrap explicit site weights; box exteriors get ``ambient_value``."""
    omega = np.asarray(omega, dtype=float)
    ambient = None
    if not lat.is_torus:
        inner, _, _ = lat.ambient_maps
        ambient = np.full(lat.ambient().n_sites, float(ambient_value))
        ambient[inner] = omega
    return Environment(lat, omega, seed, gamma, ambient_omega=ambient)


def conductance(env: Environment, b: Tuple[Site, Site]) -> float:
    """Conductance of a bond: min of endpoint weights (or the bond weight)."""
    x, y = b
    lat = env.lattice
    i, j = lat.index(x), lat.index(y)
    if j not in lat.neighbor_table[i]:
        raise ValueError(f"{x} and {y} are not nearest neighbors")
    if env.bond_mode:
        u, v = min(i, j), max(i, j)
        arr = lat.bond_array
        k = np.flatnonzero((arr[:, 0] == u) & (arr[:, 1] == v))[0]
        return float(env.bond_weights[k])
    return float(min(env.omega[i], env.omega[j]))


def monotone_couple(env: Environment, fn: Callable[[np.ndarray], np.ndarray]) -> Environment:
    """Apply a nondecreasing map ``(0,1] -> (0,1]`` to every weight.

    The seed is kept, so ``env`` and the result are a coupling. The map is
    spot-checked for monotonicity and range on a grid plus the weights used.
    """
    source = env.bond_weights if env.bond_mode else (
        env.omega if env.ambient_omega is None else env.ambient_omega
    )
    probe = np.unique(np.concatenate([np.geomspace(1e-300, 1.0, 513), source]))
    mapped = np.asarray(fn(probe), dtype=float)
    if mapped.shape != probe.shape:
        raise ValueError("coupling map must act elementwise")
    if np.any(np.diff(mapped) < 0):
        raise ValueError("coupling map is not nondecreasing")
    if not (np.all(mapped > 0) and np.all(mapped <= 1)):
        raise ValueError("coupling map must take values in (0, 1]")

    def apply(w):
        return None if w is None else np.asarray(fn(np.asarray(w, dtype=float)), dtype=float)

    if env.bond_mode:
        ext = env.exterior_bond_weights
        if ext is not None:
            ext = np.where(env.lattice.exterior_slots, apply(np.where(ext > 0, ext, 1.0)), 0.0)
        return Environment(env.lattice, None, env.seed, env.gamma,
                           bond_weights=apply(env.bond_weights), exterior_bond_weights=ext)
    return Environment(env.lattice, apply(env.omega), env.seed, env.gamma,
                       ambient_omega=apply(env.ambient_omega))


def min_omega(env: Environment) -> Tuple[float, Site]:
    """Smallest weight and the first site (in index order) attaining it."""
    i = int(np.argmin(env.omega))
    return float(env.omega[i]), env.lattice.site(i)
