"""Config-driven parameter sweeps with deterministic seeding and CSV output."""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from .bounds import (eta_pathset, good_pathset, bond_weights_w, poincare_bound,
                     saloffcoste_bound)
from .environment import EnvLaw, monotone_couple, sample_environment
from .lattice import Boundary, Lattice
from .localization import localization_profile, low_modes, mid_modes
from .mixing import BRUTE_FORCE_LIMIT, t1_exact, t1_sitting_lower, t1_upper_spectral, t2_bounds, t2_exact_small
from .operators import assemble_generator, return_probabilities, spectrum
from .percolation import (ell_epsilon, epsilon_good, good_clusters, isoperimetric_constant,
                          rate_one_relaxation_time)
from .seeding import hash64
from .walker import annealed_return_prob, required_radius


class ConfigError(ValueError):
    """Invalid experiment configuration; raised before any work starts."""


@dataclass
class ExponentFit:
    slope: float
    intercept: float
    stderr: float
    r2: float
    count: int

    def as_text(self) -> str:
        return (f"slope={self.slope!r};intercept={self.intercept!r};"
                f"stderr={self.stderr!r};r2={self.r2!r};points={self.count}")


def fit_exponent(points: Sequence[Tuple[float, float]]) -> ExponentFit:
    """Least-squares line through ``(log x, log y)``."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 3 or pts.shape[1] != 2:
        raise ValueError("need at least 3 (x, y) points")
    if not np.all(np.isfinite(pts)) or np.any(pts <= 0):
        raise ValueError("exponent fits need finite positive x and y")
    lx, ly = np.log(pts[:, 0]), np.log(pts[:, 1])
    if np.ptp(lx) == 0:
        raise ValueError("x values must not all coincide")
    res = stats.linregress(lx, ly)
    resid = ly - (res.intercept + res.slope * lx)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - float(np.sum(resid ** 2)) / ss_tot
    return ExponentFit(float(res.slope), float(res.intercept), float(res.stderr), r2, len(pts))


# parameter kinds: int, float, ints, floats, str
Schema = Dict[str, Tuple[str, Any]]

COMMON: Schema = {"seed": ("int", 0), "workers": ("int", 0), "output": ("str", "")}


@dataclass
class Experiment:
    name: str
    schema: Schema
    columns: Tuple[str, ...]
    tasks: Callable[["ExperimentConfig"], List[Tuple[Callable, tuple]]]
    summarize: Callable[["ExperimentConfig", List[Dict[str, Any]]], Dict[str, Any]]
    validate: Callable[["ExperimentConfig"], None] = lambda cfg: None


REGISTRY: Dict[str, Experiment] = {}


def _parse_value(kind: str, text: str):
    text = text.strip()
    try:
        if kind == "int":
            return int(text)
        if kind == "float":
            return float(text)
        if kind == "ints":
            return [int(v) for v in text.split(",") if v.strip()]
        if kind == "floats":
            return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"cannot parse {text!r} as {kind}") from exc
    return text


def _format_value(v) -> str:
    if isinstance(v, list):
        return ",".join(_format_value(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


@dataclass
class ExperimentConfig:
    name: str
    params: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def build(cls, name: str, values: Optional[Dict[str, str]] = None) -> "ExperimentConfig":
        if name not in REGISTRY:
            raise ConfigError(f"unknown experiment {name!r}; known: {', '.join(sorted(REGISTRY))}")
        schema = {**REGISTRY[name].schema, **COMMON}
        params = {k: (list(v) if isinstance(v, list) else v) for k, (_, v) in schema.items()}
        for key, raw in (values or {}).items():
            key = key.replace("-", "_")
            if key not in schema:
                raise ConfigError(f"unknown parameter {key!r} for {name}")
            kind = schema[key][0]
            params[key] = _parse_value(kind, raw) if isinstance(raw, str) else raw
        cfg = cls(name, params)
        cfg.validate()
        return cfg

    @classmethod
    def from_text(cls, text: str, overrides: Optional[Dict[str, str]] = None) -> "ExperimentConfig":
        values: Dict[str, str] = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected key=value")
            key, val = line.split("=", 1)
            values[key.strip()] = val.strip()
        values.update(overrides or {})
        name = values.pop("experiment", None)
        if name is None:
            raise ConfigError("config must set experiment=<name>")
        return cls.build(name, values)

    def to_text(self) -> str:
        lines = [f"experiment={self.name}"]
        lines += [f"{k}={_format_value(v)}" for k, v in sorted(self.params.items())]
        return "\n".join(lines) + "\n"

    def __getitem__(self, key):
        return self.params[key]

    def validate(self) -> None:
        p = self.params
        for key, (kind, _) in {**REGISTRY[self.name].schema}.items():
            v = p[key]
            if kind in ("ints", "floats") and len(v) == 0:
                raise ConfigError(f"{key} must be a nonempty list")
        if "gamma" in p and not p["gamma"] > 0:
            raise ConfigError("gamma must be positive")
        if "d" in p and p["d"] < 1:
            raise ConfigError("d must be at least 1")
        for key in ("seeds", "n_env"):
            if key in p and p[key] < 1:
                raise ConfigError(f"{key} must be at least 1")
        if p["workers"] < 0:
            raise ConfigError("workers must be nonnegative")
        REGISTRY[self.name].validate(self)

    def row_seed(self, grid_index: int, replicate: int) -> int:
        return hash64(self.params["seed"], self.name, grid_index, replicate)


def register(exp: Experiment) -> Experiment:
    REGISTRY[exp.name] = exp
    return exp


def _median_fit(rows, x_key, y_key, fit: bool = True) -> Tuple[List[float], List[float], Optional[ExponentFit]]:
    xs = sorted({r[x_key] for r in rows})
    meds = [float(np.median([r[y_key] for r in rows if r[x_key] == x])) for x in xs]
    fit = fit_exponent(list(zip(xs, meds))) if fit and len(xs) >= 3 else None
    return xs, meds, fit


# annealed-decay

def _annealed_task(d, gamma, radius, t_grid, seed, method, n_walk):
    lat = Lattice(d, radius, Boundary.BOX)
    how = "exact" if method == "exact" else ("mc", n_walk)
    est = annealed_return_prob(EnvLaw(gamma), lat, t_grid, 1, method=how, seeds=[seed])
    return [{"radius": radius, "t": t, "value": float(v)} for t, v in zip(t_grid, est.per_env[0])]


def _radius(cfg) -> int:
    return cfg["radius"] or required_radius(max(cfg["t_grid"]))


def _annealed_tasks(cfg):
    # one environment per replicate is reused across the whole time grid
    return [(_annealed_task, (cfg["d"], cfg["gamma"], _radius(cfg), cfg["t_grid"], cfg.row_seed(0, r),
                              cfg["method"], cfg["n_walk"])) for r in range(cfg["n_env"])]


def _annealed_summary(cfg, rows):
    ts = cfg["t_grid"]
    means = [float(np.mean([r["value"] for r in rows if r["t"] == t])) for t in ts]
    out = {"means": ",".join(repr(m) for m in means)}
    if len(ts) >= 3 and all(m > 0 for m in means):
        out["fit"] = fit_exponent(list(zip(ts, means)))
    return out


def _validate_annealed(cfg):
    if cfg["method"] not in ("exact", "mc"):
        raise ConfigError("method must be exact or mc")
    if any(t <= 0 for t in cfg["t_grid"]):
        raise ConfigError("times must be positive")
    if cfg["radius"] < 0:
        raise ConfigError("radius must be nonnegative")
    if (2 * _radius(cfg) + 1) ** cfg["d"] > 4096 and cfg["method"] == "exact":
        raise ConfigError("box exceeds the dense limit for the exact method")


register(Experiment(
    "annealed-decay",
    {"d": ("int", 1), "gamma": ("float", 0.25), "t_grid": ("floats", [100.0, 300.0, 1000.0, 3000.0, 10000.0]),
     "n_env": ("int", 500), "method": ("str", "exact"), "n_walk": ("int", 10000), "radius": ("int", 0)},
    ("d", "gamma", "radius", "method", "t", "value"),
    _annealed_tasks, _annealed_summary, _validate_annealed,
))


# t1-scaling / t2-scaling

def _torus_env(d, N, gamma, seed):
    return sample_environment(EnvLaw(gamma), Lattice(d, N, Boundary.TORUS), seed)


def _t1_task(d, N, gamma, eps, seed):
    env = _torus_env(d, N, gamma, seed)
    return [{"N": N, "eps": eps, "T1": t1_exact(env, eps), "lower": t1_sitting_lower(env, eps),
             "upper": t1_upper_spectral(env, eps)}]


def _t2_task(d, N, gamma, eps, seed):
    env = _torus_env(d, N, gamma, seed)
    lo, hi = t2_bounds(env, eps)
    if N ** d <= BRUTE_FORCE_LIMIT:
        value, method = t2_exact_small(env, eps), "exact"
    else:
        value, method = 0.5 * (lo + hi), "midpoint"
    return [{"N": N, "eps": eps, "T2": value, "method": method, "lower": lo, "upper": hi,
             "T1": t1_exact(env, eps)}]


def _grid_tasks(fn, cfg):
    return [(fn, (cfg["d"], N, cfg["gamma"], cfg["eps"], cfg.row_seed(g, r)))
            for g, N in enumerate(cfg["N_grid"]) for r in range(cfg["seeds"])]


def _t1_summary(cfg, rows):
    xs, meds, fit = _median_fit(rows, "N", "T1")
    out = {"medians": ",".join(repr(m) for m in meds)}
    if fit:
        out["fit"] = fit
    return out


def _t2_summary(cfg, rows):
    xs, meds, fit = _median_fit(rows, "N", "T2")
    _, low, _ = _median_fit(rows, "N", "lower", fit=False)
    out = {"medians": ",".join(repr(m) for m in meds),
           "min_lower_over_N2": min(lo / x ** 2 for x, lo in zip(xs, low)),
           "dominated": int(all(r["T2"] <= r["T1"] for r in rows))}
    if fit:
        out["fit"] = fit
    return out


def _validate_mixing(cfg):
    if not 0 < cfg["eps"] < 1:
        raise ConfigError("eps must lie in (0, 1)")
    if any(N < 3 for N in cfg["N_grid"]):
        raise ConfigError("torus side must be at least 3")
    if any(N ** cfg["d"] > 4096 for N in cfg["N_grid"]):
        raise ConfigError("torus exceeds the dense limit")


MIXING_SCHEMA: Schema = {"d": ("int", 1), "gamma": ("float", 1 / 3), "eps": ("float", 0.1),
                         "N_grid": ("ints", [16, 32, 64, 128, 256]), "seeds": ("int", 30)}

register(Experiment("t1-scaling", MIXING_SCHEMA, ("d", "gamma", "N", "eps", "T1", "lower", "upper"),
                    lambda cfg: _grid_tasks(_t1_task, cfg), _t1_summary, _validate_mixing))
register(Experiment("t2-scaling", MIXING_SCHEMA,
                    ("d", "gamma", "N", "eps", "T2", "method", "lower", "upper", "T1"),
                    lambda cfg: _grid_tasks(_t2_task, cfg), _t2_summary, _validate_mixing))


# bound-audit

def _audit_task(d, N, gamma, eps, xi, p_grid, seed):
    env = _torus_env(d, N, gamma, seed)
    lam2 = float(spectrum(assemble_generator(env)).values[1])
    ell = ell_epsilon(env, eps) if d >= 2 else math.inf
    if math.isinf(ell):
        paths = eta_pathset(env.lattice)
    else:
        paths = good_pathset(env, eps, int(ell))
    sc = saloffcoste_bound(env, paths, bond_weights_w(env, eps), with_gap=False).value
    labeling = good_clusters(env, N ** (-eps), strict=True)
    if N ** d <= BRUTE_FORCE_LIMIT:
        t2 = t2_exact_small(env, xi)
    else:
        t2 = math.nan
    pb = min(poincare_bound(env, labeling, paths, p, eps=xi).value for p in p_grid)
    sites, graph = labeling.subgraph()
    if 1 < graph.n <= 14:
        tau_g1 = rate_one_relaxation_time(graph)
        cheeger = 8 * isoperimetric_constant(graph) ** 2
    else:
        tau_g1 = cheeger = math.nan
    return [{"N": N, "eps": eps, "xi": xi, "ell": ell, "paths": paths.name, "inv_gap": 1 / lam2,
             "saloff_coste": sc, "T2": t2, "poincare": pb, "tau_G1": tau_g1, "cheeger": cheeger}]


def _audit_tasks(cfg):
    return [(_audit_task, (cfg["d"], cfg["N"], cfg["gamma"], cfg["eps"], cfg["xi"], cfg["p_grid"],
                           cfg.row_seed(0, r))) for r in range(cfg["seeds"])]


def _audit_summary(cfg, rows):
    sc = sum(r["inv_gap"] > r["saloff_coste"] for r in rows)
    pc = sum(r["T2"] > r["poincare"] for r in rows if not math.isnan(r["T2"]))
    ch = sum(r["tau_G1"] > r["cheeger"] for r in rows if not math.isnan(r["tau_G1"]))
    return {"saloff_coste_violations": sc, "poincare_violations": pc, "cheeger_violations": ch}


def _validate_audit(cfg):
    if cfg["N"] < 3 or cfg["N"] ** cfg["d"] > 400:
        raise ConfigError("bound audit needs 3 <= N and at most 400 sites")
    if not 0 < cfg["xi"] < 1:
        raise ConfigError("xi must lie in (0, 1)")
    if cfg["eps"] <= 0:
        raise ConfigError("eps must be positive")
    if any(not 0 < p < 2 for p in cfg["p_grid"]):
        raise ConfigError("p must lie in (0, 2)")


register(Experiment(
    "bound-audit",
    {"d": ("int", 2), "N": ("int", 4), "gamma": ("float", 1.0), "eps": ("float", 1.0), "xi": ("float", 0.3),
     "p_grid": ("floats", [0.5, 0.75, 1.0, 1.25, 1.5, 1.75]), "seeds": ("int", 10)},
    ("d", "gamma", "N", "eps", "xi", "ell", "paths", "inv_gap", "saloff_coste", "T2", "poincare",
     "tau_G1", "cheeger"),
    _audit_tasks, _audit_summary, _validate_audit,
))


# localization

def _localization_task(d, N, gamma, eps, j, seed):
    env = _torus_env(d, N, gamma, seed)
    prof = localization_profile(env, eps, j or None)
    return [{"N": N, "eps": eps, "j": prof.j, "density": prof.density,
             "low_mass": prof.mean_mass(low_modes()), "mid_mass": prof.mean_mass(mid_modes(env.lattice.n_sites)),
             "violations": int(prof.violations().size)}]


def _localization_tasks(cfg):
    return [(_localization_task, (cfg["d"], cfg["N"], cfg["gamma"], cfg["eps"], cfg["j"], cfg.row_seed(0, r)))
            for r in range(cfg["seeds"])]


def _localization_summary(cfg, rows):
    low = float(np.mean([r["low_mass"] for r in rows]))
    dens = float(np.mean([r["density"] for r in rows]))
    mid = float(np.mean([r["mid_mass"] for r in rows]))
    return {"low_mass": low, "density": dens, "mid_mass": mid, "ordered": int(low < dens < mid),
            "violations": sum(r["violations"] for r in rows)}


def _validate_localization(cfg):
    if cfg["N"] < 3 or cfg["N"] ** cfg["d"] > 4096:
        raise ConfigError("torus must have side >= 3 and fit the dense limit")
    if cfg["eps"] <= 0:
        raise ConfigError("eps must be positive")
    if cfg["j"] < 0:
        raise ConfigError("j must be nonnegative (0 selects the default cutoff)")


register(Experiment(
    "localization",
    {"d": ("int", 2), "N": ("int", 24), "gamma": ("float", 0.2), "eps": ("float", 2.0), "j": ("int", 0),
     "seeds": ("int", 30)},
    ("d", "gamma", "N", "eps", "j", "density", "low_mass", "mid_mass", "violations"),
    _localization_tasks, _localization_summary, _validate_localization,
))


# comparison-lemma

def _comparison_task(d, gamma, radius, t_grid, seed):
    lat = Lattice(d, radius, Boundary.BOX)
    env = sample_environment(EnvLaw(gamma), lat, seed)
    origin = lat.index((0,) * d)
    base = return_probabilities(assemble_generator(env), origin, t_grid)
    coupled = return_probabilities(assemble_generator(monotone_couple(env, np.sqrt)), origin, t_grid)
    return [{"radius": radius, "t": t, "p_omega": float(a), "p_coupled": float(b)} for t, a, b in zip(t_grid, base, coupled)]


def _comparison_tasks(cfg):
    return [(_comparison_task, (cfg["d"], cfg["gamma"], _radius(cfg), cfg["t_grid"], cfg.row_seed(0, r)))
            for r in range(cfg["n_env"])]


def comparison_statistics(rows, t_grid):
    """Per time: mean of ``p_coupled - p_omega`` and its paired standard error."""
    out = []
    for t in t_grid:
        diff = np.array([r["p_coupled"] - r["p_omega"] for r in rows if r["t"] == t])
        se = float(diff.std(ddof=1) / math.sqrt(diff.size)) if diff.size > 1 else 0.0
        out.append((float(diff.mean()), se))
    return out


def _comparison_summary(cfg, rows):
    st = comparison_statistics(rows, cfg["t_grid"])
    return {"mean_diff": ",".join(repr(m) for m, _ in st), "stderr": ",".join(repr(s) for _, s in st),
            "holds": int(all(m <= 3 * s for m, s in st))}


def _validate_comparison(cfg):
    if any(t <= 0 for t in cfg["t_grid"]):
        raise ConfigError("times must be positive")
    if (2 * _radius(cfg) + 1) ** cfg["d"] > 4096:
        raise ConfigError("box exceeds the dense limit")


register(Experiment(
    "comparison-lemma",
    {"d": ("int", 1), "gamma": ("float", 0.5), "t_grid": ("floats", [1.0, 3.0, 10.0, 30.0, 100.0]),
     "n_env": ("int", 1000), "radius": ("int", 30)},
    ("d", "gamma", "radius", "t", "p_omega", "p_coupled"),
    _comparison_tasks, _comparison_summary, _validate_comparison,
))


# min-omega

def _min_omega_task(d, N, gamma, seed):
    w = float(_torus_env(d, N, gamma, seed).omega.min())
    return [{"N": N, "min_omega": w, "log_ratio": math.log(w) / math.log(N)}]


def _min_omega_tasks(cfg):
    return [(_min_omega_task, (cfg["d"], N, cfg["gamma"], cfg.row_seed(g, r)))
            for g, N in enumerate(cfg["N_grid"]) for r in range(cfg["seeds"])]


def _min_omega_summary(cfg, rows):
    xs, meds, fit = _median_fit(rows, "N", "min_omega")
    _, ratios, _ = _median_fit(rows, "N", "log_ratio", fit=False)
    out = {"median_log_ratio": ",".join(repr(m) for m in ratios), "target": -cfg["d"] / cfg["gamma"]}
    if fit:
        out["fit"] = fit
    return out


def _validate_min_omega(cfg):
    if any(N < 3 for N in cfg["N_grid"]):
        raise ConfigError("torus side must be at least 3")


register(Experiment(
    "min-omega",
    {"d": ("int", 1), "gamma": ("float", 0.5), "N_grid": ("ints", [256, 512, 1024, 2048, 4096]),
     "seeds": ("int", 200)},
    ("d", "gamma", "N", "min_omega", "log_ratio"),
    _min_omega_tasks, _min_omega_summary, _validate_min_omega,
))


# ell-epsilon

def ell_threshold(d: int, gamma: float, eps: float) -> int:
    """``ceil(4(d+1)/(gamma eps))``."""
    return int(math.ceil(4 * (d + 1) / (gamma * eps)))


def _ell_task(d, N, gamma, eps, seed):
    env = _torus_env(d, N, gamma, seed)
    return [{"N": N, "eps": eps, "ell": ell_epsilon(env, eps),
             "good_density": float(epsilon_good(env, eps).good.mean())}]


def _ell_tasks(cfg):
    return [(_ell_task, (cfg["d"], cfg["N"], cfg["gamma"], cfg["eps"], cfg.row_seed(0, r)))
            for r in range(cfg["seeds"])]


def _ell_summary(cfg, rows):
    thr = ell_threshold(cfg["d"], cfg["gamma"], cfg["eps"])
    return {"threshold": thr, "exceed_fraction": sum(r["ell"] > thr for r in rows) / len(rows)}


def _validate_ell(cfg):
    if cfg["N"] < 3:
        raise ConfigError("torus side must be at least 3")
    if cfg["eps"] <= 0:
        raise ConfigError("eps must be positive")


register(Experiment(
    "ell-epsilon",
    {"d": ("int", 2), "N": ("int", 24), "gamma": ("float", 0.5), "eps": ("float", 1.0), "seeds": ("int", 100)},
    ("d", "gamma", "N", "eps", "ell", "good_density"),
    _ell_tasks, _ell_summary, _validate_ell,
))


# running

BASE_COLUMNS = ("experiment", "row", "grid_index", "replicate", "seed")


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    columns: Tuple[str, ...]
    rows: List[Dict[str, Any]]
    summary: Dict[str, Any]

    def summary_text(self) -> str:
        parts = []
        for k, v in self.summary.items():
            if isinstance(v, ExponentFit):
                parts.append(v.as_text())
            else:
                parts.append(f"{k}={_format_value(v)}")
        return ";".join(parts)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# condlab experiment={self.config.name} columns={','.join(self.columns)} "
                  f"params={';'.join(f'{k}={_format_value(v)}' for k, v in sorted(self.config.params.items()) if k not in ('workers', 'output'))}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([_cell(row.get(c, "")) for c in self.columns])
        summary = {"experiment": self.config.name, "row": "summary", "summary": self.summary_text()}
        writer.writerow([_cell(summary.get(c, "")) for c in self.columns])
        return buf.getvalue()


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def worker_count(requested: int = 0) -> int:
    cap = os.environ.get("CONDLAB_THREADS")
    n = requested or os.cpu_count() or 1
    if cap:
        n = min(n, max(1, int(cap)))
    return max(1, n)


def _call(task):
    fn, args = task
    return fn(*args)


def _task_keys(cfg: ExperimentConfig) -> List[Tuple[int, int]]:
    """``(grid_index, replicate)`` of every task in dispatch order."""
    p = cfg.params
    if "N_grid" in p:
        return [(g, r) for g in range(len(p["N_grid"])) for r in range(p["seeds"])]
    count = p["n_env"] if "n_env" in p else p["seeds"]
    return [(0, r) for r in range(count)]


def run(cfg: ExperimentConfig, workers: Optional[int] = None) -> ExperimentResult:
    exp = REGISTRY[cfg.name]
    tasks = exp.tasks(cfg)
    n = worker_count(cfg["workers"] if workers is None else workers)
    if n == 1 or len(tasks) == 1:
        outputs = [_call(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=n) as pool:
            outputs = list(pool.map(_call, tasks, chunksize=max(1, len(tasks) // (4 * n))))
    echo = {k: v for k, v in cfg.params.items() if k in exp.columns}
    rows = []
    for (g, r), out in zip(_task_keys(cfg), outputs):
        for rec in out:
            rows.append({"experiment": cfg.name, "row": "data", "grid_index": g, "replicate": r,
                         "seed": cfg.row_seed(g, r), **echo, **rec})
    columns = BASE_COLUMNS + exp.columns + ("summary",)
    return ExperimentResult(cfg, columns, rows, exp.summarize(cfg, rows))


def run_to_file(cfg: ExperimentConfig, path: Optional[str] = None, workers: Optional[int] = None) -> ExperimentResult:
    res = run(cfg, workers)
    target = path or cfg["output"]
    if target:
        Path(target).write_text(res.to_csv())
    return res
