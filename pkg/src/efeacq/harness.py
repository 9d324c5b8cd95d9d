"""Seeded experiment loop: acquire, observe, update, record.

One master seed per run is split into named sub-streams so that, for
example, changing ``n_mc`` never perturbs environment draws.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import logging
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
import yaml
from scipy.stats import qmc

from . import acquisition as acq
from . import gp as gpm
from .coverage import CoverageTracker, TargetSet, parameter_tracker
from .discrete import estimation_error, init_uniform, update
from .environments import (MO_PROBLEMS, TAS_OUTPUT_SCALE, csi_task, default_utility,
                           dm_respond, measurement_grid, mo_truth, tas_truth, total_rate)
from .errors import ConfigError, ConvergenceError, DegenerateError, DomainError, NumericError
from .preference import Comparison, laplace_fit

log = logging.getLogger(__name__)

CSI_TASKS = ("csi-localization", "csi-wind", "csi-sources")
TASKS = CSI_TASKS + ("tas", "composite")

STRATEGIES = {
    **{t: ("aif", "random", "greedy", "eig") for t in CSI_TASKS},
    "tas": ("aif", "random", "greedy", "eig"),
    "composite": ("full", "aif", "g+gIG", "g-only", "random"),
}

DEFAULT_BETA = {"csi-localization": 0.5, "csi-wind": 1.0, "csi-sources": 5.0,
                "tas": 20.0, "composite": 1.0}
DEFAULT_N_MC = {"tas": 64, "composite": 32}

# Environment knobs per task family and their defaults.
ENV_DEFAULTS = {
    "csi": {"y_max": None, "stride": 2.0, "dt": 1.0, "saturate": True,
            "saturating_eig": False},
    "tas": {"threshold": 0.8, "probes": 50, "param_probes": 50,
            "output_scale": list(TAS_OUTPUT_SCALE),
            "lengthscales": [0.22, 0.228], "noise_vars": [1.54e-3, 2.27e-3],
            "n_candidates": 512, "n_init": 4},
    "composite": {"problem": "vehicle-safety-like", "dm_mode": "stochastic",
                  "lengthscales": [1.47, 1.23, 1.02], "noise_vars": [0.0248, 1e-4, 1e-4],
                  "pref_lengthscale": 3.71, "n_candidates": 512, "n_pairs": 256,
                  "n_init": 4, "n_init_comparisons": 1},
}

ABORTABLE = (NumericError, ConvergenceError, DegenerateError, DomainError)


def family(task: str) -> str:
    return "csi" if task in CSI_TASKS else task


@dataclass(frozen=True)
class ExperimentConfig:
    task: str
    strategy: str = "aif"
    beta: float | None = None
    gamma: float = 1.0
    lam: float = 0.1
    delta: float = 0.1
    n_mc: int | None = None
    budget: int = 100
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    env: dict = field(default_factory=dict)
    out: str = "runs"

    def __post_init__(self):
        if self.task not in TASKS:
            raise ConfigError(f"unknown task {self.task!r}; expected one of {TASKS}")
        if self.strategy not in STRATEGIES[self.task]:
            raise ConfigError(f"strategy {self.strategy!r} is not valid for {self.task}")
        if int(self.budget) != self.budget or self.budget < 1:
            raise ConfigError("budget must be a positive integer")
        seeds = tuple(int(s) for s in np.atleast_1d(self.seeds))
        if not seeds:
            raise ConfigError("seeds must be nonempty")
        object.__setattr__(self, "seeds", seeds)
        object.__setattr__(self, "budget", int(self.budget))
        beta = DEFAULT_BETA[self.task] if self.beta is None else float(self.beta)
        if beta < 0 or self.gamma < 0:
            raise ConfigError("beta and gamma must be nonnegative")
        object.__setattr__(self, "beta", beta)
        if self.lam <= 0 or self.delta <= 0:
            raise ConfigError("lambda and delta must be positive")
        n_mc = DEFAULT_N_MC.get(self.task, 1) if self.n_mc is None else int(self.n_mc)
        if n_mc < 1:
            raise ConfigError("n_mc must be positive")
        object.__setattr__(self, "n_mc", n_mc)
        defaults = ENV_DEFAULTS[family(self.task)]
        unknown = set(self.env) - set(defaults)
        if unknown:
            raise ConfigError(f"unknown env keys for {self.task}: {sorted(unknown)}")
        object.__setattr__(self, "env", {**defaults, **dict(self.env)})
        if self.task == "composite" and self.env["problem"] not in MO_PROBLEMS:
            raise ConfigError(f"unknown problem {self.env['problem']!r}")

    def as_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["seeds"] = list(self.seeds)
        d["lambda"] = d.pop("lam")
        return d

    @property
    def label(self) -> str:
        return self.task if self.task != "composite" else f"composite-{self.env['problem']}"

    def config_hash(self) -> str:
        d = self.as_dict()
        d.pop("out")
        blob = json.dumps(d, sort_keys=True, default=float).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


FIELD_NAMES = {f.name for f in dataclasses.fields(ExperimentConfig)}


def config_from_dict(raw: dict) -> ExperimentConfig:
    raw = dict(raw)
    if "lambda" in raw:
        if "lam" in raw:
            raise ConfigError("give either 'lambda' or 'lam', not both")
        raw["lam"] = raw.pop("lambda")
    unknown = set(raw) - FIELD_NAMES
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "task" not in raw:
        raise ConfigError("config must name a task")
    if "env" in raw and not isinstance(raw["env"], dict):
        raise ConfigError("env must be a mapping")
    try:
        return ExperimentConfig(**raw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def apply_overrides(raw: dict, overrides) -> dict:
    """``key=value`` pairs; values parsed as YAML scalars, ``env.key`` reaches into env."""
    raw = {**raw, "env": dict(raw.get("env") or {})}
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, value = item.split("=", 1)
        value = yaml.safe_load(value)
        if key.startswith("env."):
            raw["env"][key[4:]] = value
        else:
            raw[key] = value
    return raw


def load_config(path, overrides=()) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    with open(path) as fh:
        raw = yaml.safe_load(fh) or {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{path} does not hold a mapping")
    return config_from_dict(apply_overrides(raw, overrides))


# ---------------------------------------------------------------- traces

@dataclass
class ExperimentTrace:
    task: str
    strategy: str
    seed: int
    columns: list[str]
    metric_names: list[str]
    rows: list[list[float]] = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    status: str = "ok"
    diagnostic: str = ""
    wall_time: float = 0.0

    def column(self, name: str) -> np.ndarray:
        j = self.columns.index(name)
        return np.array([r[j] for r in self.rows], dtype=float)


def streams(seed: int) -> dict:
    """Independent named generators derived from one master seed."""
    names = ("environment", "acquisition", "dm", "candidates", "init")
    return {n: np.random.default_rng([int(seed), zlib.crc32(n.encode())]) for n in names}


def _child_seed(rng: np.random.Generator) -> int:
    return int(rng.integers(2**63 - 1))


# ------------------------------------------------------------------ CSI

@lru_cache(maxsize=8)
def _csi_setup(task: str, y_max, stride: float):
    t = csi_task(task, y_max=y_max)
    cand = measurement_grid(t.truth, stride)
    rates = np.ascontiguousarray(t.grid.rates(cand))
    truth_rates = np.asarray(total_rate(t.truth, cand))
    return t, cand, rates, truth_rates


def _run_csi(cfg: ExperimentConfig, seed: int, trace: ExperimentTrace):
    env = cfg.env
    task, cand, rates, truth_rates = _csi_setup(cfg.task, env["y_max"], float(env["stride"]))
    y_max, dt = task.y_max, float(env["dt"])
    rng = streams(seed)
    post = init_uniform(task.grid)
    violations = 0
    for it in range(1, cfg.budget + 1):
        if cfg.strategy == "aif":
            sel = acq.select_csi(post, rates, cfg.beta, y_max, dt, bool(env["saturating_eig"]))
        elif cfg.strategy == "greedy":
            sel = acq.select_baseline("greedy-csi", (post, y_max, dt), rates, None)
        elif cfg.strategy == "eig":
            sel = acq.select_baseline("eig-csi", (post, y_max, dt), rates, None)
        else:
            sel = acq.select_baseline("random", None, cand, _child_seed(rng["acquisition"]))
        c = sel.index
        count = int(rng["environment"].poisson(truth_rates[c] * dt))
        over = count > y_max
        violations += int(over)
        saturated = bool(env["saturate"]) and over
        reading = int(y_max) if saturated else count
        post = update(post, cand[c], reading, dt, rates=rates[:, c], saturated=saturated)
        score, epi, prag = sel.chosen
        trace.rows.append([it, *cand[c], reading, score, epi, prag,
                           estimation_error(post, task.truth_params), violations])
        log.debug("%s %s seed=%d it=%d x=%s y=%d", cfg.task, cfg.strategy, seed, it, cand[c], reading)


# ------------------------------------------------------------------ TAS

def _run_tas(cfg: ExperimentConfig, seed: int, trace: ExperimentTrace):
    env = cfg.env
    rng = streams(seed)
    c = float(env["threshold"])
    kernels = [gpm.KernelSpec((ls,) * 3, 1.0, nv)
               for ls, nv in zip(env["lengthscales"], env["noise_vars"])]
    tracker = CoverageTracker(TargetSet([c, c], [1.0, 1.0]), cfg.delta, int(env["probes"]),
                              env["output_scale"])
    ptracker = parameter_tracker(3, cfg.delta, int(env["param_probes"]))
    X = qmc.Sobol(3, scramble=True, seed=rng["init"]).random(int(env["n_init"]))
    Y = tas_truth(X)
    tracker.add_outcome(Y)
    ptracker.add_outcome(X)
    for it in range(1, cfg.budget + 1):
        model = gpm.fit(X, Y, kernels, standardize=True)
        cand = qmc.Sobol(3, scramble=True, seed=_child_seed(rng["candidates"])).random(
            int(env["n_candidates"]))
        mc_seed = _child_seed(rng["acquisition"])
        if cfg.strategy == "aif":
            sel = acq.select_tas(model, tracker, cand, cfg.beta, cfg.n_mc, mc_seed)
        elif cfg.strategy == "greedy":
            sel = acq.select_baseline("greedy-tas", (model, tracker, cfg.n_mc), cand, mc_seed)
        elif cfg.strategy == "eig":
            sel = acq.select_baseline("eig-tas", ptracker, cand, mc_seed)
        else:
            sel = acq.select_baseline("random", None, cand, mc_seed)
        x = cand[sel.index]
        y = tas_truth(x)
        X, Y = np.vstack([X, x]), np.vstack([Y, y])
        tracker.add_outcome(y)
        ptracker.add_outcome(x)
        score, epi, prag = sel.chosen
        trace.rows.append([it, *x, *y, score, epi, prag,
                           tracker.covered_fraction(), ptracker.covered_fraction()])
        log.debug("tas %s seed=%d it=%d cov=%.4f", cfg.strategy, seed, it, tracker.covered_fraction())


# ------------------------------------------------------------ composite

def _standardizer(Y):
    sd = Y.std(axis=0)
    return Y.mean(axis=0), np.where(sd > 1e-12, sd, 1.0)


def _run_composite(cfg: ExperimentConfig, seed: int, trace: ExperimentTrace):
    env = cfg.env
    problem = env["problem"]
    d, m, _ = MO_PROBLEMS[problem]
    utility = default_utility(problem)
    rng = streams(seed)
    kernels = [gpm.KernelSpec((ls,) * d, 1.0, nv)
               for ls, nv in zip(env["lengthscales"], env["noise_vars"])]
    if len(kernels) != m:
        raise ConfigError(f"{problem} needs {m} lengthscales and noise variances")
    pkernel = gpm.KernelSpec((float(env["pref_lengthscale"]),) * m, 1.0, 1e-4)
    X = qmc.Sobol(d, scramble=True, seed=rng["init"]).random(int(env["n_init"]))
    Y = mo_truth(problem, X)
    comparisons = []
    for _ in range(int(env["n_init_comparisons"])):
        i, j = rng["init"].choice(len(Y), 2, replace=False)
        z = dm_respond(utility, Y[i], Y[j], cfg.lam, env["dm_mode"], rng["dm"])
        comparisons.append(Comparison(Y[i], Y[j], z))
    best = float(np.max(utility(Y)))
    trace.meta["init_best"] = best
    beta, gamma = acq.ABLATIONS.get(cfg.strategy, acq.ABLATIONS["full"])(cfg.beta, cfg.gamma)
    n_cand, n_pairs = int(env["n_candidates"]), int(env["n_pairs"])
    if 2 * n_pairs > n_cand:
        raise ConfigError("n_pairs may use each candidate at most once")
    for it in range(1, cfg.budget + 1):
        model = gpm.fit(X, Y, kernels, standardize=True)
        shift, scale = _standardizer(Y)
        pref = laplace_fit(comparisons, pkernel, cfg.lam, shift, scale)
        cand = qmc.Sobol(d, scramble=True, seed=_child_seed(rng["candidates"])).random(n_cand)
        perm = rng["candidates"].permutation(n_cand)
        xa, xb = cand[perm[:n_pairs]], cand[perm[n_pairs:2 * n_pairs]]
        mc_seed = _child_seed(rng["acquisition"])
        if cfg.strategy == "random":
            sel = acq.select_baseline("random", None, xa, mc_seed)
        else:
            sel = acq.select_composite(model, pref, (xa, xb), beta, gamma, cfg.n_mc, mc_seed)
        k = sel.index
        ya, yb = mo_truth(problem, xa[k]), mo_truth(problem, xb[k])
        z = dm_respond(utility, ya, yb, cfg.lam, env["dm_mode"], rng["dm"])
        if np.any(np.abs(ya - yb) > 1e-12):
            comparisons.append(Comparison(ya, yb, z))
        X, Y = np.vstack([X, xa[k], xb[k]]), np.vstack([Y, ya, yb])
        oracle = float(max(utility(ya), utility(yb)))
        best = max(best, oracle)
        score, epi, prag = sel.chosen
        trace.rows.append([it, *xa[k], *xb[k], *ya, *yb, z, score, epi, prag, oracle, best])
        log.debug("composite %s seed=%d it=%d best=%.6g", cfg.strategy, seed, it, best)


# ------------------------------------------------------------------ run

METRICS = {
    "csi": ["estimation_error", "cumulative_violations"],
    "tas": ["coverage_outcome", "coverage_parameter"],
    "composite": ["oracle_utility", "best_utility"],
}


def trace_columns(cfg: ExperimentConfig) -> list[str]:
    fam = family(cfg.task)
    if fam == "csi":
        head = ["x0", "x1", "y"]
    elif fam == "tas":
        head = ["x0", "x1", "x2", "y0", "y1"]
    else:
        d, m, _ = MO_PROBLEMS[cfg.env["problem"]]
        head = ([f"xa{i}" for i in range(d)] + [f"xb{i}" for i in range(d)]
                + [f"ya{i}" for i in range(m)] + [f"yb{i}" for i in range(m)] + ["z"])
    return ["iteration", *head, "score", "epistemic", "pragmatic", *METRICS[fam]]


RUNNERS = {"csi": _run_csi, "tas": _run_tas, "composite": _run_composite}


def run_seed(cfg: ExperimentConfig, seed: int) -> ExperimentTrace:
    trace = ExperimentTrace(cfg.task, cfg.strategy, seed, trace_columns(cfg),
                            METRICS[family(cfg.task)])
    start = time.perf_counter()
    try:
        RUNNERS[family(cfg.task)](cfg, seed, trace)
    except ABORTABLE as exc:
        trace.status = "aborted"
        trace.diagnostic = f"{type(exc).__name__}: {exc}"
        log.error("%s %s seed %d aborted: %s", cfg.task, cfg.strategy, seed, trace.diagnostic)
    trace.wall_time = time.perf_counter() - start
    log.info("%s %s seed %d finished in %.1fs (%s)", cfg.label, cfg.strategy, seed,
             trace.wall_time, trace.status)
    return trace


def run(cfg: ExperimentConfig, jobs: int = 1) -> list[ExperimentTrace]:
    """One trace per seed; seeds may run in parallel processes."""
    if jobs > 1 and len(cfg.seeds) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(run_seed, [cfg] * len(cfg.seeds), cfg.seeds))
    return [run_seed(cfg, s) for s in cfg.seeds]


def metrics(trace: ExperimentTrace, task: str) -> dict[str, np.ndarray]:
    """Per-iteration metric columns of a trace."""
    if trace.task != task:
        raise DomainError(f"trace is for {trace.task}, not {task}")
    return {name: trace.column(name) for name in trace.metric_names}


@dataclass(frozen=True)
class Aggregate:
    iterations: np.ndarray
    mean: dict
    std: dict
    median: dict


def aggregate(traces) -> Aggregate:
    """Per-iteration mean, population std and median of every metric across seeds."""
    traces = list(traces)
    if not traces:
        raise DomainError("nothing to aggregate")
    lengths = {len(t.rows) for t in traces}
    if len(lengths) != 1:
        raise DomainError("traces have different lengths")
    names = traces[0].metric_names
    mean, std, median = {}, {}, {}
    for name in names:
        stack = np.stack([t.column(name) for t in traces])
        mean[name] = stack.mean(axis=0)
        std[name] = stack.std(axis=0)
        median[name] = np.median(stack, axis=0)
    return Aggregate(traces[0].column("iteration"), mean, std, median)


# -------------------------------------------------------------- persist

def fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if v.is_integer() and abs(v) < 2**53:
        return str(int(v))
    return format(v, ".17g")


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) for v in r])


def trace_path(out: Path, trace: ExperimentTrace, label: str) -> Path:
    return out / f"trace_{label}_{trace.strategy}_seed{trace.seed}.csv"


def write_outputs(cfg: ExperimentConfig, traces, out) -> Path:
    """Trace CSVs, the task summary CSV and a manifest; returns the summary path."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    for t in traces:
        _write_csv(trace_path(out, t, cfg.label), t.columns, t.rows)
    ok = [t for t in traces if t.status == "ok"]
    summary = out / f"summary_{cfg.label}.csv"
    if ok:
        agg = aggregate(ok)
        header = ["iteration"]
        cols = []
        for name in ok[0].metric_names:
            for stat, table in (("mean", agg.mean), ("std", agg.std), ("median", agg.median)):
                header.append(f"{cfg.strategy}:{name}:{stat}")
                cols.append(table[name])
        rows = [[int(i), *(c[k] for c in cols)] for k, i in enumerate(agg.iterations)]
        _write_csv(summary, header, rows)
    manifest = {
        "config": cfg.as_dict(),
        "config_hash": cfg.config_hash(),
        "seeds": {str(t.seed): {"status": t.status, "diagnostic": t.diagnostic,
                                **{k: v for k, v in t.meta.items()}} for t in traces},
    }
    with open(out / f"manifest_{cfg.label}_{cfg.strategy}.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")
    return summary
