"""Ground-truth simulators: plume field, synthetic search and multi-objective
testbeds, and the simulated decision-maker."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import ndtr

from .errors import ConfigError, DomainError

EULER_GAMMA = 0.57721566490153286061
_SERIES_TERMS = 30
_TRAP_NODES = 40


def bessel_k0(z):
    """Modified Bessel function of the second kind, order zero.

    Uses the ascending series with its ``-ln(z/2)`` term for ``z <= 2`` and
    ``exp(-z)`` times a trapezoid rule on ``int_0^inf exp(-z (cosh t - 1)) dt``
    above that; the integrand is analytic, so the rule converges geometrically.
    """
    z = np.asarray(z, dtype=float)
    if np.any(~(z > 0)):
        raise DomainError("bessel_k0 requires z > 0")
    out = np.empty_like(z)
    small = z <= 2.0

    zs = z[small]
    if zs.size:
        q = 0.25 * zs * zs
        term = np.ones_like(zs)
        i0 = np.ones_like(zs)
        acc = np.zeros_like(zs)
        harmonic = 0.0
        for k in range(1, _SERIES_TERMS):
            term = term * q / (k * k)
            harmonic += 1.0 / k
            i0 += term
            acc += term * harmonic
        out[small] = -(np.log(0.5 * zs) + EULER_GAMMA) * i0 + acc

    zl = z[~small]
    if zl.size:
        zl = zl[:, None]
        h = np.arccosh(1.0 + 40.0 / zl) / _TRAP_NODES
        t = np.arange(_TRAP_NODES + 1) * h
        f = np.exp(-zl * (np.cosh(t) - 1.0))
        f[:, 0] *= 0.5
        out[~small] = (np.exp(-zl) * h * f.sum(axis=1, keepdims=True))[:, 0]
    return out if out.ndim else float(out)


# ---------------------------------------------------------------- plume field

DIST_CLAMP = 1e-3


@dataclass(frozen=True)
class PlumeSource:
    theta: tuple[float, float]
    release_rate: float
    gamma: float
    wind: tuple[float, float]
    diffusivity: float
    active: bool = True

    def __post_init__(self):
        if min(self.release_rate, self.gamma, self.diffusivity) <= 0:
            raise ConfigError("release rate, gamma and diffusivity must be positive")


# Source parameter table; index i holds source i + 1.
SOURCES = (
    PlumeSource((20.0, 20.0), 100.0, 50.0, (0.5, 0.5), 10.0),
    PlumeSource((30.0, 80.0), 100.0, 60.0, (-0.3, 0.2), 15.0),
    PlumeSource((45.0, 55.0), 15.0, 50.0, (0.5, 0.5), 10.0),
    PlumeSource((50.0, 50.0), 18.0, 30.0, (-0.3, 0.2), 15.0),
    PlumeSource((55.0, 45.0), 16.0, 40.0, (0.2, -0.4), 12.0),
    PlumeSource((48.0, 52.0), 17.0, 35.0, (0.1, 0.1), 11.0),
    PlumeSource((52.0, 55.0), 14.0, 45.0, (-0.1, -0.1), 13.0),
    PlumeSource((52.0, 52.0), 18.0, 40.0, (0.1, -0.1), 13.0),
)


@dataclass(frozen=True)
class PlumeField:
    sources: tuple[PlumeSource, ...]
    size: float = 100.0
    sensor_size: float = 1.0
    dt: float = 1.0
    y_max: float = 60.0

    def __post_init__(self):
        if self.sensor_size <= 0 or self.dt <= 0:
            raise ConfigError("sensor size and dt must be positive")


def source_rate(src_theta, release_rate, gamma, wind, diffusivity, x, sensor_size=1.0):
    """Hit rate of one source at locations ``x``; parameters broadcast."""
    log_ratio = np.log(np.asarray(gamma, dtype=float) / sensor_size)
    if np.any(log_ratio <= 0):
        raise ConfigError("gamma must exceed the sensor size")
    diff = np.asarray(src_theta, dtype=float) - np.asarray(x, dtype=float)
    dist = np.maximum(np.hypot(diff[..., 0], diff[..., 1]), DIST_CLAMP)
    wind = np.asarray(wind, dtype=float)
    drift = diff[..., 0] * wind[..., 0] + diff[..., 1] * wind[..., 1]
    return (release_rate / log_ratio) * np.exp(-drift / (2.0 * diffusivity)) \
        * bessel_k0(dist / gamma)


def plume_rate(plume: PlumeField, source: PlumeSource, x):
    if not source.active:
        return np.zeros(np.shape(x)[:-1]) if np.ndim(x) > 1 else 0.0
    return source_rate(source.theta, source.release_rate, source.gamma, source.wind,
                       source.diffusivity, x, plume.sensor_size)


def total_rate(plume: PlumeField, x):
    x = np.asarray(x, dtype=float)
    rate = np.zeros(x.shape[:-1])
    for src in plume.sources:
        if src.active:
            rate = rate + plume_rate(plume, src, x)
    return rate if rate.ndim else float(rate)


def plume_observe(plume: PlumeField, x, rng: np.random.Generator) -> int:
    return int(rng.poisson(total_rate(plume, x) * plume.dt))


def measurement_grid(plume: PlumeField, stride: float = 2.0) -> np.ndarray:
    ticks = np.arange(0.0, plume.size, stride)
    gx, gy = np.meshgrid(ticks, ticks, indexing="ij")
    return np.column_stack([gx.ravel(), gy.ravel()])


# ------------------------------------------------- system-identification tasks

@dataclass(frozen=True)
class HypothesisGrid:
    """Finite hypothesis set with a vectorized rate evaluator.

    ``params`` is ``(H, p)``; ``kind`` is one of ``location``, ``wind`` or
    ``mask``. ``rates(points)`` returns the ``(H, C)`` hit-rate table.
    """

    kind: str
    params: np.ndarray
    base: PlumeField
    index: int = 0

    def __post_init__(self):
        if len(self.params) == 0:
            raise DomainError("hypothesis grid is empty")
        if len(np.unique(self.params, axis=0)) != len(self.params):
            raise DomainError("hypotheses must be distinct")

    def __len__(self):
        return len(self.params)

    def rates(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.kind == "mask":
            per_source = np.stack([
                source_rate(s.theta, s.release_rate, s.gamma, s.wind, s.diffusivity,
                            pts, self.base.sensor_size)
                for s in self.base.sources])
            return self.params.astype(float) @ per_source
        src = self.base.sources[self.index]
        if self.kind == "location":
            theta = self.params[:, None, :]
            return source_rate(theta, src.release_rate, src.gamma, src.wind,
                               src.diffusivity, pts[None], self.base.sensor_size)
        if self.kind == "wind":
            wind = self.params[:, None, :]
            return source_rate(src.theta, src.release_rate, src.gamma, wind,
                               src.diffusivity, pts[None], self.base.sensor_size)
        raise DomainError(f"unknown hypothesis kind {self.kind!r}")


@dataclass(frozen=True)
class CsiTask:
    name: str
    truth: PlumeField
    grid: HypothesisGrid
    truth_params: np.ndarray
    beta: float

    @property
    def y_max(self) -> float:
        return self.truth.y_max


DEFAULT_ACTIVE_MASK = (True, False, True, True, False, True)  # sources 3..8


def _single_source(index: int, y_max: float, **overrides) -> PlumeField:
    return PlumeField(sources=(replace(SOURCES[index], **overrides),), y_max=y_max)


def csi_task(name: str, y_max: float | None = None, beta: float | None = None) -> CsiTask:
    """Build one of ``csi-localization``, ``csi-wind``, ``csi-sources``."""
    if name == "csi-localization":
        truth = _single_source(0, 60.0 if y_max is None else y_max)
        ticks = np.arange(20) * 5.0
        params = np.array(list(itertools.product(ticks, ticks)))
        grid = HypothesisGrid("location", params, truth, 0)
        return CsiTask(name, truth, grid, np.array(SOURCES[0].theta),
                       0.5 if beta is None else beta)
    if name == "csi-wind":
        truth = _single_source(1, 60.0 if y_max is None else y_max)
        ticks = np.round(np.arange(-10, 10) * 0.1, 10)
        params = np.array(list(itertools.product(ticks, ticks)))
        grid = HypothesisGrid("wind", params, truth, 0)
        return CsiTask(name, truth, grid, np.array(SOURCES[1].wind),
                       1.0 if beta is None else beta)
    if name == "csi-sources":
        srcs = tuple(replace(s, active=a) for s, a in zip(SOURCES[2:], DEFAULT_ACTIVE_MASK))
        truth = PlumeField(sources=srcs, y_max=30.0 if y_max is None else y_max)
        params = np.array(list(itertools.product((0, 1), repeat=6)), dtype=int)
        # the hypothesis evaluator needs every source switched on
        base = replace(truth, sources=tuple(replace(s, active=True) for s in srcs))
        grid = HypothesisGrid("mask", params, base)
        return CsiTask(name, truth, grid, np.array(DEFAULT_ACTIVE_MASK, dtype=int),
                       5.0 if beta is None else beta)
    raise ConfigError(f"unknown system-identification task {name!r}")


# ----------------------------------------------------- targeted-search testbed

# Each output is 1 - exp(-sum of Gaussian bumps); rows: centre (3), width, height.
TAS_BUMPS = (
    np.array([
        [0.22, 0.72, 0.30, 0.16, 2.6],
        [0.74, 0.28, 0.62, 0.14, 2.4],
        [0.58, 0.80, 0.86, 0.12, 2.2],
        [0.35, 0.25, 0.80, 0.20, 0.9],
    ]),
    np.array([
        [0.26, 0.66, 0.36, 0.15, 2.4],
        [0.70, 0.34, 0.56, 0.13, 2.6],
        [0.62, 0.74, 0.90, 0.12, 2.0],
        [0.80, 0.80, 0.20, 0.22, 0.9],
    ]),
)


# per-output standard deviation over a 64^3 cell-centre grid of the cube
TAS_OUTPUT_SCALE = (0.2394, 0.2304)


def tas_truth(x) -> np.ndarray:
    """Two failure scores in ``[0, 1]`` over the unit cube of scenarios."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != 3:
        raise DomainError("targeted-search inputs are 3-dimensional")
    if np.any(x < 0) or np.any(x > 1):
        raise DomainError("input outside the unit cube")
    outs = []
    for bumps in TAS_BUMPS:
        d2 = ((x[..., None, :] - bumps[:, :3]) ** 2).sum(axis=-1)
        energy = (bumps[:, 4] * np.exp(-0.5 * d2 / bumps[:, 3] ** 2)).sum(axis=-1)
        outs.append(1.0 - np.exp(-energy))
    return np.stack(outs, axis=-1)


# --------------------------------------------------- multi-objective testbeds

VEHICLE_TARGET = np.array([1864.7202, 11.8199, 0.2904])
GRID_WEIGHTS = np.array([1.0, -1.0, 2.0, 1.0])


def _vehicle_like(x):
    u = 1.0 + 2.0 * x
    u1, u2, u3, u4, u5 = np.moveaxis(u, -1, 0)
    f1 = (1780.0 + 12.0 * u1 + 10.0 * u2 + 18.0 * u3 + 8.0 * u4 + 14.0 * u5
          - 3.0 * (u3 - 2.0) ** 2 + 4.0 * np.sin(2.0 * u1 * u2))
    f2 = (7.0 + 1.15 * u1 - 1.04 * u2 + 0.97 * u3 + 0.84 * u4 - 0.37 * u1 * u4
          + 0.09 * u1 * u5 + 0.36 * u2 * u4 - 0.11 * u1 ** 2 - 0.34 * u3 ** 2
          + 0.18 * u4 ** 2 + 0.5 * np.sin(u5 + u2))
    f3 = (0.10 + 0.018 * u1 + 0.102 * u2 + 0.042 * u3 - 0.0073 * u1 * u2
          + 0.024 * u2 * u3 - 0.0118 * u2 * u4 - 0.0204 * u3 * u4 - 0.008 * u3 * u5
          - 0.0241 * u2 ** 2 + 0.0109 * u4 ** 2 + 0.02 * np.cos(u1 - u4))
    return np.stack([f1, f2, f3], axis=-1)


def _grid_coefficients():
    # frozen draw; not exposed to any experiment seed
    rng = np.random.default_rng(20240611)
    centres = rng.uniform(0.15, 0.85, size=(4, 40))
    curv = rng.uniform(0.5, 1.5, size=(4, 40))
    amp = rng.uniform(0.05, 0.25, size=(4, 40))
    phase = rng.uniform(0.0, 2.0 * np.pi, size=(4, 40))
    return centres, curv, amp, phase


_GRID = _grid_coefficients()


def _grid_like(x):
    centres, curv, amp, phase = _GRID
    xb = x[..., None, :]
    quad = -(curv * (xb - centres) ** 2).mean(axis=-1)
    wave = (amp * np.sin(2.0 * np.pi * xb + phase)).mean(axis=-1)
    return 1.0 + quad + wave


MO_PROBLEMS = {
    "vehicle-safety-like": (5, 3, _vehicle_like),
    "linear-grid-like": (40, 4, _grid_like),
}


def mo_truth(kind: str, x) -> np.ndarray:
    try:
        dim, _, fn = MO_PROBLEMS[kind]
    except KeyError:
        raise ConfigError(f"unknown multi-objective problem {kind!r}") from None
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != dim:
        raise DomainError(f"{kind} expects {dim}-dimensional inputs")
    return fn(x)


@dataclass(frozen=True)
class HiddenUtility:
    kind: str
    params: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        if self.kind == "negative-squared-distance":
            return -((y - self.params) ** 2).sum(axis=-1)
        if self.kind == "linear":
            return y @ self.params
        raise ConfigError(f"unknown utility kind {self.kind!r}")


def default_utility(problem: str) -> HiddenUtility:
    if problem == "vehicle-safety-like":
        return HiddenUtility("negative-squared-distance", VEHICLE_TARGET)
    if problem == "linear-grid-like":
        return HiddenUtility("linear", GRID_WEIGHTS)
    raise ConfigError(f"unknown multi-objective problem {problem!r}")


def dm_respond(utility: HiddenUtility, y1, y2, lam: float, mode: str,
               rng: np.random.Generator) -> int:
    """Simulated decision-maker: 1 if ``y1`` is preferred, else 2."""
    g1, g2 = float(utility(y1)), float(utility(y2))
    if mode == "deterministic":
        return 1 if g1 >= g2 else 2
    if mode != "stochastic":
        raise ConfigError(f"unknown decision-maker mode {mode!r}")
    p1 = ndtr((g1 - g2) / (np.sqrt(2.0) * lam))
    return 1 if rng.random() < p1 else 2
