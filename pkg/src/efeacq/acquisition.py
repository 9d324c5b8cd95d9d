"""Curiosity-weighted acquisition: ``beta * epistemic - expected energy``.

Every selector scores a finite candidate set and returns the argmax with the
lowest index winning ties, together with the full score table.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import gp as gpm
from .coverage import CoverageTracker
from .discrete import DiscretePosterior, sweep
from .errors import DomainError, ParameterError
from .preference import PreferenceModel, predict_utility_pair, response_ig_from_moments

STRATEGIES = {
    "csi": ("aif", "random", "greedy", "eig"),
    "tas": ("aif", "random", "greedy", "eig"),
    "composite": ("full", "g+gIG", "g-only", "random"),
}


@dataclass(frozen=True)
class Selection:
    """Chosen index plus per-candidate tables.

    ``pragmatic`` holds the pragmatic value (minus the expected energy), so
    that ``score = beta * epistemic + pragmatic`` for the curiosity rules.
    """

    index: int
    score: np.ndarray
    epistemic: np.ndarray
    pragmatic: np.ndarray

    @property
    def chosen(self) -> tuple[float, float, float]:
        i = self.index
        return float(self.score[i]), float(self.epistemic[i]), float(self.pragmatic[i])


def efe_score(epistemic, pragmatic_energy, beta: float):
    """``beta * epistemic - pragmatic_energy``."""
    if beta < 0:
        raise ParameterError("beta must be nonnegative")
    return beta * np.asarray(epistemic) - np.asarray(pragmatic_energy)


def argmax_first(score) -> int:
    score = np.asarray(score, dtype=float)
    if score.size == 0:
        raise DomainError("empty candidate set")
    if np.any(np.isnan(score)):
        raise DomainError("acquisition scores contain NaN")
    return int(np.argmax(score))


def _select(epistemic, pragmatic_value, beta) -> Selection:
    score = efe_score(epistemic, -np.asarray(pragmatic_value), beta)
    return Selection(argmax_first(score), score, np.asarray(epistemic),
                     np.asarray(pragmatic_value))


# ------------------------------------------------------------------ CSI

def select_csi(post: DiscretePosterior, rate_table, beta: float, y_max: float,
               dt: float = 1.0, saturating: bool = False) -> Selection:
    """EIG about the hypothesis minus the probability of exceeding ``y_max``.

    ``rate_table`` is the ``(H, C)`` hypothesis-by-candidate rate cache.
    With ``saturating`` the EIG treats readings above ``y_max`` as one
    censored outcome.
    """
    rate_table = np.asarray(rate_table)
    if rate_table.ndim != 2 or rate_table.shape[1] == 0:
        raise DomainError("empty candidate set")
    res = sweep(post, rate_table, dt, y_max, saturating)
    return _select(res.eig, -res.violation, beta)


# ------------------------------------------------------------------ TAS

def outcome_samples(model: gpm.GpModel, xs, n_mc: int, seed) -> np.ndarray:
    """Marginal predictive outcome draws ``(n_mc, C, m)`` (common random numbers
    across candidates)."""
    if n_mc < 1:
        raise ParameterError("n_mc must be positive")
    mean, var = gpm.predict(model, np.atleast_2d(xs))
    sd = np.sqrt(var + model.noise_vars)
    z = np.random.default_rng(seed).standard_normal((n_mc, 1, model.n_outputs))
    return mean[None] + z * sd[None]


def select_tas(model: gpm.GpModel, tracker: CoverageTracker, candidates, beta: float,
               n_mc: int, seed) -> Selection:
    """``beta * I(f_x; y) + E[coverage gain]`` over the candidate inputs."""
    xs = np.atleast_2d(np.asarray(candidates, dtype=float))
    if xs.shape[0] == 0:
        raise DomainError("empty candidate set")
    epi = gpm.mi_query(model, xs)
    samples = outcome_samples(model, xs, n_mc, seed)
    gain = tracker.gains(samples.reshape(-1, samples.shape[-1])).reshape(n_mc, -1).mean(axis=0)
    return _select(epi, gain, beta)


# ------------------------------------------------------------ composite

def _joint_pair_samples(model: gpm.GpModel, xa, xb, n_mc: int, seed):
    """Joint outcome draws for each pair, shape ``(n_mc, P, 2, m)``, original scale."""
    mean, cov2 = gpm.pair_moments(model, xa, xb)
    noise = np.array([o.kernel.noise_var for o in model.outputs])
    a = cov2[..., 0, 0] + noise
    d = cov2[..., 1, 1] + noise
    b = cov2[..., 0, 1]
    l11 = np.sqrt(a)
    l21 = b / l11
    l22 = np.sqrt(np.maximum(d - l21 * l21, 0.0))
    z = np.random.default_rng(seed).standard_normal((n_mc, len(mean), 2, model.n_outputs))
    s1 = mean[None, :, 0] + l11[None] * z[:, :, 0]
    s2 = mean[None, :, 1] + l21[None] * z[:, :, 0] + l22[None] * z[:, :, 1]
    out = np.stack([s1, s2], axis=2)
    return out * model.y_std + model.y_mean, cov2


def composite_terms(model: gpm.GpModel, pref: PreferenceModel, xa, xb, n_mc: int, seed):
    """Per pair: outcome information, mean response information and mean utility."""
    xa = np.atleast_2d(np.asarray(xa, dtype=float))
    xb = np.atleast_2d(np.asarray(xb, dtype=float))
    if len(xa) == 0 or len(xa) != len(xb):
        raise DomainError("need a nonempty set of matched pairs")
    ys, cov2 = _joint_pair_samples(model, xa, xb, n_mc, seed)
    noise = np.array([o.kernel.noise_var for o in model.outputs])
    mi = gpm.pair_mi_from_cov(cov2, noise[None, :]).sum(axis=1)
    m = ys.shape[-1]
    y1 = ys[:, :, 0].reshape(-1, m)
    y2 = ys[:, :, 1].reshape(-1, m)
    umean, var_d = predict_utility_pair(pref, y1, y2)
    ig = response_ig_from_moments(umean[:, 0] - umean[:, 1], var_d, pref.lam)
    util = 0.5 * (umean[:, 0] + umean[:, 1])
    return mi, ig.reshape(n_mc, -1).mean(axis=0), util.reshape(n_mc, -1).mean(axis=0)


def select_composite(model: gpm.GpModel, pref: PreferenceModel, pairs, beta: float,
                     gamma: float, n_mc: int, seed) -> Selection:
    """Nested rule ``gamma * I(f_x; y) + E_y[beta * I(g; z) + mean utility]``.

    ``pairs`` is ``(xa, xb)`` with matched rows. The reported epistemic term
    is ``gamma * I(f; y) + beta * I(g; z)`` so the score equals
    ``epistemic + pragmatic``.
    """
    if beta < 0 or gamma < 0:
        raise ParameterError("beta and gamma must be nonnegative")
    xa, xb = pairs
    mi, ig, util = composite_terms(model, pref, xa, xb, n_mc, seed)
    epi = gamma * mi + beta * ig
    return _select(epi, util, 1.0)


ABLATIONS = {
    "g-only": lambda beta, gamma: (0.0, 0.0),
    "g+gIG": lambda beta, gamma: (beta, 0.0),
    "full": lambda beta, gamma: (beta, gamma),
}


# ------------------------------------------------------------ baselines

def select_baseline(kind: str, state, candidates, seed) -> Selection:
    """Reference strategies.

    ``random`` ignores ``state``. ``greedy-csi`` / ``eig-csi`` take
    ``(posterior, y_max, dt)`` with ``candidates`` the rate table;
    ``greedy-tas`` takes ``(gp, tracker, n_mc)``; ``eig-tas`` takes the
    parameter-space tracker.
    """
    if kind == "random":
        n = len(candidates)
        if n == 0:
            raise DomainError("empty candidate set")
        idx = int(np.random.default_rng(seed).integers(n))
        zero = np.zeros(n)
        score = zero.copy()
        score[idx] = 1.0
        return Selection(idx, score, zero, zero)
    if kind in ("greedy-csi", "eig-csi"):
        if not (isinstance(state, tuple) and isinstance(state[0], DiscretePosterior)):
            raise DomainError(f"{kind} needs (posterior, y_max, dt)")
        post, y_max, dt = state
        res = sweep(post, np.asarray(candidates), dt, y_max)
        if kind == "greedy-csi":
            return _select(res.eig, -res.violation, 0.0)
        return Selection(argmax_first(res.eig), res.eig.copy(), res.eig, -res.violation)
    if kind == "greedy-tas":
        if not (isinstance(state, tuple) and isinstance(state[1], CoverageTracker)):
            raise DomainError("greedy-tas needs (gp, tracker, n_mc)")
        model, tracker, n_mc = state
        xs = np.atleast_2d(candidates)
        samples = outcome_samples(model, xs, n_mc, seed)
        gain = tracker.gains(samples.reshape(-1, samples.shape[-1])).reshape(n_mc, -1).mean(0)
        return _select(np.zeros(len(xs)), gain, 0.0)
    if kind == "eig-tas":
        if not isinstance(state, CoverageTracker):
            raise DomainError("eig-tas needs the parameter-space tracker")
        gain = state.gains(np.atleast_2d(candidates))
        return Selection(argmax_first(gain), gain, gain, np.zeros_like(gain))
    raise DomainError(f"unknown baseline {kind!r}")
