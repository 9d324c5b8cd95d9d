"""Exact Bayesian posterior over a finite hypothesis grid with Poisson counts."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp
from scipy.stats import poisson

from ._kernels import poisson_mixture_sweep
from .environments import HypothesisGrid
from .errors import DegenerateError, DomainError
from .infotheory import (DiscreteDistribution, entropy, poisson_entropy,
                         poisson_logpmf, poisson_support)

# hypotheses this far below the posterior mode (in log weight) are skipped in sweeps
PRUNE_LOG_GAP = 40.0


@dataclass(frozen=True)
class DiscretePosterior:
    grid: HypothesisGrid
    log_weights: np.ndarray

    def __post_init__(self):
        lw = np.asarray(self.log_weights, dtype=float)
        if lw.shape != (len(self.grid),):
            raise DomainError("log_weights length does not match the grid")
        lw.setflags(write=False)
        object.__setattr__(self, "log_weights", lw)

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    @property
    def distribution(self) -> DiscreteDistribution:
        return DiscreteDistribution(self.log_weights)

    def active(self) -> tuple[np.ndarray, np.ndarray]:
        """Indices and renormalized weights of non-negligible hypotheses."""
        lw = self.log_weights
        idx = np.nonzero(lw >= lw.max() - PRUNE_LOG_GAP)[0]
        w = np.exp(lw[idx] - logsumexp(lw[idx]))
        return idx, w


def init_uniform(grid: HypothesisGrid) -> DiscretePosterior:
    if len(grid) == 0:
        raise DomainError("empty hypothesis grid")
    return DiscretePosterior(grid, np.full(len(grid), -np.log(len(grid))))


def update(post: DiscretePosterior, x, y, dt: float = 1.0, rates=None,
           saturated=False) -> DiscretePosterior:
    """Condition on counts ``y`` observed at locations ``x``.

    ``x`` may be one location or a batch; ``rates`` optionally supplies the
    precomputed ``(H, n)`` hit-rate table for those locations. Where
    ``saturated`` is set the reading only tells that the count exceeded
    ``y``, and the likelihood is the Poisson upper tail.
    """
    ys = np.atleast_1d(np.asarray(y))
    if np.any(ys < 0) or np.any(ys != np.round(ys)):
        raise DomainError("counts must be nonnegative integers")
    if rates is None:
        rates = post.grid.rates(np.reshape(x, (-1, 2)))
    rates = np.reshape(rates, (len(post.grid), -1))
    if rates.shape[1] != ys.size:
        raise DomainError("number of locations and counts differ")
    sat = np.broadcast_to(np.asarray(saturated, dtype=bool), ys.shape)
    lam = rates * dt
    terms = np.where(sat[None, :], poisson.logsf(ys[None, :], lam),
                     poisson_logpmf(ys[None, :], lam))
    loglik = terms.sum(axis=1)
    lw = post.log_weights + loglik
    z = logsumexp(lw)
    if not np.isfinite(z):
        raise DegenerateError("no hypothesis explains the observed counts")
    return DiscretePosterior(post.grid, lw - z)


def _rates_at(post: DiscretePosterior, x) -> np.ndarray:
    return post.grid.rates(np.reshape(x, (1, 2)))[:, 0]


def predictive_pmf(post: DiscretePosterior, x, dt: float = 1.0, rates=None) -> DiscreteDistribution:
    lam = (_rates_at(post, x) if rates is None else np.asarray(rates)) * dt
    kmax = max(poisson_support(r) for r in lam)
    k = np.arange(kmax + 1)
    logp = logsumexp(post.log_weights[:, None] + poisson_logpmf(k[None, :], lam[:, None]),
                     axis=0)
    return DiscreteDistribution.from_log_weights(logp)


def eig(post: DiscretePosterior, x, dt: float = 1.0, rates=None) -> float:
    """Mutual information between the hypothesis and a count observed at ``x``."""
    lam = (_rates_at(post, x) if rates is None else np.asarray(rates)) * dt
    h_mix = entropy(predictive_pmf(post, x, 1.0, rates=lam))
    h_cond = float(np.dot(post.weights, [poisson_entropy(r) for r in lam]))
    return max(h_mix - h_cond, 0.0)


def violation_probability(post: DiscretePosterior, x, dt: float, y_max: float,
                          rates=None) -> float:
    if y_max < 0:
        raise DomainError("y_max must be nonnegative")
    p = predictive_pmf(post, x, dt, rates=rates).probs
    k = np.arange(p.size)
    return float(np.clip(p[k > y_max].sum(), 0.0, 1.0))


@dataclass(frozen=True)
class SweepResult:
    eig: np.ndarray
    violation: np.ndarray


def sweep(post: DiscretePosterior, rate_table: np.ndarray, dt: float,
          y_max: float, saturating: bool = False) -> SweepResult:
    """EIG and violation probability for every column of ``rate_table`` (H, C)."""
    idx, w = post.active()
    lam = np.ascontiguousarray(rate_table[idx] * dt)
    h_mix, h_cond, p_viol = poisson_mixture_sweep(w, lam, float(y_max), saturating)
    return SweepResult(np.maximum(h_mix - h_cond, 0.0), np.clip(p_viol, 0.0, 1.0))


@dataclass(frozen=True)
class PointEstimate:
    map: np.ndarray
    mean: np.ndarray | None


def point_estimate(post: DiscretePosterior) -> PointEstimate:
    params = post.grid.params
    best = params[int(np.argmax(post.log_weights))]
    if post.grid.kind == "mask":
        return PointEstimate(best.copy(), None)
    return PointEstimate(best.astype(float), post.weights @ params.astype(float))


def estimation_error(post: DiscretePosterior, truth) -> float:
    """Distance of the posterior mean to ``truth`` (Hamming error of the MAP for masks)."""
    est = point_estimate(post)
    truth = np.asarray(truth)
    if est.mean is None:
        return float(np.sum(est.map != truth))
    return float(np.linalg.norm(est.mean - truth))
