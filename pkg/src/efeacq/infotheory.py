"""Discrete and Gaussian information-theoretic primitives.

All probability arithmetic is carried out in log space; entropies and
divergences are in nats.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp, xlogy

from .errors import DegenerateError, DomainError, NumericError, ParameterError

NORM_TOL = 1e-10
POISSON_TAIL = 1e-12
JITTER = 1e-9


@dataclass(frozen=True)
class DiscreteDistribution:
    """Normalized distribution over ``support_size`` atoms stored as log weights."""

    log_weights: np.ndarray

    def __post_init__(self):
        lw = np.asarray(self.log_weights, dtype=float)
        if lw.ndim != 1 or lw.size == 0:
            raise DomainError("log_weights must be a nonempty vector")
        if np.any(np.isnan(lw)) or np.any(lw == np.inf):
            raise DomainError("log_weights must be finite or -inf")
        if abs(logsumexp(lw)) > NORM_TOL:
            raise DomainError(f"distribution not normalized (logsumexp={logsumexp(lw):.3e})")
        lw.setflags(write=False)
        object.__setattr__(self, "log_weights", lw)

    @classmethod
    def from_log_weights(cls, log_weights) -> DiscreteDistribution:
        lw = np.asarray(log_weights, dtype=float)
        z = logsumexp(lw)
        if not np.isfinite(z):
            raise DegenerateError("all weights are zero")
        return cls(lw - z)

    @classmethod
    def from_probs(cls, probs) -> DiscreteDistribution:
        p = np.asarray(probs, dtype=float)
        if np.any(p < 0):
            raise DomainError("negative probability")
        with np.errstate(divide="ignore"):
            return cls.from_log_weights(np.log(p))

    @classmethod
    def uniform(cls, n: int) -> DiscreteDistribution:
        if n < 1:
            raise DomainError("empty support")
        return cls(np.full(n, -np.log(n)))

    @property
    def support_size(self) -> int:
        return self.log_weights.size

    @property
    def probs(self) -> np.ndarray:
        return np.exp(self.log_weights)


def boltzmann(energy, beta: float) -> DiscreteDistribution:
    """Map energies ``h`` to the Gibbs distribution ``exp(-h/beta) / Z``."""
    if not beta > 0:
        raise ParameterError(f"temperature must be positive, got {beta}")
    h = np.asarray(energy, dtype=float)
    if np.any(np.isnan(h)) or np.any(h == -np.inf):
        raise DomainError("energies must be finite or +inf")
    if not np.any(np.isfinite(h)):
        raise DegenerateError("all energies are +inf")
    return DiscreteDistribution.from_log_weights(-h / beta)


def entropy(p: DiscreteDistribution) -> float:
    w = p.probs
    return max(float(-np.sum(xlogy(w, w))), 0.0)


def kl(p: DiscreteDistribution, q: DiscreteDistribution) -> float:
    if p.support_size != q.support_size:
        raise DomainError("distributions have different supports")
    lp, lq = p.log_weights, q.log_weights
    mass = lp > -np.inf
    if np.any(mass & (lq == -np.inf)):
        raise DomainError("p is not absolutely continuous with respect to q")
    w = np.exp(lp[mass])
    return max(float(np.sum(w * (lp[mass] - lq[mass]))), 0.0)


def poisson_logpmf(k, rate):
    k = np.asarray(k, dtype=float)
    rate = np.asarray(rate, dtype=float)
    return xlogy(k, rate) - rate - gammaln(k + 1.0)


def poisson_pmf(rate, k):
    """Poisson probability of ``k`` events at mean ``rate`` (vectorized)."""
    if np.any(np.asarray(rate) < 0):
        raise ParameterError("rate must be nonnegative")
    return np.exp(poisson_logpmf(k, rate))


def poisson_cap(rate: float) -> int:
    """Hard upper bound on the count support used for truncated sums."""
    return int(np.ceil(rate + 12.0 * np.sqrt(rate) + 30.0))


def poisson_support(rate: float) -> int:
    """Smallest ``kmax`` whose cumulative mass reaches ``1 - 1e-12`` (capped)."""
    cap = poisson_cap(rate)
    cdf = np.cumsum(poisson_pmf(rate, np.arange(cap + 1)))
    hit = np.nonzero(cdf >= 1.0 - POISSON_TAIL)[0]
    return int(hit[0]) if hit.size else cap


def poisson_entropy(rate: float) -> float:
    if rate < 0:
        raise ParameterError("rate must be nonnegative")
    if rate == 0:
        return 0.0
    p = poisson_pmf(rate, np.arange(poisson_support(rate) + 1))
    return max(float(-np.sum(xlogy(p, p))), 0.0)


def gaussian_mi_point(posterior_var, noise_var):
    """Information gain ``0.5 log(1 + var / noise)`` of one noisy observation."""
    if np.any(np.asarray(noise_var) <= 0):
        raise ParameterError("noise variance must be positive")
    v = np.maximum(np.asarray(posterior_var, dtype=float), 0.0)
    return 0.5 * np.log1p(v / noise_var)


def _psd_check(cov: np.ndarray) -> np.ndarray:
    cov = 0.5 * (cov + cov.T)
    try:
        np.linalg.cholesky(cov + JITTER * np.eye(cov.shape[0]))
    except np.linalg.LinAlgError:
        raise NumericError("covariance is not positive semidefinite") from None
    return cov


def gaussian_mi_joint(posterior_cov, noise_var: float) -> float:
    """``0.5 log det(I + cov / noise)`` for jointly observed Gaussian values."""
    if noise_var <= 0:
        raise ParameterError("noise variance must be positive")
    cov = np.atleast_2d(np.asarray(posterior_cov, dtype=float))
    if cov.shape[0] != cov.shape[1]:
        raise DomainError("covariance must be square")
    cov = _psd_check(cov)
    L = np.linalg.cholesky(np.eye(cov.shape[0]) + cov / noise_var)
    return max(float(np.sum(np.log(np.diag(L)))), 0.0)


@dataclass(frozen=True)
class EfeDecomposition:
    lhs: float
    rhs: float
    epistemic: float
    pragmatic: float
    approximation_gap: float | None = None

    @property
    def error(self) -> float:
        return abs(self.lhs - self.rhs)


def _as_log_pref(preference, n: int) -> np.ndarray:
    if isinstance(preference, DiscreteDistribution):
        lp = preference.log_weights
    else:
        lp = np.asarray(DiscreteDistribution.from_probs(preference).log_weights)
    if lp.size != n:
        raise DomainError("preference support does not match the outcome axis")
    return lp


def verify_efe_decomposition(joint, preference, true_prior=None,
                             pragmatic_sign: float = 1.0) -> EfeDecomposition:
    """Compute the expected free energy of a finite joint ``q(s, y | x)`` two ways.

    ``lhs`` evaluates the expectation form term by term over the joint, with
    the surrogate posterior standing in for the true one. ``rhs`` uses the
    split into negative mutual information (via entropies) and the expected
    surprisal under the preference, computed on the outcome marginal.

    When ``true_prior`` is supplied, the dropped divergence between surrogate
    and true posteriors is reported as ``approximation_gap``.
    ``pragmatic_sign`` exists only for negative-control checks.
    """
    q = np.asarray(joint, dtype=float)
    if q.ndim != 2 or np.any(q < 0) or abs(q.sum() - 1.0) > NORM_TOL:
        raise DomainError("joint must be a nonnegative matrix summing to one")
    lp = _as_log_pref(preference, q.shape[1])
    qs = q.sum(axis=1)
    qy = q.sum(axis=0)

    # expectation form over the joint
    nz = q > 0
    s_idx, y_idx = np.nonzero(nz)
    w = q[nz]
    log_s_given_y = np.log(w) - np.log(qy[y_idx])
    if np.any(w > 0) and np.any(np.isneginf(lp[y_idx])):
        raise DomainError("preference assigns zero mass to a reachable outcome")
    term1 = -np.sum(w * (log_s_given_y - np.log(qs[s_idx])))
    term2 = -np.sum(w * lp[y_idx])
    lhs = float(term1 + term2)

    # entropy split on the marginals
    def _h(p):
        return float(-np.sum(xlogy(p, p)))

    mi = _h(qs) + _h(qy) - _h(q.ravel())
    mask = qy > 0
    pragmatic = float(-np.sum(qy[mask] * lp[mask]))
    rhs = -mi + pragmatic_sign * pragmatic

    gap = None
    if true_prior is not None:
        ps = np.asarray(true_prior, dtype=float)
        lik = np.divide(q, qs[:, None], out=np.zeros_like(q), where=qs[:, None] > 0)
        pj = lik * ps[:, None]
        py = pj.sum(axis=0)
        gap = 0.0
        for j in np.nonzero(qy > 0)[0]:
            a = q[:, j] / qy[j]
            b = pj[:, j] / py[j] if py[j] > 0 else np.zeros_like(a)
            m = a > 0
            if np.any(b[m] == 0):
                gap = np.inf
                break
            gap += qy[j] * float(np.sum(a[m] * np.log(a[m] / b[m])))
    return EfeDecomposition(lhs, rhs, epistemic=float(mi), pragmatic=pragmatic,
                            approximation_gap=gap)
