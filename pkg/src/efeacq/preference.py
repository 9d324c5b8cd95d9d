"""Latent-utility model over outcomes learned from pairwise probit comparisons.

The posterior over utilities at the compared outcomes is approximated by a
Laplace (Gaussian) fit at the MAP.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import log_ndtr, ndtr

from .errors import ConvergenceError, DomainError, ParameterError
from .gp import KernelSpec, cholesky_jitter

SQRT2 = np.sqrt(2.0)
GRAD_TOL = 1e-6
MAX_NEWTON = 100

_GH_X, _GH_W = np.polynomial.hermite_e.hermegauss(32)
_GH_W = _GH_W / _GH_W.sum()
_GL_X, _GL_W = np.polynomial.legendre.leggauss(96)
_GL_X = 10.0 * _GL_X
_GL_W = 10.0 * _GL_W


@dataclass(frozen=True)
class Comparison:
    y1: np.ndarray
    y2: np.ndarray
    z: int

    def __post_init__(self):
        y1 = np.asarray(self.y1, dtype=float)
        y2 = np.asarray(self.y2, dtype=float)
        if self.z not in (1, 2):
            raise DomainError("winner must be 1 or 2")
        if np.all(np.abs(y1 - y2) <= 1e-12):
            raise DomainError("compared outcomes must differ")
        object.__setattr__(self, "y1", y1)
        object.__setattr__(self, "y2", y2)


def response_likelihood(g1, g2, lam: float):
    """Probability that the first outcome is preferred."""
    if lam <= 0:
        raise ParameterError("lambda must be positive")
    return ndtr((np.asarray(g1) - np.asarray(g2)) / (SQRT2 * lam))


def _mills(u):
    # phi(u) / Phi(u), stable for very negative u
    return np.exp(-0.5 * u * u - 0.5 * np.log(2.0 * np.pi) - log_ndtr(u))


@dataclass(frozen=True)
class PreferenceModel:
    outcome_points: np.ndarray
    winners: np.ndarray
    losers: np.ndarray
    kernel: KernelSpec
    lam: float
    map_utilities: np.ndarray
    laplace_cov: np.ndarray
    shift: np.ndarray = field(default_factory=lambda: np.zeros(1))
    scale: np.ndarray = field(default_factory=lambda: np.ones(1))
    _gram: np.ndarray = field(default=None, repr=False)
    _alpha: np.ndarray = field(default=None, repr=False)
    _proj: np.ndarray = field(default=None, repr=False)

    def standardize(self, y) -> np.ndarray:
        return (np.asarray(y, dtype=float) - self.shift) / self.scale

    # log posterior (up to a constant) as a function of utilities at outcome_points
    def log_posterior(self, f) -> float:
        return _log_lik(f, self.winners, self.losers, self.lam) \
            - 0.5 * f @ np.linalg.solve(self._gram, f)

    def log_posterior_grad(self, f) -> np.ndarray:
        grad, _ = _lik_derivs(f, self.winners, self.losers, self.lam)
        return grad - np.linalg.solve(self._gram, f)


def _index_outcomes(comparisons):
    points: list[np.ndarray] = []

    def find(y):
        for i, p in enumerate(points):
            if np.all(np.abs(p - y) <= 1e-12):
                return i
        points.append(y)
        return len(points) - 1

    win, lose = [], []
    for c in comparisons:
        a, b = find(c.y1), find(c.y2)
        win.append(a if c.z == 1 else b)
        lose.append(b if c.z == 1 else a)
    return points, np.array(win, dtype=int), np.array(lose, dtype=int)


def _log_lik(f, win, lose, lam) -> float:
    return float(np.sum(log_ndtr((f[win] - f[lose]) / (SQRT2 * lam))))


def _lik_derivs(f, win, lose, lam):
    c = 1.0 / (SQRT2 * lam)
    u = c * (f[win] - f[lose])
    r = _mills(u)
    grad = np.zeros_like(f)
    np.add.at(grad, win, c * r)
    np.add.at(grad, lose, -c * r)
    nu = c * c * r * (u + r)
    W = np.zeros((f.size, f.size))
    np.add.at(W, (win, win), nu)
    np.add.at(W, (lose, lose), nu)
    np.add.at(W, (win, lose), -nu)
    np.add.at(W, (lose, win), -nu)
    return grad, W


def laplace_fit(comparisons, kernel: KernelSpec, lam: float,
                shift=None, scale=None) -> PreferenceModel:
    """Newton iterations to the MAP utilities, then the Laplace covariance.

    Outcomes are mapped through ``(y - shift) / scale`` before entering the
    kernel. Raises :class:`ConvergenceError` when the log-posterior gradient
    stays above ``1e-6`` after 100 iterations.
    """
    if lam <= 0:
        raise ParameterError("lambda must be positive")
    comparisons = list(comparisons)
    pts, win, lose = _index_outcomes(comparisons)
    m = len(pts[0]) if pts else 0
    shift = np.zeros(max(m, 1)) if shift is None else np.asarray(shift, dtype=float)
    scale = np.ones(max(m, 1)) if scale is None else np.asarray(scale, dtype=float)
    P = (np.array(pts) - shift) / scale if pts else np.zeros((0, m))
    n = len(P)
    if n == 0:
        empty = np.zeros((0, 0))
        return PreferenceModel(P, win, lose, kernel, lam, np.zeros(0), empty,
                               shift, scale, empty, np.zeros(0), empty)
    K = kernel(P, P) + 1e-8 * np.eye(n)

    f = np.zeros(n)
    a = np.zeros(n)  # K^{-1} f
    psi = _log_lik(f, win, lose, lam)
    grad_norm = np.inf
    for _ in range(MAX_NEWTON):
        g, W = _lik_derivs(f, win, lose, lam)
        grad_norm = float(np.linalg.norm(g - a))
        if grad_norm <= GRAD_TOL:
            break
        b = W @ f + g
        a_new = np.linalg.solve(np.eye(n) + W @ K, b)
        step = 1.0
        while True:
            a_try = a + step * (a_new - a)
            f_try = K @ a_try
            psi_try = _log_lik(f_try, win, lose, lam) - 0.5 * f_try @ a_try
            if psi_try >= psi - 1e-12 or step < 1e-8:
                break
            step *= 0.5
        a, f, psi = a_try, f_try, psi_try
    else:
        g, W = _lik_derivs(f, win, lose, lam)
        grad_norm = float(np.linalg.norm(g - a))
        if grad_norm > GRAD_TOL:
            raise ConvergenceError("Laplace fit did not converge", grad_norm)

    _, W = _lik_derivs(f, win, lose, lam)
    proj = np.linalg.solve(np.eye(n) + W @ K, W)  # (I + W K)^{-1} W
    cov = K - K @ proj @ K
    cov = 0.5 * (cov + cov.T)
    return PreferenceModel(P, win, lose, kernel, lam, f, cov, shift, scale, K, a, proj)


def _utility_moments(model: PreferenceModel, ys_std):
    kss = np.full(len(ys_std), model.kernel.signal_var)
    if len(model.outcome_points) == 0:
        return np.zeros(len(ys_std)), kss
    ks = model.kernel(model.outcome_points, ys_std)
    mean = ks.T @ model._alpha
    var = kss - np.einsum("ij,ik,kj->j", ks, model._proj, ks)
    return mean, np.maximum(var, 0.0)


def predict_utility(model: PreferenceModel, y):
    """Posterior mean and variance of the latent utility at outcome(s) ``y``."""
    single = np.ndim(y) == 1
    ys = np.atleast_2d(model.standardize(y))
    mean, var = _utility_moments(model, ys)
    return (float(mean[0]), float(var[0])) if single else (mean, var)


def predict_utility_pair(model: PreferenceModel, y1, y2):
    """Joint moments of utilities at matched rows of ``y1`` and ``y2``.

    Returns means ``(n, 2)`` and the variance of the difference ``g1 - g2``.
    """
    a = np.atleast_2d(model.standardize(y1))
    b = np.atleast_2d(model.standardize(y2))
    sv = model.kernel.signal_var
    ls = np.asarray(model.kernel.lengthscales)
    d = (a - b) / ls
    kab = sv * np.exp(-0.5 * (d * d).sum(-1))
    if len(model.outcome_points) == 0:
        return np.zeros((len(a), 2)), np.maximum(2.0 * sv - 2.0 * kab, 0.0)
    ka = model.kernel(model.outcome_points, a)
    kb = model.kernel(model.outcome_points, b)
    mean = np.column_stack([ka.T @ model._alpha, kb.T @ model._alpha])
    kd = ka - kb
    var_d = 2.0 * sv - 2.0 * kab - np.einsum("ij,ik,kj->j", kd, model._proj, kd)
    return mean, np.maximum(var_d, 0.0)


def _binary_entropy(p):
    p = np.clip(p, 1e-300, 1.0 - 1e-16)
    return -(p * np.log(p) + (1.0 - p) * np.log1p(-p))


def response_ig_from_moments(mean_diff, var_diff, lam: float):
    """Information a comparison carries about the utilities, given the
    Gaussian moments of their difference.

    The expected conditional entropy is integrated with Gauss-Hermite nodes
    when the difference is narrow relative to the probit scale, and with
    Gauss-Legendre nodes over the probit's transition band otherwise.
    """
    mean_diff = np.atleast_1d(np.asarray(mean_diff, dtype=float))
    sd = np.sqrt(np.maximum(np.atleast_1d(var_diff), 0.0))
    c = 1.0 / (SQRT2 * lam)
    m = c * mean_diff
    s = c * sd
    pbar = ndtr(mean_diff / np.sqrt(2.0 * lam * lam + sd * sd))
    out = np.empty_like(m)
    narrow = s < 1.0
    if np.any(narrow):
        u = m[narrow, None] + s[narrow, None] * _GH_X
        out[narrow] = _binary_entropy(ndtr(u)) @ _GH_W
    if np.any(~narrow):
        mw, sw = m[~narrow, None], s[~narrow, None]
        pdf = np.exp(-0.5 * ((_GL_X - mw) / sw) ** 2) / (sw * np.sqrt(2.0 * np.pi))
        out[~narrow] = pdf @ (_GL_W * _binary_entropy(ndtr(_GL_X)))
    return np.clip(_binary_entropy(pbar) - out, 0.0, np.log(2.0))


def pair_response_ig(model: PreferenceModel, y1, y2):
    """Mutual information between the comparison outcome and the utilities."""
    single = np.ndim(y1) == 1
    mean, var_d = predict_utility_pair(model, y1, y2)
    ig = response_ig_from_moments(mean[:, 0] - mean[:, 1], var_d, model.lam)
    return float(ig[0]) if single else ig
