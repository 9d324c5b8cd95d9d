"""Exact Gaussian-process regression with independent outputs."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .errors import DomainError, NumericError, ParameterError
from .infotheory import gaussian_mi_point

JITTERS = (0.0, 1e-9, 1e-6)


@dataclass(frozen=True)
class KernelSpec:
    """Squared-exponential kernel with per-dimension lengthscales."""

    lengthscales: tuple[float, ...]
    signal_var: float = 1.0
    noise_var: float = 1e-4

    def __post_init__(self):
        ls = tuple(float(v) for v in np.atleast_1d(self.lengthscales))
        if min(ls) <= 0 or self.signal_var <= 0 or self.noise_var <= 0:
            raise ParameterError("kernel parameters must be positive")
        object.__setattr__(self, "lengthscales", ls)

    def __call__(self, a, b):
        ls = np.asarray(self.lengthscales)
        a = np.asarray(a, dtype=float) / ls
        b = np.asarray(b, dtype=float) / ls
        d2 = (a * a).sum(-1)[:, None] + (b * b).sum(-1)[None, :] - 2.0 * a @ b.T
        return self.signal_var * np.exp(-0.5 * np.maximum(d2, 0.0))

    def scaled(self, factor: float) -> KernelSpec:
        return KernelSpec(tuple(v * factor for v in self.lengthscales),
                          self.signal_var, self.noise_var)


def cholesky_jitter(a: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor, escalating diagonal jitter 1e-9 then 1e-6."""
    eye = np.eye(a.shape[0])
    for jitter in JITTERS:
        try:
            return np.linalg.cholesky(a + jitter * eye)
        except np.linalg.LinAlgError:
            continue
    raise NumericError("matrix is not positive definite after jitter escalation")


@dataclass(frozen=True)
class _Output:
    kernel: KernelSpec
    chol: np.ndarray
    alpha: np.ndarray


@dataclass(frozen=True)
class GpModel:
    """Zero-mean GP per output on standardized targets.

    ``y_mean`` / ``y_std`` record the standardization; predictions are
    returned on the original output scale.
    """

    train_x: np.ndarray
    train_y: np.ndarray
    outputs: tuple[_Output, ...]
    y_mean: np.ndarray = field(default_factory=lambda: np.zeros(1))
    y_std: np.ndarray = field(default_factory=lambda: np.ones(1))

    @property
    def n_outputs(self) -> int:
        return len(self.outputs)

    @property
    def noise_vars(self) -> np.ndarray:
        """Observation noise per output on the original scale."""
        return np.array([o.kernel.noise_var for o in self.outputs]) * self.y_std ** 2


def fit(x, y, kernels, standardize: bool = False) -> GpModel:
    x = np.asarray(x, dtype=float).reshape(len(x), -1) if len(x) else np.zeros((0, 0))
    y = np.asarray(y, dtype=float)
    kernels = list(kernels)
    m = len(kernels)
    y = y.reshape(len(x), m)
    if standardize and len(y) > 1:
        mu = y.mean(axis=0)
        sd = y.std(axis=0)
        sd = np.where(sd > 1e-12, sd, 1.0)
    elif standardize and len(y) == 1:
        mu, sd = y[0].copy(), np.ones(m)
    else:
        mu, sd = np.zeros(m), np.ones(m)
    ys = (y - mu) / sd
    outs = []
    for j, k in enumerate(kernels):
        if len(x) == 0:
            outs.append(_Output(k, np.zeros((0, 0)), np.zeros(0)))
            continue
        gram = k(x, x) + k.noise_var * np.eye(len(x))
        L = cholesky_jitter(gram)
        alpha = cho_solve((L, True), ys[:, j])
        outs.append(_Output(k, L, alpha))
    return GpModel(x, y, tuple(outs), mu, sd)


def _std_moments(model: GpModel, xs, full_cov: bool):
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    means, covs = [], []
    for o in model.outputs:
        kss = o.kernel(xs, xs) if full_cov else np.full(len(xs), o.kernel.signal_var)
        if len(model.train_x) == 0:
            means.append(np.zeros(len(xs)))
            covs.append(kss)
            continue
        ks = o.kernel(model.train_x, xs)
        means.append(ks.T @ o.alpha)
        v = solve_triangular(o.chol, ks, lower=True)
        if full_cov:
            c = kss - v.T @ v
            covs.append(0.5 * (c + c.T))
        else:
            covs.append(np.maximum(kss - (v * v).sum(axis=0), 0.0))
    return np.stack(means, axis=-1), np.stack(covs)


def predict(model: GpModel, x):
    """Predictive latent mean and variance at ``x`` (one point or ``(n, d)``)."""
    single = np.ndim(x) == 1
    mean, var = _std_moments(model, x, full_cov=False)
    mean = mean * model.y_std + model.y_mean
    var = var.T * model.y_std ** 2
    return (mean[0], var[0]) if single else (mean, var)


def std_variance(model: GpModel, xs) -> np.ndarray:
    """Latent variance on the standardized scale, shape ``(n, m)``."""
    return _std_moments(model, xs, full_cov=False)[1].T


def predict_joint(model: GpModel, xs):
    """Mean ``(n, m)`` and full covariance ``(m, n, n)`` on the original scale."""
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    if len(xs) == 0:
        raise DomainError("predict_joint needs at least one input")
    mean, cov = _std_moments(model, xs, full_cov=True)
    return (mean * model.y_std + model.y_mean,
            cov * (model.y_std ** 2)[:, None, None])


def sample_posterior(model: GpModel, xs, n: int, seed) -> np.ndarray:
    """Joint latent samples, shape ``(n, len(xs), m)``."""
    if n < 1:
        raise DomainError("need at least one sample")
    mean, cov = predict_joint(model, xs)
    rng = np.random.default_rng(seed)
    k = len(mean)
    z = rng.standard_normal((model.n_outputs, k, n))
    out = np.empty((n, k, model.n_outputs))
    for j in range(model.n_outputs):
        scale = max(float(np.max(np.diag(cov[j]))), 1e-300)
        L = cholesky_jitter(cov[j] + 1e-12 * scale * np.eye(k))
        out[:, :, j] = mean[:, j] + (L @ z[j]).T
    return out


def mi_query(model: GpModel, x):
    """Information about the latent outputs from observing ``x`` (summed over outputs)."""
    single = np.ndim(x) == 1
    var = std_variance(model, np.atleast_2d(x))
    noise = np.array([o.kernel.noise_var for o in model.outputs])
    mi = gaussian_mi_point(var, noise).sum(axis=-1)
    return float(mi[0]) if single else mi


def pair_mi_from_cov(cov2: np.ndarray, noise_var) -> np.ndarray:
    """``0.5 log det(I + C / noise)`` for a stack of 2x2 covariances ``(..., 2, 2)``."""
    a = 1.0 + cov2[..., 0, 0] / noise_var
    d = 1.0 + cov2[..., 1, 1] / noise_var
    b = cov2[..., 0, 1] / noise_var
    return 0.5 * np.log(np.maximum(a * d - b * b, 1.0))


def mi_pair(model: GpModel, xs) -> float:
    xs = np.asarray(xs, dtype=float)
    if len(xs) != 2:
        raise DomainError("mi_pair takes exactly two inputs")
    return float(pair_mi_batch(model, xs[None, 0], xs[None, 1])[0])


def pair_moments(model: GpModel, xa, xb):
    """Standardized-scale means ``(n, 2, m)`` and 2x2 covariances ``(n, m, 2, 2)``
    of the latent outputs at matched rows of ``xa`` and ``xb``."""
    xa = np.atleast_2d(np.asarray(xa, dtype=float))
    xb = np.atleast_2d(np.asarray(xb, dtype=float))
    n, m = len(xa), model.n_outputs
    mean = np.zeros((n, 2, m))
    cov2 = np.empty((n, m, 2, 2))
    for j, o in enumerate(model.outputs):
        k = o.kernel
        vaa = np.full(n, k.signal_var)
        vbb = np.full(n, k.signal_var)
        diff = (xa - xb) / np.asarray(k.lengthscales)
        vab = k.signal_var * np.exp(-0.5 * (diff * diff).sum(-1))
        if len(model.train_x):
            ka = k(model.train_x, xa)
            kb = k(model.train_x, xb)
            mean[:, 0, j] = ka.T @ o.alpha
            mean[:, 1, j] = kb.T @ o.alpha
            va = solve_triangular(o.chol, ka, lower=True)
            vb = solve_triangular(o.chol, kb, lower=True)
            vaa = vaa - (va * va).sum(0)
            vbb = vbb - (vb * vb).sum(0)
            vab = vab - (va * vb).sum(0)
        cov2[:, j, 0, 0] = np.maximum(vaa, 0.0)
        cov2[:, j, 1, 1] = np.maximum(vbb, 0.0)
        cov2[:, j, 0, 1] = cov2[:, j, 1, 0] = vab
    return mean, cov2


def pair_mi_batch(model: GpModel, xa, xb) -> np.ndarray:
    """Joint information of evaluating ``xa[i]`` and ``xb[i]`` together."""
    _, cov2 = pair_moments(model, xa, xb)
    noise = np.array([o.kernel.noise_var for o in model.outputs])
    return pair_mi_from_cov(cov2, noise[None, :]).sum(axis=1)
