"""Numerical checks of the identities the acquisition rules rest on.

* the expected free energy of a finite joint equals negative mutual
  information plus expected surprisal under the preference;
* observing a subset of a finite grid is as informative about the whole
  grid vector as about the observed values (Monte-Carlo KL check);
* the Gaussian information gain dominates the scaled posterior variance
  used by upper-confidence-bound rules.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import gp as gpm
from .infotheory import DiscreteDistribution, gaussian_mi_joint, gaussian_mi_point, verify_efe_decomposition


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    max_error: float
    detail: str = ""

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] {self.name}: max error {self.max_error:.3e}{'; ' + self.detail if self.detail else ''}"


def random_joint(rng: np.random.Generator, max_states: int = 6, max_outcomes: int = 8):
    ns = int(rng.integers(1, max_states + 1))
    ny = int(rng.integers(2, max_outcomes + 1))
    q = rng.dirichlet(np.full(ns * ny, 0.7)).reshape(ns, ny)
    if rng.random() < 0.3:  # sprinkle exact zeros
        q[rng.random(q.shape) < 0.2] = 0.0
        if q.sum() == 0:
            q[0, 0] = 1.0
        q /= q.sum()
    pref = DiscreteDistribution.from_probs(rng.dirichlet(np.ones(ny)))
    return q, pref


def check_decomposition(n: int = 100, seed: int = 0, tol: float = 1e-10,
                        pragmatic_sign: float = 1.0) -> CheckResult:
    """Both evaluations of the expected free energy on ``n`` random joints."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        q, pref = random_joint(rng)
        res = verify_efe_decomposition(q, pref, pragmatic_sign=pragmatic_sign)
        worst = max(worst, res.error)
    return CheckResult("efe-decomposition", worst <= tol, worst, f"{n} joints, tol {tol:g}")


def mc_grid_information(prior_cov: np.ndarray, subset, noise_var: float, n_draws: int,
                        rng: np.random.Generator) -> tuple[float, float]:
    """Monte-Carlo mean and standard error of ``KL(posterior || prior)`` over the
    whole grid vector when only ``subset`` is observed with Gaussian noise."""
    k = prior_cov.shape[0]
    subset = np.asarray(subset)
    kxx = prior_cov[np.ix_(subset, subset)] + noise_var * np.eye(len(subset))
    kgx = prior_cov[:, subset]
    gain = np.linalg.solve(kxx, kgx.T).T                    # (k, |X|)
    post_cov = prior_cov - gain @ kgx.T
    post_cov = 0.5 * (post_cov + post_cov.T)
    prior_chol = gpm.cholesky_jitter(prior_cov)
    post_chol = gpm.cholesky_jitter(post_cov)
    logdet_prior = 2.0 * np.log(np.diag(prior_chol)).sum()
    logdet_post = 2.0 * np.log(np.diag(post_chol)).sum()
    trace_term = np.trace(np.linalg.solve(prior_cov, post_cov))
    ys = rng.multivariate_normal(np.zeros(len(subset)), kxx, size=n_draws)
    means = ys @ gain.T                                      # (n, k)
    white = np.linalg.solve(prior_chol, means.T)             # (k, n)
    quad = (white * white).sum(axis=0)
    kls = 0.5 * (trace_term + quad - k + logdet_prior - logdet_post)
    return float(kls.mean()), float(kls.std(ddof=1) / np.sqrt(n_draws))


def check_subset_information(n_instances: int = 20, n_draws: int = 10_000, seed: int = 1,
                 n_sigma: float = 3.0) -> CheckResult:
    """Subset information equals whole-grid information on random GP instances."""
    rng = np.random.default_rng(seed)
    worst, failures = 0.0, 0
    for _ in range(n_instances):
        dim = int(rng.integers(1, 3))
        k = int(rng.integers(2, 7))
        grid = rng.random((k, dim))
        kernel = gpm.KernelSpec(tuple(rng.uniform(0.2, 0.6, dim)),
                                float(rng.uniform(0.3, 1.0)), float(rng.uniform(0.05, 0.5)))
        n_train = int(rng.integers(0, 4))
        tx = rng.random((n_train, dim))
        model = gpm.fit(tx, rng.normal(size=(n_train, 1)), [kernel])
        _, cov = gpm.predict_joint(model, grid)
        cov = cov[0] + 1e-9 * np.eye(k)
        size = int(rng.integers(1, k + 1))
        subset = np.sort(rng.choice(k, size, replace=False))
        exact = gaussian_mi_joint(cov[np.ix_(subset, subset)], kernel.noise_var)
        mc, se = mc_grid_information(cov, subset, kernel.noise_var, n_draws, rng)
        z = abs(mc - exact) / max(se, 1e-300)
        worst = max(worst, z)
        failures += z > n_sigma
    return CheckResult("grid-subset-information", failures == 0, worst,
                       f"{n_instances} instances x {n_draws} draws, error in MC std errors")


def check_ucb_bound(noise_vars=(1e-3, 0.01, 0.1, 1.0, 10.0), resolution: float = 1e-3) -> CheckResult:
    """``0.5 log(1 + s / noise) >= 0.5 log(1 + 1 / noise) * s`` for ``s`` in [0, 1]."""
    s = np.linspace(0.0, 1.0, int(round(1.0 / resolution)) + 1)
    worst = 0.0
    ok = True
    for nv in noise_vars:
        beta_ucb = 0.5 * np.log1p(1.0 / nv)
        mi = gaussian_mi_point(s, nv)
        bound = beta_ucb * s
        # equality holds at both ends; allow one ulp of rounding there
        slack = mi - bound + 4 * np.spacing(np.maximum(mi, bound))
        worst = max(worst, float(np.max(np.maximum(bound - mi, 0.0))))
        ok &= bool(np.all(slack >= 0.0))
    return CheckResult("ucb-variance-bound", ok, worst,
                       f"{len(noise_vars)} noise levels, grid step {resolution:g}")


def run_all(seed: int = 0) -> list[CheckResult]:
    return [check_decomposition(seed=seed), check_subset_information(seed=seed + 1), check_ucb_bound()]
