"""Fit isotropic SE-kernel hyperparameters by marginal likelihood on a fixed
Sobol design of each synthetic testbed (standardized outputs, unit signal variance, unit-cube inputs).

The printed values are the ones frozen into the shipped configs.
"""

import argparse

import numpy as np
from scipy.optimize import minimize
from scipy.stats import qmc

from efeacq.environments import MO_PROBLEMS, default_utility, mo_truth, tas_truth


def neg_log_marginal(log_params, x, y):
    ls, nv = np.exp(log_params)
    sv = 1.0
    d2 = ((x[:, None, :] - x[None, :, :]) ** 2).sum(-1)
    k = sv * np.exp(-0.5 * d2 / ls**2) + (nv + 1e-10) * np.eye(len(x))
    try:
        chol = np.linalg.cholesky(k)
    except np.linalg.LinAlgError:
        return 1e10
    alpha = np.linalg.solve(chol.T, np.linalg.solve(chol, y))
    return 0.5 * y @ alpha + np.log(np.diag(chol)).sum()


def fit_output(x, y, ls0):
    y = (y - y.mean()) / y.std()
    best = None
    for start in (0.5 * ls0, ls0, 2.0 * ls0):
        res = minimize(neg_log_marginal, np.log([start, 1e-3]), args=(x, y),
                       method="L-BFGS-B",
                       bounds=[(np.log(1e-2), np.log(1e2)), (np.log(1e-6), np.log(1.0))])
        if best is None or res.fun < best.fun:
            best = res
    return np.exp(best.x)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=256)
    parser.add_argument("--seed", type=int, default=12345)
    args = parser.parse_args()
    problems = {"tas": (3, tas_truth, 0.2)}
    for name, (dim, _, _) in MO_PROBLEMS.items():
        problems[name] = (dim, lambda x, name=name: mo_truth(name, x), 0.3 * np.sqrt(dim))
    for name, (dim, fn, ls0) in problems.items():
        x = qmc.Sobol(dim, scramble=True, seed=args.seed).random(args.n)
        y = fn(x)
        for j in range(y.shape[1]):
            ls, nv = fit_output(x, y[:, j], ls0)
            print(f"{name} output {j}: lengthscale={ls:.4g} noise_var={nv:.4g}")
        if name in MO_PROBLEMS:
            ys = (y - y.mean(0)) / y.std(0)
            u = default_utility(name)(y)
            ls, _ = fit_output(ys, u, 1.0)
            print(f"{name} utility over standardized outcomes: lengthscale={ls:.4g}")


if __name__ == "__main__":
    main()
