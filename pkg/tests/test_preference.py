import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import ndtr

from efeacq.errors import DomainError, ParameterError
from efeacq.gp import KernelSpec
from efeacq.preference import (Comparison, laplace_fit, pair_response_ig, predict_utility,
                               predict_utility_pair, response_ig_from_moments,
                               response_likelihood)

KERNEL = KernelSpec((0.8, 0.8), 1.0, 1e-4)


def random_comparisons(rng, n_points=6, n_comp=8, dim=2):
    pts = rng.normal(size=(n_points, dim))
    out = []
    for _ in range(n_comp):
        i, j = rng.choice(n_points, 2, replace=False)
        out.append(Comparison(pts[i], pts[j], int(rng.integers(1, 3))))
    return out


def fd_relative_error(model, f, h=1e-6):
    g = model.log_posterior_grad(f)
    fd = np.array([(model.log_posterior(f + h * e) - model.log_posterior(f - h * e)) / (2 * h)
                   for e in np.eye(f.size)])
    return np.linalg.norm(g - fd) / max(np.linalg.norm(fd), np.linalg.norm(g), 1.0)


def test_comparison_validation():
    with pytest.raises(DomainError):
        Comparison([0, 1], [0, 1], 1)
    with pytest.raises(DomainError):
        Comparison([0, 1], [1, 1], 3)


def test_response_likelihood_cases():
    assert response_likelihood(0.3, 0.3, 0.1) == 0.5
    assert response_likelihood(np.sqrt(2) * 0.1, 0.0, 0.1) == pytest.approx(0.8413447460685429, abs=1e-12)
    assert response_likelihood(0.2, 0.7, 0.3) == pytest.approx(1 - response_likelihood(0.7, 0.2, 0.3), abs=1e-15)
    with pytest.raises(ParameterError):
        response_likelihood(0, 1, 0.0)


@settings(max_examples=100, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(-100, 100), st.floats(0.01, 2))
def test_response_likelihood_shift_invariant(g1, g2, c, lam):
    # exact in real arithmetic; the shifted sum itself rounds
    assert abs(response_likelihood(g1 + c, g2 + c, lam) - response_likelihood(g1, g2, lam)) <= 1e-10


def test_empty_model_is_prior():
    model = laplace_fit([], KERNEL, 0.1)
    assert model.map_utilities.size == 0
    assert predict_utility(model, np.array([0.3, -1.0])) == (0.0, 1.0)
    one = laplace_fit([Comparison([0.0, 0.0], [1.0, 0.0], 1)], KERNEL, 0.1)
    k = KERNEL(one.outcome_points, one.outcome_points)
    assert np.all(np.diag(one.laplace_cov) < np.diag(k))


@pytest.mark.oracle
def test_single_comparison_orders_map():
    model = laplace_fit([Comparison([0.0, 0.0], [1.0, 0.5], 1)], KERNEL, 0.1)
    assert model.map_utilities[0] > model.map_utilities[1]
    model2 = laplace_fit([Comparison([0.0, 0.0], [1.0, 0.5], 2)], KERNEL, 0.1)
    assert model2.map_utilities[0] < model2.map_utilities[1]


@pytest.mark.oracle
def test_gradient_matches_finite_differences_on_20_sets():
    rng = np.random.default_rng(2024)
    for _ in range(20):
        model = laplace_fit(random_comparisons(rng), KERNEL, float(rng.uniform(0.05, 0.5)))
        assert fd_relative_error(model, model.map_utilities) <= 1e-4
        off = model.map_utilities + rng.normal(scale=0.3, size=model.map_utilities.size)
        assert fd_relative_error(model, off) <= 1e-4


@pytest.mark.oracle
def test_many_wins_raise_predictive_mean():
    a, b = np.array([0.0, 0.0]), np.array([1.5, -0.5])
    comps = [Comparison(a, b, 1) for _ in range(5)]
    model = laplace_fit(comps, KERNEL, 0.1)
    assert predict_utility(model, a)[0] > predict_utility(model, b)[0]


def test_predictive_reverts_to_prior_far_away():
    model = laplace_fit([Comparison([0.0, 0.0], [1.0, 0.5], 1)], KERNEL, 0.1)
    mean, var = predict_utility(model, np.array([40.0, 40.0]))
    assert abs(mean) < 1e-12 and var == pytest.approx(1.0, abs=1e-12)


def test_pair_moments_consistent_with_marginals():
    rng = np.random.default_rng(3)
    model = laplace_fit(random_comparisons(rng), KERNEL, 0.2)
    y1, y2 = rng.normal(size=(4, 2)), rng.normal(size=(4, 2))
    mean, var_d = predict_utility_pair(model, y1, y2)
    m1, v1 = predict_utility(model, y1)
    m2, v2 = predict_utility(model, y2)
    assert np.allclose(mean, np.column_stack([m1, m2]), atol=1e-12)
    assert np.all(var_d <= v1 + v2 + 2 * np.sqrt(v1 * v2) + 1e-12)


def test_zero_variance_gives_zero_information():
    assert response_ig_from_moments(0.4, 0.0, 0.1)[0] == pytest.approx(0.0, abs=1e-12)
    assert response_ig_from_moments(-3.0, 0.0, 0.2)[0] == pytest.approx(0.0, abs=1e-12)


def dense_gh_ig(model, y1, y2, nodes=300):
    """Response information from a tensor Gauss-Hermite grid over (g1, g2)."""
    pts = model.standardize(np.vstack([y1, y2]))
    ks = model.kernel(model.outcome_points, pts)
    mean = ks.T @ model._alpha
    cov = model.kernel(pts, pts) - ks.T @ model._proj @ ks
    L = np.linalg.cholesky(cov + 1e-12 * np.eye(2))
    x, w = np.polynomial.hermite_e.hermegauss(nodes)
    w = w / w.sum()
    z1, z2 = np.meshgrid(x, x, indexing="ij")
    ww = np.outer(w, w)
    g1 = mean[0] + L[0, 0] * z1
    g2 = mean[1] + L[1, 0] * z1 + L[1, 1] * z2
    p = np.clip(ndtr((g1 - g2) / (np.sqrt(2) * model.lam)), 1e-300, 1 - 1e-16)
    h = -(p * np.log(p) + (1 - p) * np.log1p(-p))
    pbar = float((ww * p).sum())
    hbar = -(pbar * np.log(pbar) + (1 - pbar) * np.log1p(-pbar))
    return hbar - float((ww * h).sum())


@pytest.mark.oracle
def test_pair_ig_against_dense_two_dimensional_quadrature():
    rng = np.random.default_rng(17)
    for lam in (0.05, 0.1, 0.5):
        model = laplace_fit(random_comparisons(rng), KERNEL, lam)
        for _ in range(3):
            y1, y2 = rng.normal(size=2), rng.normal(size=2)
            assert pair_response_ig(model, y1, y2) == pytest.approx(dense_gh_ig(model, y1, y2), abs=1e-3)


@settings(max_examples=100, deadline=None)
@given(st.floats(-5, 5), st.floats(0, 25), st.floats(1e-3, 2))
def test_response_ig_bounds(mean, var, lam):
    ig = response_ig_from_moments(mean, var, lam)[0]
    assert 0.0 <= ig <= np.log(2)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31))
def test_order_consistency(seed):
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(5, 2))
    rank = rng.permutation(5)  # rank[i] higher is better
    comps = []
    pairs = [(i, j) for i in range(5) for j in range(i + 1, 5)]
    for i, j in pairs + pairs:
        comps.append(Comparison(pts[i], pts[j], 1 if rank[i] > rank[j] else 2))
    model = laplace_fit(comps, KernelSpec((1.0, 1.0), 1.0, 1e-4), 1e-3)
    means, _ = predict_utility(model, pts)
    assert np.array_equal(np.argsort(means), np.argsort(rank))
