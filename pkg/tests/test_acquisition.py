import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import qmc

from efeacq import acquisition as acq
from efeacq import gp as gpm
from efeacq.coverage import CoverageTracker, TargetSet, parameter_tracker
from efeacq.discrete import init_uniform, sweep, update
from efeacq.environments import csi_task, measurement_grid, tas_truth
from efeacq.errors import DomainError, ParameterError
from efeacq.preference import Comparison, laplace_fit, predict_utility


@pytest.fixture(scope="module")
def csi_instance():
    task = csi_task("csi-localization")
    cand = measurement_grid(task.truth, 10.0)
    table = task.grid.rates(cand)
    post = init_uniform(task.grid)
    rng = np.random.default_rng(0)
    for j in (12, 47, 80):
        lam = float(np.exp(np.log(table[:, j]).mean()))
        post = update(post, cand[j], int(rng.poisson(lam)), rates=table[:, j])
    return post, table, task.y_max


def test_efe_score_arithmetic():
    assert acq.efe_score(1.0, 0.2, 0.5) == pytest.approx(0.3)
    assert acq.efe_score(0.0, 0.4, 3.0) == -0.4
    assert acq.efe_score(7.0, 0.4, 0.0) == -0.4
    with pytest.raises(ParameterError):
        acq.efe_score(1.0, 0.0, -1.0)
    with pytest.raises(DomainError):
        acq.argmax_first([])
    assert acq.argmax_first([1.0, 3.0, 3.0]) == 1


def test_csi_beta_zero_is_greedy(csi_instance):
    post, table, y_max = csi_instance
    a = acq.select_csi(post, table, 0.0, y_max)
    b = acq.select_baseline("greedy-csi", (post, y_max, 1.0), table, seed=0)
    assert a.index == b.index


@pytest.mark.oracle
def test_csi_violation_free_matches_eig(csi_instance):
    post, table, _ = csi_instance
    a = acq.select_csi(post, table, 0.5, 1e7)
    b = acq.select_baseline("eig-csi", (post, 1e7, 1.0), table, seed=0)
    assert np.all(a.pragmatic == 0.0)
    assert a.index == b.index


@pytest.mark.oracle
def test_csi_large_beta_matches_eig(csi_instance):
    post, table, y_max = csi_instance
    b = acq.select_baseline("eig-csi", (post, y_max, 1.0), table, seed=0)
    assert acq.select_csi(post, table, 1e8, y_max).index == b.index


def test_csi_scale_coherence_and_monotone_curiosity(csi_instance):
    post, table, y_max = csi_instance
    res = sweep(post, table, 1.0, y_max)
    base = acq.select_csi(post, table, 0.5, y_max)
    for c in (0.25, 4.0, 1024.0):  # powers of two keep the product exact
        assert acq._select(res.eig / c, -res.violation, 0.5 * c).index == base.index
    chosen = []
    for beta in (0, 0.1, 0.5, 1, 5, 100):
        sel = acq.select_csi(post, table, beta, y_max)
        chosen.append(res.eig[sel.index])
    assert all(a <= b for a, b in zip(chosen, chosen[1:]))


def test_csi_greedy_picks_the_safe_candidate():
    task = csi_task("csi-localization")
    post = init_uniform(task.grid)
    table = np.column_stack([np.full(400, 500.0), np.full(400, 2.0), np.full(400, 300.0)])
    sel = acq.select_baseline("greedy-csi", (post, 60.0, 1.0), table, seed=0)
    assert sel.index == 1


def test_random_baseline_reproducible():
    cand = np.zeros((50, 2))
    a = [acq.select_baseline("random", None, cand, s).index for s in range(10)]
    b = [acq.select_baseline("random", None, cand, s).index for s in range(10)]
    assert a == b and len(set(a)) > 1


@pytest.fixture(scope="module")
def dense_tas_model():
    x = qmc.Sobol(3, scramble=True, seed=1).random(256)
    k = [gpm.KernelSpec((0.22,) * 3, 1.0, 1e-8), gpm.KernelSpec((0.228,) * 3, 1.0, 1e-8)]
    return gpm.fit(x, tas_truth(x), k, standardize=True), x


@pytest.mark.oracle
def test_tas_single_sample_low_variance_equals_plug_in(dense_tas_model):
    model, x = dense_tas_model
    tracker = CoverageTracker(TargetSet([0.5, 0.5], [1.0, 1.0]), 0.1, scale=[0.2394, 0.2304])
    cand = x[:64]
    sel = acq.select_tas(model, tracker, cand, 0.0, n_mc=1, seed=3)
    plug_in = tracker.gains(gpm.predict(model, cand)[0])
    # sample sd ~3e-5 can only move probes lying on a ball boundary: one cell at most
    cell = 1.0 / tracker.covered.size
    assert np.all(np.abs(sel.pragmatic - plug_in) <= cell + 1e-15)
    assert np.mean(sel.pragmatic == plug_in) >= 0.95


def test_tas_fully_covered_reduces_to_uncertainty(dense_tas_model):
    model, _ = dense_tas_model
    tracker = CoverageTracker(TargetSet([0.0, 0.0], [1.0, 1.0]), 2.0).add_outcome([0.5, 0.5])
    assert tracker.covered_fraction() == 1.0
    cand = np.random.default_rng(0).random((40, 3))
    sel = acq.select_tas(model, tracker, cand, 20.0, 8, seed=0)
    assert np.all(sel.pragmatic == 0.0)
    assert sel.index == int(np.argmax(gpm.mi_query(model, cand)))


def test_selectors_are_deterministic(dense_tas_model):
    model, _ = dense_tas_model
    tracker = CoverageTracker(TargetSet([0.3, 0.3], [1.0, 1.0]), 0.1)
    cand = np.random.default_rng(4).random((30, 3))
    a = acq.select_tas(model, tracker, cand, 1.0, 16, seed=9)
    b = acq.select_tas(model, tracker, cand, 1.0, 16, seed=9)
    assert a.index == b.index and np.array_equal(a.score, b.score)


def test_eig_tas_maximizes_parameter_coverage():
    tr = parameter_tracker(3, 0.1, 20)
    tr.add_outcome([0.5, 0.5, 0.5])
    cand = np.array([[0.5, 0.5, 0.5], [0.55, 0.5, 0.5], [0.9, 0.1, 0.9]])
    assert acq.select_baseline("eig-tas", tr, cand, 0).index == 2


def small_composite(noise=1e-4):
    rng = np.random.default_rng(5)
    x = rng.random((8, 2))
    y = np.column_stack([np.sin(3 * x[:, 0]), x[:, 1] ** 2])
    ks = [gpm.KernelSpec((0.3, 0.3), 1.0, noise)] * 2
    return gpm.fit(x, y, ks, standardize=True), x, y


@pytest.mark.oracle
def test_composite_gamma_term_equals_pair_information():
    model, *_ = small_composite()
    pref = laplace_fit([], gpm.KernelSpec((1.0, 1.0)), 0.1)  # constant utility
    rng = np.random.default_rng(0)
    xa, xb = rng.random((10, 2)), rng.random((10, 2))
    sel = acq.select_composite(model, pref, (xa, xb), 0.0, 2.5, 16, seed=1)
    ref = np.array([gpm.mi_pair(model, np.vstack([a, b])) for a, b in zip(xa, xb)])
    assert np.allclose(sel.epistemic, 2.5 * ref, rtol=0, atol=1e-12)
    assert np.all(sel.pragmatic == 0.0)


def test_composite_zero_variance_score_is_mean_utility():
    model, x, y = small_composite(noise=1e-10)
    comps = [Comparison(y[0], y[1], 1), Comparison(y[2], y[3], 2)]
    shift, scale = y.mean(0), y.std(0)
    pref = laplace_fit(comps, gpm.KernelSpec((1.0, 1.0)), 0.1, shift, scale)
    xa, xb = x[:4], x[4:]
    sel = acq.select_composite(model, pref, (xa, xb), 0.0, 0.0, 4, seed=0)
    ua, _ = predict_utility(pref, y[:4])
    ub, _ = predict_utility(pref, y[4:])
    assert np.allclose(sel.score, 0.5 * (ua + ub), atol=1e-3)


def test_composite_ablation_table():
    assert acq.ABLATIONS["g-only"](2.0, 3.0) == (0.0, 0.0)
    assert acq.ABLATIONS["g+gIG"](2.0, 3.0) == (2.0, 0.0)
    assert acq.ABLATIONS["full"](2.0, 3.0) == (2.0, 3.0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.floats(0, 10))
def test_constant_pragmatic_gives_eig_choice(seed, shift):
    rng = np.random.default_rng(seed)
    epi = rng.random(30)
    sel = acq._select(epi, np.full(30, shift), float(rng.uniform(0.1, 5)))
    assert sel.index == int(np.argmax(epi))
