import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from adapsne.affinity import conditional_matrix, pairwise_sq_dists, symmetrize
from adapsne.embedding import EmbedConfig, embed, initial_coords, kl_divergence, kl_gradient, student_t_affinities
from adapsne.errors import NumericalError, ValidationError
from adapsne.fwa import solve_all_bandwidths

import oracles
from helpers import blobs


def random_p(rng, n):
    a = rng.random((n, n))
    a = a + a.T
    np.fill_diagonal(a, 0.0)
    return a / a.sum()


def blob_affinities(seed, n=100, perplexity=20.0):
    x, labels = blobs(seed, n=n)
    d2 = pairwise_sq_dists(x)
    bw = solve_all_bandwidths(d2, perplexity)
    return symmetrize(conditional_matrix(d2, bw.sigma)), labels


def separable(y, labels):
    """One-vs-rest linear separability by LP feasibility of y_i (w.x_i + b) >= 1."""
    for c in np.unique(labels):
        s = np.where(labels == c, 1.0, -1.0)
        a_ub = -s[:, None] * np.hstack([y, np.ones((y.shape[0], 1))])
        res = linprog(np.zeros(3), A_ub=a_ub, b_ub=-np.ones(y.shape[0]), bounds=[(None, None)] * 3, method="highs")
        if res.status != 0:
            return False
    return True


# student-t affinities -----------------------------------------------------


def test_two_coincident_points():
    q, z = student_t_affinities(np.zeros((2, 2)))
    np.testing.assert_array_equal(q, [[0, 0.5], [0.5, 0]])
    assert z == 2.0


def test_two_points_at_unit_distance():
    q, z = student_t_affinities(np.array([[0.0, 0.0], [1.0, 0.0]]))
    assert z == 1.0  # w = 0.5 in both directions
    np.testing.assert_array_equal(q, [[0, 0.5], [0.5, 0]])


def test_affinities_match_loop():
    y = np.random.default_rng(0).normal(size=(4, 2))
    q, z = student_t_affinities(y)
    qo, zo = oracles.student_t_loop(y)
    np.testing.assert_allclose(q, qo, rtol=0, atol=1e-12)
    assert z == pytest.approx(zo, rel=1e-14)


@given(st.integers(0, 2**32 - 1), st.integers(2, 30))
@settings(max_examples=50, deadline=None)
def test_q_invariants(seed, n):
    q, _ = student_t_affinities(np.random.default_rng(seed).normal(scale=5, size=(n, 2)))
    assert np.array_equal(q, q.T)
    assert (np.diag(q) == 0).all()
    assert abs(q.sum() - 1.0) <= 1e-9


# kl ---------------------------------------------------------------------------


def test_kl_identity():
    q, _ = student_t_affinities(np.random.default_rng(1).normal(size=(6, 2)))
    assert kl_divergence(q, q) == 0.0


def test_kl_hand_example():
    p = np.array([[0, 0.5, 0], [0.5, 0, 0], [0, 0, 0]])
    q = np.array([[0, 0.25, 0.125], [0.25, 0, 0.125], [0.125, 0.125, 0]])
    assert kl_divergence(p, q) == pytest.approx(math.log(2), rel=1e-15)
    assert kl_divergence(p, q) == pytest.approx(oracles.kl_loop(p, q), rel=1e-15)


def test_kl_rejects_vanishing_q():
    p = np.array([[0, 0.5], [0.5, 0]])
    with pytest.raises(ValidationError):
        kl_divergence(p, np.zeros((2, 2)))


@given(st.integers(0, 2**32 - 1), st.integers(2, 12))
@settings(max_examples=50, deadline=None)
def test_kl_non_negative(seed, n):
    rng = np.random.default_rng(seed)
    q, _ = student_t_affinities(rng.normal(size=(n, 2)))
    assert kl_divergence(random_p(rng, n), q) >= 0.0


# gradient -------------------------------------------------------------------


def test_gradient_matches_finite_differences(backend):
    rng = np.random.default_rng(7)
    p = random_p(rng, 6)
    y = rng.normal(size=(6, 2))
    g = kl_gradient(p, y)
    fd = oracles.kl_gradient_fd(p, y)
    assert np.abs(g - fd).max() / np.abs(fd).max() < 1e-5


def test_gradient_vanishes_when_p_equals_q(backend):
    y = np.random.default_rng(3).normal(size=(7, 2))
    q, _ = student_t_affinities(y)
    np.testing.assert_allclose(kl_gradient(q, y), 0.0, atol=1e-15)


def test_exchange_symmetry(backend):
    p = np.array([[0, 0.5], [0.5, 0]])
    y = np.array([[-1.0, 0.5], [1.0, -0.5]])
    g = kl_gradient(p, y)
    np.testing.assert_allclose(g[0], -g[1], atol=1e-15)


@given(st.integers(0, 2**32 - 1), st.integers(2, 20))
@settings(max_examples=40, deadline=None)
def test_gradient_sums_to_zero(seed, n):
    rng = np.random.default_rng(seed)
    g = kl_gradient(random_p(rng, n), rng.normal(size=(n, 2)))
    assert np.abs(g.sum(axis=0)).max() <= 1e-12


def test_backends_agree_on_gradient():
    from adapsne import _accel

    rng = np.random.default_rng(5)
    p, y = random_p(rng, 40), rng.normal(size=(40, 2))
    prev = _accel.set_backend("numpy")
    try:
        a = kl_gradient(p, y)
        _accel.set_backend("numba")
        b = kl_gradient(p, y)
    finally:
        _accel.set_backend(prev)
    np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-16)


# optimiser -------------------------------------------------------------------


def test_config_validation():
    with pytest.raises(ValidationError):
        EmbedConfig(iterations=50, exaggeration_iters=50)
    with pytest.raises(ValidationError):
        EmbedConfig(momentum_late=1.0)
    with pytest.raises(ValidationError):
        EmbedConfig(init="pca")
    assert EmbedConfig().rate(100) == 20.0


def test_equilateral_fixed_point(backend):
    p = np.full((3, 3), 1 / 6)
    np.fill_diagonal(p, 0.0)
    y = embed(p, EmbedConfig(seed=4)).coords
    d = pairwise_sq_dists(y)[np.triu_indices(3, 1)] ** 0.5
    assert d.max() / d.min() - 1 < 0.02


def test_kl_decreases(backend):
    p, _ = blob_affinities(0, n=60)
    e = embed(p, EmbedConfig(seed=1, iterations=200))
    assert e.final_kl < e.kl_trace[0][1]
    its = [t for t, _ in e.kl_trace]
    assert its[0] == 0 and its[-1] == 200 and all(b - a == 10 for a, b in zip(its, its[1:]))
    assert all(v >= 0 for _, v in e.kl_trace)


def test_determinism_and_recentring(backend):
    p, _ = blob_affinities(1, n=50)
    a = embed(p, EmbedConfig(seed=9, iterations=120))
    b = embed(p, EmbedConfig(seed=9, iterations=120))
    assert np.array_equal(a.coords, b.coords)
    assert np.abs(a.coords.mean(axis=0)).max() <= 1e-9


def test_blob_mixture_embeds_well():
    sep = 0
    for seed in range(10):
        p, labels = blob_affinities(seed)
        e = embed(p, EmbedConfig(seed=seed))
        assert e.final_kl <= 0.5 * e.kl_trace[0][1]
        sep += separable(e.coords, labels)
    assert sep >= 9


def test_provided_init():
    p, _ = blob_affinities(2, n=30)
    y0 = initial_coords(30, EmbedConfig(seed=3)) * 100
    e = embed(p, EmbedConfig(iterations=20, exaggeration_iters=5, init="provided"), init=y0)
    assert e.coords.shape == (30, 2)
    with pytest.raises(ValidationError):
        embed(p, EmbedConfig(init="provided"))
    with pytest.raises(ValidationError):
        embed(p, EmbedConfig(), init=np.zeros((3, 2)))


def test_divergence_aborts_with_iteration():
    p, _ = blob_affinities(3, n=30)
    with pytest.raises(NumericalError, match="iteration"):
        embed(p, EmbedConfig(iterations=60, learning_rate=1e305, init_std=1.0))
