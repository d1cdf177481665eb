import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dugh.pdlinalg import (
    NotSymmetricError,
    geometric_mean,
    jitter_level,
    pd_inv_sqrt,
    pd_logdet,
    pd_solve,
    pd_sqrt,
    safe_inverse,
    sym_eig,
)

from conftest import random_spd

seeds = st.integers(0, 2**32 - 1)


def test_sym_eig_identity():
    u, d = sym_eig(np.eye(3))
    np.testing.assert_allclose(d, [1, 1, 1])
    np.testing.assert_allclose(np.abs(u), np.eye(3), atol=1e-15)


def test_sym_eig_diag_descending():
    u, d = sym_eig(np.diag([1.0, 4.0]))
    np.testing.assert_allclose(d, [4, 1])
    np.testing.assert_allclose(np.abs(u), [[0, 1], [1, 0]])


def test_sym_eig_reconstruction(rng):
    a = random_spd(rng, 5)
    u, d = sym_eig(a)
    assert np.all(np.diff(d) <= 0)
    assert np.linalg.norm((u * d) @ u.T - a) < 1e-10


def test_sym_eig_rejects_asymmetric():
    with pytest.raises(NotSymmetricError):
        sym_eig(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_pd_sqrt_examples():
    np.testing.assert_allclose(pd_sqrt(np.eye(4)), np.eye(4))
    np.testing.assert_allclose(pd_sqrt(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]))


@settings(max_examples=40, deadline=None)
@given(seed=seeds, n=st.integers(1, 8))
def test_pd_sqrt_squares_back_and_commutes(seed, n):
    a = random_spd(np.random.default_rng(seed), n)
    s = pd_sqrt(a)
    assert np.linalg.norm(s @ s - a) < 1e-10 * max(1, np.linalg.norm(a))
    assert np.linalg.norm(s @ a - a @ s) < 1e-8 * np.linalg.norm(a)
    np.testing.assert_allclose(pd_inv_sqrt(a) @ s, np.eye(n), atol=1e-9)


def test_geometric_mean_examples(rng):
    m = random_spd(rng, 4)
    np.testing.assert_allclose(geometric_mean(np.eye(4), m), pd_sqrt(m), atol=1e-12)
    np.testing.assert_allclose(geometric_mean(m, m), m, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(geometric_mean(np.diag([4.0]), np.diag([9.0])), [[6.0]])


def test_geometric_mean_dimension_mismatch():
    with pytest.raises(ValueError):
        geometric_mean(np.eye(2), np.eye(3))


@settings(max_examples=50, deadline=None)
@given(seed=seeds, n=st.integers(1, 10))
def test_geometric_mean_riccati_and_commutative(seed, n):
    rng = np.random.default_rng(seed)
    a, m = random_spd(rng, n), random_spd(rng, n)
    g = geometric_mean(a, m)
    assert np.linalg.norm(g @ np.linalg.solve(a, g) - m) / np.linalg.norm(m) < 1e-8
    g2 = geometric_mean(m, a)
    assert np.linalg.norm(g - g2) / np.linalg.norm(g) < 1e-8


@settings(max_examples=30, deadline=None)
@given(seed=seeds, n=st.integers(1, 8))
def test_geometric_mean_shared_eigenbasis(seed, n):
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    da, dm = rng.uniform(0.1, 10, n), rng.uniform(0.1, 10, n)
    g = geometric_mean((q * da) @ q.T, (q * dm) @ q.T)
    np.testing.assert_allclose(g, (q * np.sqrt(da * dm)) @ q.T, atol=1e-10)


def test_safe_inverse_examples():
    np.testing.assert_allclose(safe_inverse(np.eye(3)), np.eye(3))
    np.testing.assert_allclose(safe_inverse(np.diag([2.0, 4.0])), np.diag([0.5, 0.25]))


def test_safe_inverse_conditioned(rng):
    for _ in range(30):
        a = random_spd(rng, 6, cond=10 ** rng.uniform(0, 8))
        inv = safe_inverse(a)
        assert np.linalg.norm(a @ inv - np.eye(6)) < 1e-8
        np.testing.assert_array_equal(inv, inv.T)


def test_safe_inverse_at_cond_1e8(rng):
    # float64 floor: even a correctly rounded symmetric inverse sits near 1e-8 here
    for _ in range(30):
        a = random_spd(rng, 6, cond=1e8)
        assert np.linalg.norm(a @ safe_inverse(a) - np.eye(6)) < 2e-8


def test_jitter_applied_only_near_singular():
    a = np.diag([1.0, 0.0])
    inv = safe_inverse(a)  # singular input survives through the jitter
    assert np.all(np.isfinite(inv))
    level = jitter_level(a)
    assert level == pytest.approx(1e-10 * 0.5)
    np.testing.assert_allclose(pd_sqrt(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]), rtol=0, atol=0)


def test_solve_and_logdet(rng):
    a = random_spd(rng, 5)
    b = rng.standard_normal((5, 3))
    np.testing.assert_allclose(a @ pd_solve(a, b), b, atol=1e-10)
    assert pd_logdet(a) == pytest.approx(np.linalg.slogdet(a)[1], rel=1e-12)
