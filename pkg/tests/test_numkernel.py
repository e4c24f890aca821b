import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from koopmuq.errors import InvalidMatrix, InvalidParameter, NotSymmetric, RankDeficient
from koopmuq.numkernel import RngHandle, eig_sym, gauss_sample, pinv, qr_sign_normalized


def penrose_residuals(M, P):
    return (
        np.max(np.abs(M @ P @ M - M)),
        np.max(np.abs(P @ M @ P - P)),
        np.max(np.abs((M @ P).T - M @ P)),
        np.max(np.abs((P @ M).T - P @ M)),
    )


def test_pinv_identity():
    np.testing.assert_array_equal(pinv(np.eye(3)), np.eye(3))


def test_pinv_rank_deficient_diagonal():
    np.testing.assert_allclose(pinv(np.diag([2.0, 0.0])), np.diag([0.5, 0.0]))


def test_pinv_random_tall():
    M = np.random.default_rng(0).standard_normal((6, 3))
    assert np.max(np.abs(M @ pinv(M) @ M - M)) <= 1e-10


def test_pinv_rejects_non_finite():
    with pytest.raises(InvalidMatrix):
        pinv([[1.0, np.nan]])


@settings(max_examples=40, deadline=None)
@given(
    rows=st.integers(1, 7),
    cols=st.integers(1, 7),
    rank=st.integers(1, 7),
    seed=st.integers(0, 2**32 - 1),
)
def test_pinv_penrose_conditions(rows, cols, rank, seed):
    rng = np.random.default_rng(seed)
    rank = min(rank, rows, cols)
    M = rng.standard_normal((rows, rank)) @ rng.standard_normal((rank, cols))
    assert max(penrose_residuals(M, pinv(M))) <= 1e-10


def test_qr_identity():
    Q, R = qr_sign_normalized(np.eye(4))
    np.testing.assert_allclose(Q, np.eye(4), atol=1e-15)
    np.testing.assert_allclose(R, np.eye(4), atol=1e-15)


def test_qr_sign_normalization():
    Q, R = qr_sign_normalized(np.diag([-3.0, 2.0]))
    np.testing.assert_allclose(Q, np.diag([-1.0, 1.0]), atol=1e-15)
    np.testing.assert_allclose(R, np.diag([3.0, 2.0]), atol=1e-15)


def test_qr_gaussian_orthonormal():
    G = np.random.default_rng(1).standard_normal((8, 8))
    Q, _ = qr_sign_normalized(G)
    assert np.max(np.abs(Q.T @ Q - np.eye(8))) <= 1e-12


@settings(max_examples=30, deadline=None)
@given(rows=st.integers(1, 9), extra=st.integers(0, 4), seed=st.integers(0, 2**32 - 1))
def test_qr_properties(rows, extra, seed):
    G = np.random.default_rng(seed).standard_normal((rows + extra, rows))
    Q, R = qr_sign_normalized(G)
    assert np.max(np.abs(Q.T @ Q - np.eye(rows))) <= 1e-12
    assert np.all(np.diag(R) > 0)
    np.testing.assert_array_equal(R, np.triu(R))
    assert np.max(np.abs(Q @ R - G)) <= 1e-10


def test_qr_rank_deficient():
    with pytest.raises(RankDeficient):
        qr_sign_normalized(np.array([[1.0, 2.0], [2.0, 4.0]]))
    with pytest.raises(RankDeficient):
        qr_sign_normalized(np.ones((2, 3)))


def test_eig_sym_diag_sorted():
    w, V = eig_sym(np.diag([1.0, 4.0]))
    np.testing.assert_allclose(w, [4.0, 1.0])
    np.testing.assert_allclose(np.abs(V), [[0, 1], [1, 0]], atol=1e-15)


def test_eig_sym_identity():
    w, _ = eig_sym(np.eye(5))
    np.testing.assert_allclose(w, np.ones(5))


def test_eig_sym_reconstruction():
    A = np.random.default_rng(2).standard_normal((10, 10))
    M = A + A.T
    w, V = eig_sym(M)
    assert np.max(np.abs(V @ np.diag(w) @ V.T - M)) <= 1e-8
    assert np.all(np.diff(w) <= 0)
    assert np.max(np.abs(M @ V - V * w)) <= 1e-8 * np.linalg.norm(M)


@settings(max_examples=30, deadline=None)
@given(n=st.integers(1, 8), seed=st.integers(0, 2**32 - 1))
def test_eig_sym_trace(n, seed):
    A = np.random.default_rng(seed).standard_normal((n, n))
    M = A @ A.T
    w, _ = eig_sym(M)
    assert abs(w.sum() - np.trace(M)) <= 1e-9 * max(np.linalg.norm(M), 1.0)


def test_eig_sym_rejects_asymmetric():
    with pytest.raises(NotSymmetric):
        eig_sym([[1.0, 2.0], [0.0, 1.0]])


def test_gauss_zero_sd():
    np.testing.assert_array_equal(gauss_sample(RngHandle(1), 2.5, 0.0, 10), np.full(10, 2.5))


def test_gauss_moments():
    x = gauss_sample(RngHandle(11), 0.0, 1.0, 10**5)
    assert abs(x.mean()) <= 0.02
    assert 0.97 <= x.var(ddof=1) <= 1.03


def test_gauss_deterministic():
    h = RngHandle(5, 9)
    np.testing.assert_array_equal(gauss_sample(h, 0, 1, 1000), gauss_sample(h, 0, 1, 1000))
    assert not np.array_equal(gauss_sample(h, 0, 1, 10), gauss_sample(RngHandle(5, 10), 0, 1, 10))


def test_gauss_negative_sd():
    with pytest.raises(InvalidParameter):
        gauss_sample(RngHandle(0), 0.0, -1.0, 3)


def test_child_handles_distinct_and_stable():
    root = RngHandle(123)
    kids = [root.child(k) for k in range(50)]
    assert len({k.stream for k in kids}) == 50
    assert root.child(7) == RngHandle(123).child(7)


def test_handle_range():
    with pytest.raises(InvalidParameter):
        RngHandle(-1)
    with pytest.raises(InvalidParameter):
        RngHandle(0, 2**64)
