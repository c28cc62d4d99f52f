import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import lu_factor, lu_solve

from sprd import BlockTridiagonal, SolverError, block_thomas_solve


def random_dominant(rng, n_nodes, m, identity_ends=True):
    sub = rng.uniform(-1, 1, (n_nodes, m, m))
    sup = rng.uniform(-1, 1, (n_nodes, m, m))
    diag = rng.uniform(-1, 1, (n_nodes, m, m))
    sub[0] = 0.0
    sup[-1] = 0.0
    diag += np.eye(m) * (3 * m + 1)
    if identity_ends:
        for i in (0, -1):
            sub[i] = sup[i] = 0.0
            diag[i] = np.eye(m)
    return BlockTridiagonal(sub, diag, sup)


def dense_oracle(op, rhs):
    return lu_solve(lu_factor(op.to_dense()), rhs.ravel()).reshape(rhs.shape)


def test_identity():
    m, n = 3, 10
    eye = np.broadcast_to(np.eye(m), (n, m, m)).copy()
    z = np.zeros_like(eye)
    rhs = np.random.default_rng(0).standard_normal((n, m))
    np.testing.assert_array_equal(block_thomas_solve(BlockTridiagonal(z, eye, z.copy()), rhs), rhs)


@pytest.mark.parametrize("seed", range(10))
def test_random_m2_n16_matches_dense(seed):
    rng = np.random.default_rng(seed)
    op = random_dominant(rng, 17, 2)
    rhs = rng.standard_normal((17, 2))
    z = block_thomas_solve(op, rhs)
    ref = dense_oracle(op, rhs)
    assert np.max(np.abs(z - ref)) <= 1e-12 * np.max(np.abs(ref))
    assert np.max(np.abs(op.matvec(z) - rhs)) <= 1e-10 * (1 + np.max(np.abs(rhs)))


@settings(max_examples=30, deadline=None)
@given(m=st.integers(1, 5), n=st.integers(3, 40), seed=st.integers(0, 2**31))
def test_random_shapes(m, n, seed):
    rng = np.random.default_rng(seed)
    op = random_dominant(rng, n, m, identity_ends=False)
    rhs = rng.standard_normal((n, m))
    z = block_thomas_solve(op, rhs)
    np.testing.assert_allclose(z, dense_oracle(op, rhs), rtol=1e-11, atol=1e-12)


def test_pivoting_needed_inside_block():
    # zero leading entry in every diagonal block forces a row swap
    n, m = 6, 2
    diag = np.tile(np.array([[0.0, 4.0], [4.0, 1.0]]), (n, 1, 1))
    sub = np.tile(0.5 * np.eye(m), (n, 1, 1))
    sup = np.tile(0.5 * np.eye(m), (n, 1, 1))
    sub[0] = sup[-1] = 0.0
    op = BlockTridiagonal(sub, diag, sup)
    rhs = np.arange(n * m, dtype=float).reshape(n, m)
    np.testing.assert_allclose(block_thomas_solve(op, rhs), dense_oracle(op, rhs), rtol=1e-12)


def test_scalar_toeplitz():
    n = 8
    sub = np.full((n + 1, 1, 1), -1.0)
    sup = np.full((n + 1, 1, 1), -1.0)
    diag = np.full((n + 1, 1, 1), 2.0)
    sub[0] = sup[-1] = 0.0
    op = BlockTridiagonal(sub, diag, sup)
    rhs = np.ones((n + 1, 1))
    np.testing.assert_allclose(block_thomas_solve(op, rhs), dense_oracle(op, rhs), rtol=1e-12)


def test_singular_pivot_names_node():
    n, m = 5, 2
    eye = np.tile(np.eye(m), (n, 1, 1))
    zeros = np.zeros((n, m, m))
    eye[3] = 0.0
    with pytest.raises(SolverError) as info:
        block_thomas_solve(BlockTridiagonal(zeros, eye, zeros.copy()), np.ones((n, m)))
    assert info.value.node == 3
    assert "3" in str(info.value)


def test_factor_reuse_matches_fresh_solve():
    rng = np.random.default_rng(5)
    op = random_dominant(rng, 12, 3)
    factor = op.factorize()
    for _ in range(3):
        rhs = rng.standard_normal((12, 3))
        np.testing.assert_array_equal(factor.solve(rhs), block_thomas_solve(op, rhs))


def test_entries_and_dense_agree():
    rng = np.random.default_rng(1)
    op = random_dominant(rng, 6, 2)
    dense = op.to_dense()
    rebuilt = np.zeros_like(dense)
    for r, c, v in op.entries():
        rebuilt[r, c] = v
    np.testing.assert_array_equal(rebuilt, dense)
    v = rng.standard_normal((6, 2))
    np.testing.assert_allclose(op.matvec(v).ravel(), dense @ v.ravel(), rtol=1e-14, atol=1e-14)


def test_shape_mismatch_rejected():
    with pytest.raises(ValueError):
        BlockTridiagonal(np.zeros((4, 2, 2)), np.zeros((5, 2, 2)), np.zeros((4, 2, 2)))
