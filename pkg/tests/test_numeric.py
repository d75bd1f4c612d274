import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pnormgates.numeric import (DimensionError, Rng, add, add_col_broadcast, as_matrix,
                                hadamard, init_weights, map_elements, matmul)


def naive_matmul(a, b):
    out = [[0.0] * len(b[0]) for _ in range(len(a))]
    for i in range(len(a)):
        for j in range(len(b[0])):
            s = 0.0
            for k in range(len(b)):
                s += a[i][k] * b[k][j]
            out[i][j] = s
    return np.array(out)


def test_matmul_sum_of_rows():
    assert np.array_equal(matmul(as_matrix([[1, 2], [3, 4]]), as_matrix([[1], [1]])),
                          [[3], [7]])


def test_matmul_identity():
    m = Rng(3).uniform(-1, 1, (3, 5))
    assert np.array_equal(matmul(np.eye(3), m), m)


def test_matmul_matches_triple_loop():
    rng = Rng(11)
    a, b = rng.uniform(-10, 10, (5, 4)), rng.uniform(-10, 10, (4, 3))
    np.testing.assert_allclose(matmul(a, b), naive_matmul(a.tolist(), b.tolist()),
                               rtol=0, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 8), st.integers(1, 8), st.integers(1, 8), st.integers(0, 2**32))
def test_matmul_property(n, m, k, seed):
    rng = Rng(seed)
    a, b = rng.uniform(-10, 10, (n, m)), rng.uniform(-10, 10, (m, k))
    np.testing.assert_allclose(matmul(a, b), naive_matmul(a.tolist(), b.tolist()),
                               rtol=0, atol=1e-12)


def test_matmul_shape_error_names_shapes():
    with pytest.raises(DimensionError, match=r"\(2, 3\).*\(2, 3\)"):
        matmul(np.ones((2, 3)), np.ones((2, 3)))


def test_elementwise_ops():
    assert np.array_equal(hadamard(as_matrix([[2, 3]]), as_matrix([[4, 5]])), [[8, 15]])
    m = Rng(0).uniform(-1, 1, (3, 2))
    assert np.array_equal(add(m, np.zeros((3, 2))), m)
    assert np.array_equal(map_elements(m, lambda v: v), m)
    with pytest.raises(DimensionError):
        hadamard(np.ones((2, 2)), np.ones((2, 1)))
    with pytest.raises(DimensionError):
        add(np.ones((1, 2)), np.ones((2, 1)))


def test_broadcast_bias():
    out = add_col_broadcast(np.zeros((2, 3)), as_matrix([[1], [2]]))
    assert np.array_equal(out, [[1, 1, 1], [2, 2, 2]])
    with pytest.raises(DimensionError):
        add_col_broadcast(np.zeros((2, 3)), np.ones((3, 1)))


def test_ops_do_not_mutate():
    a = Rng(1).uniform(-1, 1, (3, 3))
    b = Rng(2).uniform(-1, 1, (3, 3))
    a0, b0 = a.copy(), b.copy()
    for op in (matmul, hadamard, add):
        op(a, b)
    add_col_broadcast(a, b[:, :1])
    assert np.array_equal(a, a0) and np.array_equal(b, b0)


def test_init_zeros_and_constant():
    assert np.array_equal(init_weights(2, 2, Rng(7), "zeros"), [[0, 0], [0, 0]])
    assert np.array_equal(init_weights(2, 1, scheme="constant", constant=-1.0), [[-1], [-1]])


def test_init_deterministic():
    a = init_weights(4, 6, Rng(5))
    b = init_weights(4, 6, Rng(5))
    assert np.array_equal(a, b)
    assert not np.array_equal(a, init_weights(4, 6, Rng(6)))


def test_init_uniform_bounds():
    w = init_weights(50, 50, Rng(9))
    s = np.sqrt(6 / 100)
    assert np.all(np.abs(w) < s)
    # the draw actually spans the interval
    assert w.max() > 0.9 * s and w.min() < -0.9 * s


def test_bad_dimensions():
    with pytest.raises(DimensionError):
        init_weights(0, 3, Rng(0))
    with pytest.raises(ValueError):
        init_weights(2, 2, Rng(0), "gaussian")
