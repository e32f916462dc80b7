import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spinmagic.tensors import (
    ContractViolation,
    DimensionError,
    contract,
    eigh,
    svd_truncated,
)


def naive_contract(a, b, pairs):
    free_a = [i for i in range(a.ndim) if i not in [p[0] for p in pairs]]
    free_b = [i for i in range(b.ndim) if i not in [p[1] for p in pairs]]
    out = np.zeros([a.shape[i] for i in free_a] + [b.shape[i] for i in free_b], dtype=complex)
    summed = [a.shape[p[0]] for p in pairs]
    for idx in np.ndindex(*out.shape):
        ia, ib = idx[: len(free_a)], idx[len(free_a):]
        tot = 0
        for s in np.ndindex(*summed):
            ka = [0] * a.ndim
            kb = [0] * b.ndim
            for ax, v in zip(free_a, ia):
                ka[ax] = v
            for ax, v in zip(free_b, ib):
                kb[ax] = v
            for (pa, pb), v in zip(pairs, s):
                ka[pa] = v
                kb[pb] = v
            tot += a[tuple(ka)] * b[tuple(kb)]
        out[idx] = tot
    return out


def test_contract_identity_and_matmul(rng):
    v = rng.normal(size=3)
    assert np.allclose(contract(np.eye(3), v, [(1, 0)]), v)
    a, b = rng.normal(size=(2, 3)), rng.normal(size=(3, 2))
    assert np.allclose(contract(a, b, [(1, 0)]), a @ b)
    assert np.isclose(contract(a, a.conj(), [(0, 0), (1, 1)]), np.sum(np.abs(a) ** 2))


def test_contract_extent_mismatch():
    with pytest.raises(DimensionError):
        contract(np.ones((2, 3)), np.ones((2, 3)), [(1, 0)])


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 3), st.integers(1, 3), st.integers(1, 3), st.integers(1, 3), st.integers(0, 10**6))
def test_contract_matches_naive_loop(d1, d2, d3, d4, seed):
    r = np.random.default_rng(seed)
    a = r.normal(size=(d1, d2, d3)) + 1j * r.normal(size=(d1, d2, d3))
    b = r.normal(size=(d3, d4, d2)) + 1j * r.normal(size=(d3, d4, d2))
    pairs = [(2, 0), (1, 2)]
    got = contract(a, b, pairs)
    assert np.allclose(got, naive_contract(a, b, pairs), rtol=1e-12, atol=1e-12)


def test_svd_examples():
    res = svd_truncated(np.diag([3.0, 2.0, 1.0]), chi_max=2)
    assert np.allclose(res.s, [3, 2])
    assert np.isclose(res.discarded_weight, 1 / 14)
    res = svd_truncated(np.eye(4), chi_max=4)
    assert np.allclose(res.s, 1) and res.discarded_weight == 0
    u, v = np.array([1.0, 2.0]), np.array([3.0, 0.0, 4.0])
    res = svd_truncated(np.outer(u, v))
    assert len(res.s) == 1 and np.isclose(res.s[0], np.linalg.norm(u) * np.linalg.norm(v))


def test_svd_floor_and_cutoff():
    res = svd_truncated(np.diag([1.0, 1e-3, 1e-15]))
    assert len(res.s) == 2
    res = svd_truncated(np.diag([1.0, 1e-3, 1e-6]), cutoff=1e-4)
    assert len(res.s) == 2


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 12), st.integers(1, 12), st.integers(0, 10**6))
def test_svd_reconstruction(m, n, seed):
    r = np.random.default_rng(seed)
    a = r.normal(size=(m, n)) + 1j * r.normal(size=(m, n))
    res = svd_truncated(a)
    assert np.linalg.norm(res.U @ np.diag(res.s) @ res.Vh - a) <= 1e-10 * np.linalg.norm(a)
    assert np.allclose(res.U.conj().T @ res.U, np.eye(len(res.s)))
    assert np.all(np.diff(res.s) <= 0)


def test_eigh_examples():
    w, _ = eigh(np.diag([0.25, 0.75]))
    assert np.allclose(w, [0.25, 0.75])
    w, v = eigh(np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert np.allclose(w, [-1, 1])
    assert np.isclose(abs(v[:, 0] @ np.array([1, -1]) / np.sqrt(2)), 1)
    w, _ = eigh(np.zeros((2, 2)))
    assert np.allclose(w, 0)


def test_eigh_rejects_non_hermitian():
    with pytest.raises(ContractViolation):
        eigh(np.array([[0.0, 1.0], [0.0, 0.0]]))


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 16), st.integers(0, 10**6))
def test_eigh_reconstruction(n, seed):
    r = np.random.default_rng(seed)
    a = r.normal(size=(n, n)) + 1j * r.normal(size=(n, n))
    h = a + a.conj().T
    w, v = eigh(h)
    assert np.linalg.norm(v @ np.diag(w) @ v.conj().T - h) <= 1e-10 * max(np.linalg.norm(h), 1)
