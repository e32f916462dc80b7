import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spinmagic.clifford import random_two_qubit_clifford
from spinmagic.exact import (
    CNOT,
    HADAMARD,
    PHASE,
    apply_gate,
    build_dense_hamiltonian,
    ground_state_exact,
    linear_sre_exact,
    pauli_expectation,
    pauli_spectrum,
    product_statevector,
    reduced_density_matrix,
    sre_exact,
)
from spinmagic.models import ModelSpec
from spinmagic.mps import ResourceError
from spinmagic.tensors import ContractViolation

T_VEC = np.array([math.cos(math.pi / 8), math.sin(math.pi / 8)])


def random_state(L, seed):
    r = np.random.default_rng(seed)
    v = r.normal(size=1 << L) + 1j * r.normal(size=1 << L)
    return v / np.linalg.norm(v)


def test_tfim_two_site_ground_energy():
    # H = 1/2 XX - ZI - IZ; ground energy -sqrt(4 + 1/4)
    gs = ground_state_exact(ModelSpec("xy", 2, {"J": 1, "gamma": 1, "h": 1}))
    assert math.isclose(gs.energy, -math.sqrt(4.25), rel_tol=1e-12)
    assert not gs.degenerate


def test_ground_state_degeneracy_flag():
    gs = ground_state_exact(ModelSpec("xy", 4, {"J": 1, "gamma": 1, "h": 0}))
    assert gs.degenerate


def test_sparse_matches_dense():
    spec = ModelSpec("cluster_ising", 8, {"g_zz": 1, "g_x": 0.6, "g_zxz": 0.2}, periodic=True)
    assert np.allclose(build_dense_hamiltonian(spec, sparse=True).toarray(), build_dense_hamiltonian(spec))
    assert math.isclose(
        ground_state_exact(spec, sparse=True).energy, ground_state_exact(spec, sparse=False).energy,
        rel_tol=1e-10,
    )


def test_reduced_density_matrix_examples():
    u = 0.3
    psi = np.array([math.sqrt(u), 0, 0, math.sqrt(1 - u)])
    assert np.allclose(reduced_density_matrix(psi, [0]), np.diag([u, 1 - u]))
    assert np.allclose(reduced_density_matrix(np.array([1.0, 0, 0, 0]), 1), np.diag([1, 0]))
    epr = np.array([1, 0, 0, 1]) / math.sqrt(2)
    assert np.allclose(reduced_density_matrix(epr, [1]), np.eye(2) / 2)
    assert np.allclose(reduced_density_matrix(epr, []), [[1]])
    assert np.allclose(reduced_density_matrix(epr, [0, 1]), np.outer(epr, epr))


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 8), st.integers(0, 10**6), st.data())
def test_schmidt_symmetry(L, seed, data):
    psi = random_state(L, seed)
    region = data.draw(st.lists(st.integers(0, L - 1), unique=True))
    rest = [s for s in range(L) if s not in region]
    rho_a = reduced_density_matrix(psi, region)
    rho_b = reduced_density_matrix(psi, rest)
    assert math.isclose(np.trace(rho_a).real, 1, abs_tol=1e-10)
    wa = np.sort(np.linalg.eigvalsh(rho_a))[::-1]
    wb = np.sort(np.linalg.eigvalsh(rho_b))[::-1]
    k = min(len(wa), len(wb))
    assert wa.min() > -1e-12
    assert np.allclose(wa[:k], wb[:k], atol=1e-10)


def test_pauli_expectation_examples():
    assert pauli_expectation(np.array([1.0, 0]), "Z") == 1
    plus = np.ones(2) / math.sqrt(2)
    assert math.isclose(pauli_expectation(plus, "X"), 1)
    bell = np.array([1, 0, 0, 1]) / math.sqrt(2)
    assert math.isclose(pauli_expectation(bell, "YY"), -1)
    with pytest.raises(ContractViolation):
        pauli_expectation(bell, "X")


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 6), st.integers(0, 10**6))
def test_pauli_spectrum_normalization_and_order(L, seed):
    psi = random_state(L, seed)
    spec = pauli_spectrum(psi)
    assert math.isclose(np.sum(spec**2) / 2**L, 1, abs_tol=1e-10)
    assert math.isclose(spec[0], 1, abs_tol=1e-12)
    r = np.random.default_rng(seed)
    for _ in range(5):
        k = int(r.integers(4**L))
        word = "".join("IXYZ"[(k // 4 ** (L - 1 - s)) % 4] for s in range(L))
        assert math.isclose(spec[k], pauli_expectation(psi, word), abs_tol=1e-12)


def test_sre_examples():
    assert abs(sre_exact(np.array([1.0, 0, 0, 0]), 2)) < 1e-12
    bell = np.array([1, 0, 0, 1]) / math.sqrt(2)
    assert abs(sre_exact(bell, 2)) < 1e-12
    assert math.isclose(sre_exact(T_VEC, 2), math.log(4 / 3), rel_tol=1e-12)
    assert math.isclose(sre_exact(np.kron(T_VEC, T_VEC), 2), 2 * math.log(4 / 3), rel_tol=1e-12)
    assert math.isclose(linear_sre_exact(T_VEC), 0.25, rel_tol=1e-12)


def test_sre_alpha_one_matches_limit():
    psi = random_state(4, 3)
    near = sre_exact(psi, 1 + 1e-6)
    assert math.isclose(sre_exact(psi, 1), near, abs_tol=1e-5)


def test_sre_resource_limits():
    with pytest.raises(ResourceError):
        pauli_spectrum(np.ones(1 << 11) / 2**5.5)
    with pytest.raises(ContractViolation):
        sre_exact(T_VEC, -1)


def test_apply_gate_examples():
    out = apply_gate(np.array([1.0, 0]), HADAMARD, 0)
    assert np.allclose(out, np.ones(2) / math.sqrt(2))
    out = apply_gate(np.array([0, 0, 1.0, 0]), CNOT, [0, 1])
    assert np.allclose(out, [0, 0, 0, 1])
    out = apply_gate(np.ones(2) / math.sqrt(2), PHASE, [0])
    assert np.allclose(out, np.array([1, 1j]) / math.sqrt(2))
    with pytest.raises(ContractViolation):
        apply_gate(np.array([1.0, 0]), np.array([[1, 1], [0, 1]]), 0)
    with pytest.raises(ContractViolation):
        apply_gate(np.ones(4) / 2, CNOT, [1, 1])


@settings(max_examples=10, deadline=None)
@given(st.integers(2, 8), st.integers(0, 10**6))
def test_sre_clifford_invariance(L, seed):
    r = np.random.default_rng(seed)
    psi = random_state(L, seed)
    m2 = sre_exact(psi, 2)
    phi = psi
    for _ in range(20):
        i = int(r.integers(L - 1))
        phi = apply_gate(phi, random_two_qubit_clifford(r), [i, i + 1])
    assert math.isclose(np.linalg.norm(phi), 1, abs_tol=1e-10)
    assert abs(sre_exact(phi, 2) - m2) < 1e-9


@settings(max_examples=10, deadline=None)
@given(st.integers(1, 4), st.integers(1, 4), st.integers(0, 10**6), st.sampled_from([1.0, 2.0, 3.0, 0.5]))
def test_sre_additivity(la, lb, seed, alpha):
    a, b = random_state(la, seed), random_state(lb, seed + 1)
    total = sre_exact(np.kron(a, b), alpha)
    assert abs(total - sre_exact(a, alpha) - sre_exact(b, alpha)) < 1e-9


def test_product_statevector_normalizes():
    v = product_statevector([np.array([3.0, 4.0]), np.array([1.0, 0])])
    assert np.allclose(v, [0.6, 0, 0.8, 0])
