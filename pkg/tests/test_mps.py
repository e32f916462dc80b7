import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spinmagic.exact import build_dense_hamiltonian, schmidt_probabilities
from spinmagic.models import ModelSpec, PauliTerm, build_mpo, ghz_mps
from spinmagic.mps import (
    MPO,
    MPS,
    PAULI,
    SchmidtSpectrum,
    apply_mpo,
    compress,
    expectation,
    mpo_from_terms,
)
from spinmagic.tensors import ContractViolation


def test_basis_and_product_states():
    psi = MPS.basis_state([1, 0]).to_statevector()
    assert np.allclose(psi, [0, 0, 1, 0])
    plus = MPS.product_state([np.ones(2)] * 3).to_statevector()
    assert np.allclose(plus, np.ones(8) / np.sqrt(8))


def test_schmidt_spectrum_examples():
    assert np.allclose(MPS.basis_state([0, 0, 0, 0]).schmidt_spectrum(2).probabilities, [1])
    assert np.allclose(ghz_mps(4).schmidt_spectrum(2).probabilities, [0.5, 0.5])
    with pytest.raises(ValueError):
        SchmidtSpectrum(np.array([0.5, 0.4]))
    sp = SchmidtSpectrum.from_singular_values(np.array([1.0, 3.0]))
    assert np.allclose(sp.probabilities, [0.9, 0.1])


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 8), st.integers(1, 8), st.integers(0, 10**6))
def test_statevector_round_trip(L, chi, seed):
    m = MPS.random(L, chi, seed=seed)
    psi = m.to_statevector()
    assert np.isclose(np.linalg.norm(psi), 1)
    back = MPS.from_statevector(psi)
    assert abs(abs(np.vdot(back.to_statevector(), psi)) - 1) < 1e-10
    for cut in range(1, L):
        p_mps = m.schmidt_spectrum(cut).probabilities
        p_dense = schmidt_probabilities(psi, cut)[: len(p_mps)]
        assert np.allclose(p_mps, p_dense, atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 7), st.integers(1, 6), st.integers(0, 10**6), st.data())
def test_canonical_forms(L, chi, seed, data):
    m = MPS.random(L, chi, seed=seed)
    c = data.draw(st.integers(0, L - 1))
    mc = m.canonicalize(c)
    assert all(mc.is_left_isometric(i) for i in range(c))
    assert all(mc.is_right_isometric(i) for i in range(c + 1, L))
    assert np.isclose(abs(mc.overlap(m)), 1, atol=1e-12)


def test_expectation_and_mpo():
    L = 5
    spec = ModelSpec("xy", L, {"J": 2.0, "gamma": 0.3, "h": 0.8})
    m = MPS.random(L, 4, seed=2)
    psi = m.to_statevector()
    H = build_dense_hamiltonian(spec)
    assert np.isclose(expectation(m, build_mpo(spec)), np.vdot(psi, H @ psi).real, atol=1e-12)
    ident = MPO.identity(L)
    assert np.isclose(expectation(m, ident), 1.0)


def test_expectation_rejects_non_hermitian():
    m = MPS.product_state([np.array([1, 1j])] * 2)
    op = MPO.product([np.array([[0, 1], [0, 0]])] * 2)
    with pytest.raises(ContractViolation):
        expectation(m, MPO.product([np.array([[0, 1], [0, 0]]), np.eye(2)]))
    assert op.L == 2


def test_mpo_from_terms_long_range():
    terms = [PauliTerm(0.5, ((0, "X"), (3, "Z"))), PauliTerm(-1.0, ((1, "Y"),))]
    H = mpo_from_terms(terms, 4).to_dense()
    X, Y, Z, I = (PAULI[k] for k in "XYZI")
    expected = 0.5 * np.kron(np.kron(X, I), np.kron(I, Z)) - np.kron(np.kron(I, Y), np.kron(I, I))
    assert np.allclose(H, expected)


def test_apply_mpo_and_compress():
    L = 6
    spec = ModelSpec("cluster_ising", L, {"g_zz": 1.0, "g_x": 0.7, "g_zxz": 0.2})
    m = MPS.random(L, 3, seed=5)
    out, disc = apply_mpo(build_mpo(spec), m)
    H = build_dense_hamiltonian(spec)
    assert disc < 1e-20
    assert np.allclose(out.to_statevector(), H @ m.to_statevector(), atol=1e-10)
    small, disc = compress(out, chi_max=2)
    assert small.max_bond <= 2 and disc > 0


def test_apply_local():
    m = MPS.basis_state([0, 0])
    out = m.apply_local(1, PAULI["X"])
    assert np.allclose(out.to_statevector(), [0, 1, 0, 0])


def test_save_load_round_trip(tmp_path):
    m = MPS.random(6, 5, seed=9)
    path = tmp_path / "state.mps"
    m.save(path)
    back = MPS.load(path)
    assert back.bond_dims == m.bond_dims
    for a, b in zip(m.tensors, back.tensors):
        assert np.array_equal(a, b)
    bad = tmp_path / "bad.mps"
    bad.write_bytes(b"NOPE" + path.read_bytes()[4:])
    with pytest.raises(ValueError):
        MPS.load(bad)


def test_invalid_construction():
    with pytest.raises(ContractViolation):
        MPS([np.ones((1, 2, 2)), np.ones((3, 2, 1))])
    with pytest.raises(ContractViolation):
        MPS([np.ones((2, 2, 1))])
