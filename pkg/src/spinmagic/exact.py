"""Exact statevector reference routines for small chains.

Bit convention: site 0 is the most significant bit of the basis index, and
``|0>`` is the ``Z = +1`` state. Pauli strings are encoded by an X mask and a
Z mask with ``Y = i X Z``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse
import scipy.sparse.linalg

from .models import ModelSpec, PauliTerm
from .mps import ResourceError
from .tensors import ContractViolation, eigh

MAX_DENSE_SITES = 14
DEGENERACY_TOL = 1e-10

LETTERS = "IXYZ"
# (x bit, z bit) per letter
_XZ = {"I": (0, 0), "X": (1, 0), "Y": (1, 1), "Z": (0, 1)}

HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
PHASE = np.diag([1, 1j]).astype(complex)
T_GATE = np.diag([1, np.exp(1j * np.pi / 4)]).astype(complex)
CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)


def word_masks(word: str) -> tuple[int, int, int]:
    """``(x_mask, z_mask, n_y)`` of a Pauli word, site 0 in the top bit."""
    L = len(word)
    x = z = ny = 0
    for site, p in enumerate(word.upper()):
        if p not in _XZ:
            raise ContractViolation(f"invalid Pauli letter {p!r}")
        xb, zb = _XZ[p]
        bit = 1 << (L - 1 - site)
        x |= bit * xb
        z |= bit * zb
        ny += xb & zb
    return x, z, ny


def _popcount_parity(a: np.ndarray) -> np.ndarray:
    a = a.copy()
    p = np.zeros_like(a)
    while np.any(a):
        p ^= a & 1
        a >>= 1
    return p


def _term_masks(term: PauliTerm, L: int) -> tuple[int, int, int]:
    return word_masks(term.word(L))


def build_dense_hamiltonian(spec: ModelSpec, sparse: bool = False):
    """Hamiltonian matrix of ``spec`` in the computational basis."""
    L = spec.L
    if L > MAX_DENSE_SITES:
        raise ResourceError(f"exact treatment limited to {MAX_DENSE_SITES} sites, got {L}")
    dim = 1 << L
    b = np.arange(dim, dtype=np.int64)
    rows, cols, vals = [], [], []
    for term in spec.terms():
        x, z, ny = _term_masks(term, L)
        sign = 1 - 2 * _popcount_parity(b & z)
        rows.append(b ^ x)
        cols.append(b)
        vals.append(term.coef * (1j**ny) * sign)
    if rows:
        H = scipy.sparse.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(dim, dim)
        ).tocsr()
    else:
        H = scipy.sparse.csr_matrix((dim, dim), dtype=complex)
    H.sum_duplicates()
    if np.all(np.abs(H.data.imag) < 1e-14):
        H = H.real.astype(float)
    return H if sparse else H.toarray()


@dataclass
class ExactGroundState:
    energy: float
    psi: np.ndarray
    gap: float
    degenerate: bool


def ground_state_exact(spec: ModelSpec, sparse: bool | None = None) -> ExactGroundState:
    """Lowest eigenpair and gap; ``degenerate`` is set when the gap is below 1e-10."""
    if sparse is None:
        sparse = spec.L > 12
    if not sparse:
        w, v = eigh(build_dense_hamiltonian(spec))
        e0, e1, psi = w[0], w[1], v[:, 0]
    else:
        H = build_dense_hamiltonian(spec, sparse=True)
        w, v = scipy.sparse.linalg.eigsh(H, k=2, which="SA", tol=1e-12)
        order = np.argsort(w)
        e0, e1, psi = w[order[0]], w[order[1]], v[:, order[0]]
    gap = float(e1 - e0)
    return ExactGroundState(float(e0), psi / np.linalg.norm(psi), gap, gap < DEGENERACY_TOL)


def num_sites(psi: np.ndarray) -> int:
    L = int(psi.size).bit_length() - 1
    if 1 << L != psi.size:
        raise ContractViolation("statevector length is not a power of two")
    return L


def reduced_density_matrix(psi: np.ndarray, region) -> np.ndarray:
    """Density matrix of ``region``, kept in site order.

    ``region`` is either an int (the leftmost ``region`` sites) or a collection
    of 0-based site indices. An empty region gives ``[[1]]`` and the full
    chain gives the projector onto ``psi``.
    """
    L = num_sites(psi)
    sites = list(range(region)) if np.isscalar(region) else sorted(int(s) for s in region)
    if len(set(sites)) != len(sites) or any(not 0 <= s < L for s in sites):
        raise IndexError(f"region {region!r} not a set of sites in 0..{L - 1}")
    psi = np.asarray(psi)
    psi = psi / np.linalg.norm(psi)
    rest = [s for s in range(L) if s not in sites]
    t = psi.reshape((2,) * L).transpose(sites + rest)
    m = t.reshape(1 << len(sites), -1)
    return m @ m.conj().T


def schmidt_probabilities(psi: np.ndarray, cut: int | None = None) -> np.ndarray:
    """Squared Schmidt coefficients across ``cut`` (default half chain), nonincreasing."""
    L = num_sites(psi)
    if cut is None:
        cut = L // 2
    s = np.linalg.svd(np.asarray(psi).reshape(1 << cut, -1), compute_uv=False)
    p = s**2
    return p / p.sum()


def pauli_expectation(psi: np.ndarray, word: str) -> float:
    L = num_sites(psi)
    if len(word) != L:
        raise ContractViolation(f"word of length {len(word)} on {L} sites")
    x, z, ny = word_masks(word)
    b = np.arange(1 << L)
    sign = 1 - 2 * _popcount_parity(b & z)
    val = (1j**ny) * np.vdot(psi[b ^ x], sign * psi) / np.vdot(psi, psi)
    return float(val.real)


def _fwht(a: np.ndarray) -> np.ndarray:
    """Unnormalized Walsh-Hadamard transform along the last axis (length 2**L)."""
    n = a.shape[-1]
    L = n.bit_length() - 1
    out = a.reshape(a.shape[:-1] + (2,) * L)
    for k in range(L):
        ax = out.ndim - L + k
        x0 = np.take(out, 0, axis=ax)
        x1 = np.take(out, 1, axis=ax)
        out = np.stack([x0 + x1, x0 - x1], axis=ax)
    return out.reshape(a.shape)


def _pauli_chunks(psi: np.ndarray, chunk: int = 64):
    """Yield ``(x_masks, values)`` where ``values[i, z] = <X^x Z^z>`` times ``i^{|x & z|}``."""
    psi = np.asarray(psi, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    L = num_sites(psi)
    dim = 1 << L
    b = np.arange(dim)
    z = np.arange(dim)
    ny_phase = 1j ** (np.array([bin(v).count("1") for v in range(dim)]) % 4)
    for start in range(0, dim, chunk):
        xs = np.arange(start, min(dim, start + chunk))
        f = psi[b[None, :] ^ xs[:, None]].conj() * psi[None, :]
        vals = _fwht(f)
        ny = np.bitwise_and(xs[:, None], z[None, :])
        phase = ny_phase[ny]
        yield xs, (vals * phase).real


def pauli_spectrum(psi: np.ndarray) -> np.ndarray:
    """All ``4**L`` expectation values ``<P>``.

    Entry order is base 4 over sites with site 0 the most significant digit
    and letter digits ``I=0, X=1, Y=2, Z=3``.
    """
    L = num_sites(psi)
    if L > 10:
        raise ResourceError("full Pauli spectrum limited to 10 sites; use sre_exact")
    dim = 1 << L
    out = np.empty(dim * dim)
    # base-4 index for every (x, z) pair
    x_all = np.arange(dim)[:, None]
    z_all = np.arange(dim)[None, :]
    idx = np.zeros((dim, dim), dtype=np.int64)
    for site in range(L):
        bit = L - 1 - site
        xb = (x_all >> bit) & 1
        zb = (z_all >> bit) & 1
        d = np.where(xb == 1, np.where(zb == 1, 2, 1), np.where(zb == 1, 3, 0))
        idx += d * 4**bit
    for xs, vals in _pauli_chunks(psi):
        out[idx[xs].ravel()] = vals.ravel()
    return out


def stabilizer_renyi_entropy(xi: np.ndarray, alpha: float, d: int) -> float:
    """``M_alpha`` from a Pauli distribution ``xi`` (summing to one) over ``d``-dimensional space."""
    xi = np.asarray(xi, dtype=float)
    if alpha == 1:
        nz = xi[xi > 0]
        return float(-np.sum(nz * np.log(nz)) - np.log(d))
    return float(np.log(np.sum(xi[xi > 0] ** alpha)) / (1 - alpha) - np.log(d))


def sre_exact(psi: np.ndarray, alpha: float = 2.0) -> float:
    """Stabilizer Renyi entropy ``M_alpha`` (natural log) of a statevector."""
    if alpha < 0:
        raise ContractViolation("alpha must be nonnegative")
    L = num_sites(psi)
    if L > MAX_DENSE_SITES:
        raise ResourceError(f"exact SRE limited to {MAX_DENSE_SITES} sites")
    d = float(1 << L)
    acc = 0.0
    for _, vals in _pauli_chunks(psi):
        xi = vals**2 / d
        xi = xi[xi > 1e-300]
        if alpha == 1:
            acc += float(-np.sum(xi * np.log(xi)))
        else:
            acc += float(np.sum(xi**alpha))
    if alpha == 1:
        return acc - np.log(d)
    return float(np.log(acc) / (1 - alpha) - np.log(d))


def linear_sre_exact(psi: np.ndarray) -> float:
    """``1 - d * sum(xi**2)``."""
    L = num_sites(psi)
    d = float(1 << L)
    acc = 0.0
    for _, vals in _pauli_chunks(psi):
        acc += float(np.sum((vals**2 / d) ** 2))
    return 1.0 - d * acc


def apply_gate(psi: np.ndarray, gate: np.ndarray, sites) -> np.ndarray:
    """Apply a ``k``-qubit gate to ``sites`` (gate row index: first listed site most significant)."""
    L = num_sites(psi)
    sites = [int(s) for s in np.atleast_1d(sites)]
    k = len(sites)
    if len(set(sites)) != k or any(not 0 <= s < L for s in sites):
        raise ContractViolation(f"sites {sites} not distinct sites in 0..{L - 1}")
    gate = np.asarray(gate)
    if gate.shape != (1 << k, 1 << k):
        raise ContractViolation(f"gate shape {gate.shape} does not act on {k} qubits")
    if not np.allclose(gate.conj().T @ gate, np.eye(1 << k), atol=1e-10, rtol=0):
        raise ContractViolation("gate is not unitary")
    g = gate.reshape((2,) * (2 * k))
    t = np.asarray(psi).reshape((2,) * L)
    t = np.tensordot(g, t, axes=(list(range(k, 2 * k)), sites))
    t = np.moveaxis(t, list(range(k)), sites)
    return t.reshape(-1)


def product_statevector(vectors) -> np.ndarray:
    out = np.ones(1, dtype=complex)
    for v in vectors:
        v = np.asarray(v, dtype=complex)
        out = np.kron(out, v / np.linalg.norm(v))
    return out
