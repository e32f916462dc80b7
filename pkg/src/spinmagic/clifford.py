"""Random two-qubit Clifford circuits on statevectors and the Clifford-orbit protocol."""

from __future__ import annotations

import functools
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .entspec import PROB_FLOOR
from .exact import CNOT, HADAMARD, PHASE, linear_sre_exact, sre_exact
from .mps import PAULI, ResourceError
from .tensors import ContractViolation

TWO_QUBIT_CLIFFORD_ORDER = 11520
MAX_ORBIT_SITES = 12


def _phase_key(u: np.ndarray) -> bytes:
    flat = u.ravel()
    k = int(np.argmax(np.abs(flat) > 1e-9))
    v = flat * (abs(flat[k]) / flat[k])
    v = np.round(v, 8) + 0.0  # drops negative zeros
    return v.tobytes()


@functools.lru_cache(maxsize=1)
def two_qubit_cliffords() -> np.ndarray:
    """All two-qubit Clifford unitaries modulo global phase, shape ``(11520, 4, 4)``.

    Generated by breadth-first closure of ``{H x I, I x H, S x I, I x S, CNOT}``.
    """
    eye = np.eye(2, dtype=complex)
    gens = [
        np.kron(HADAMARD, eye),
        np.kron(eye, HADAMARD),
        np.kron(PHASE, eye),
        np.kron(eye, PHASE),
        CNOT,
    ]
    start = np.eye(4, dtype=complex)
    seen = {_phase_key(start)}
    out = [start]
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for g in gens:
            v = g @ u
            key = _phase_key(v)
            if key not in seen:
                seen.add(key)
                out.append(v)
                queue.append(v)
    group = np.array(out)
    if len(group) != TWO_QUBIT_CLIFFORD_ORDER:
        raise RuntimeError(f"Clifford enumeration produced {len(group)} elements")
    return group


def random_two_qubit_clifford(rng: np.random.Generator) -> np.ndarray:
    """Uniformly random element of the two-qubit Clifford group."""
    group = two_qubit_cliffords()
    return group[rng.integers(len(group))]


def _apply_pair(states: np.ndarray, gates: np.ndarray, i: int, L: int) -> np.ndarray:
    """Apply ``gates[r]`` to sites ``(i, i + 1)`` of ``states[r]``."""
    R = states.shape[0]
    t = states.reshape(R, 1 << i, 4, 1 << (L - i - 2))
    return np.einsum("rab,rxbz->rxaz", gates, t).reshape(R, -1)


def _pairs(L: int, parity: int) -> list[int]:
    return list(range(parity % 2, L - 1, 2))


def apply_clifford_layer(state: np.ndarray, parity: int, rng: np.random.Generator) -> np.ndarray:
    """One brickwork layer of independent random two-qubit Cliffords.

    ``parity`` 0 acts on pairs ``(0, 1), (2, 3), ...`` and 1 on ``(1, 2), ...``.
    ``state`` may be a single statevector or a batch of shape ``(R, 2**L)``.
    """
    single = state.ndim == 1
    states = np.atleast_2d(np.asarray(state, dtype=complex))
    L = int(states.shape[1]).bit_length() - 1
    if L < 2:
        raise ContractViolation("a Clifford layer needs at least two qubits")
    group = two_qubit_cliffords()
    for i in _pairs(L, parity):
        idx = rng.integers(len(group), size=states.shape[0])
        states = _apply_pair(states, group[idx], i, L)
    return states[0] if single else states


def _spectral_batch(states: np.ndarray, cut: int) -> dict[str, np.ndarray]:
    R = states.shape[0]
    s = np.linalg.svd(states.reshape(R, 1 << cut, -1), compute_uv=False)
    p = s**2
    p /= p.sum(axis=1, keepdims=True)
    p2 = np.sum(p**2, axis=1)
    p3 = np.sum(p**3, axis=1)
    mask = p > PROB_FLOOR
    lp = np.where(mask, np.log(np.where(mask, p, 1.0)), 0.0)
    mean = np.sum(p * lp, axis=1)
    ce = np.sum(np.where(mask, p * (lp - mean[:, None]) ** 2, 0.0), axis=1)
    return {"F": p3 - p2**2, "logLambda": np.log(p3) - 2 * np.log(p2), "CE": ce}


@dataclass
class OrbitResult:
    theta: float
    L: int
    n_layers: int
    n_realizations: int
    mean_F: float
    mean_logLambda: float
    mean_CE: float
    max_logLambda: float
    max_CE: float
    log_mean_Lambda: float
    m2_initial: float
    m_lin_initial: float
    drift_F: float
    F_trace: np.ndarray = field(repr=False, default=None)


def run_orbit(
    theta: float,
    L: int = 8,
    n_layers: int = 200,
    n_realizations: int = 200,
    seed: int = 0,
    burn_in: int | None = None,
    cut: int | None = None,
) -> OrbitResult:
    """Evolve the ``theta`` product state through random brickwork Clifford layers.

    Half-chain ``F``, ``log Lambda`` and ``C_E`` are recorded after every
    layer. Means average over realizations and over layers after ``burn_in``
    (default: the first quarter). ``max_*`` take each realization's maximum
    over time and then average over realizations. ``drift_F`` compares the
    realization-mean ``F`` over the last quarter of layers with the full
    post-burn-in mean.
    """
    if L > MAX_ORBIT_SITES:
        raise ResourceError(f"orbit protocol limited to {MAX_ORBIT_SITES} sites")
    if L < 2:
        raise ContractViolation("orbit protocol needs L >= 2")
    if cut is None:
        cut = L // 2
    if burn_in is None:
        burn_in = n_layers // 4
    v = np.array([1.0, np.exp(1j * theta)]) / np.sqrt(2)
    psi0 = v
    for _ in range(L - 1):
        psi0 = np.kron(psi0, v)
    group = two_qubit_cliffords()
    rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n_realizations)]
    n_even, n_odd = len(_pairs(L, 0)), len(_pairs(L, 1))
    draws = np.stack([r.integers(len(group), size=(n_layers, max(n_even, n_odd))) for r in rngs])

    states = np.tile(psi0, (n_realizations, 1))
    rec = {k: np.empty((n_layers, n_realizations)) for k in ("F", "logLambda", "CE")}
    for layer in range(n_layers):
        parity = layer % 2
        for k, i in enumerate(_pairs(L, parity)):
            states = _apply_pair(states, group[draws[:, layer, k]], i, L)
        spec = _spectral_batch(states, cut)
        for key in rec:
            rec[key][layer] = spec[key]

    tail = slice(burn_in, None)
    F_t = rec["F"].mean(axis=1)
    mean_F = float(F_t[tail].mean())
    last = F_t[n_layers - max(1, n_layers // 4):].mean()
    drift = float(abs(last - mean_F) / mean_F) if mean_F > 0 else 0.0
    lam_t = np.exp(rec["logLambda"])
    return OrbitResult(
        theta=float(theta),
        L=L,
        n_layers=n_layers,
        n_realizations=n_realizations,
        mean_F=mean_F,
        mean_logLambda=float(rec["logLambda"][tail].mean()),
        mean_CE=float(rec["CE"][tail].mean()),
        max_logLambda=float(rec["logLambda"].max(axis=0).mean()),
        max_CE=float(rec["CE"].max(axis=0).mean()),
        log_mean_Lambda=float(np.log(lam_t[tail].mean())),
        m2_initial=sre_exact(psi0, 2),
        m_lin_initial=linear_sre_exact(psi0),
        drift_F=drift,
        F_trace=F_t,
    )


def is_clifford(u: np.ndarray, tol: float = 1e-10) -> bool:
    """True when ``u`` maps every two-qubit Pauli to a signed Pauli under conjugation."""
    paulis = [np.kron(PAULI[a], PAULI[b]) for a in "IXYZ" for b in "IXYZ"]
    if not np.allclose(u.conj().T @ u, np.eye(4), atol=tol):
        return False
    for p in paulis[1:]:
        q = u @ p @ u.conj().T
        coeffs = np.array([np.trace(r.conj().T @ q) / 4 for r in paulis])
        mags = np.abs(coeffs)
        if np.sum(mags > tol) != 1 or abs(mags.max() - 1) > tol:
            return False
        if abs(coeffs[np.argmax(mags)].imag) > tol:
            return False
    return True
