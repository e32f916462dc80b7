"""Two-site DMRG ground-state search for an MPO Hamiltonian."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from .mps import MPO, MPS, expectation
from .tensors import ContractViolation, eigh, svd_truncated

log = logging.getLogger(__name__)

GAP_FLAG_TOL = 1e-8
# local problems up to this size are diagonalized densely
DENSE_LOCAL_DIM = 200


@dataclass
class DMRGResult:
    energy: float
    state: MPS
    converged: bool
    sweeps: int
    energies: list = field(default_factory=list)
    max_discarded: float = 0.0
    gap: float = float("nan")
    gap_flag: bool = False

    @property
    def monotone(self) -> bool:
        e = np.asarray(self.energies)
        return bool(np.all(np.diff(e) <= 1e-10 * max(1.0, np.max(np.abs(e)))))


def _left_env(E: np.ndarray, A: np.ndarray, W: np.ndarray) -> np.ndarray:
    # E (a*, w, a) -> (b*, w', b)
    t = np.tensordot(E, A, axes=(2, 0))  # (a*, w, s, b)
    t = np.tensordot(t, W, axes=([1, 2], [0, 2]))  # (a*, b, s', w')
    t = np.tensordot(A.conj(), t, axes=([0, 1], [0, 2]))  # (b*, b, w')
    return t.transpose(0, 2, 1)


def _right_env(F: np.ndarray, B: np.ndarray, W: np.ndarray) -> np.ndarray:
    # F (b*, w, b) -> (a*, w', a)
    t = np.tensordot(B, F, axes=(2, 2))  # (a, s, b*, w)
    t = np.tensordot(t, W, axes=([1, 3], [2, 3]))  # (a, b*, w', s')
    t = np.tensordot(B.conj(), t, axes=([1, 2], [3, 1]))  # (a*, a, w')
    return t.transpose(0, 2, 1)


def _two_site_matvec(Lenv, W1, W2, Renv, theta):
    t = np.tensordot(Lenv, theta, axes=(2, 0))  # (a*, w, s1, s2, b)
    t = np.tensordot(t, W1, axes=([1, 2], [0, 2]))  # (a*, s2, b, s1', w1)
    t = np.tensordot(t, W2, axes=([4, 1], [0, 2]))  # (a*, b, s1', s2', w2)
    t = np.tensordot(t, Renv, axes=([1, 4], [2, 1]))  # (a*, s1', s2', b*)
    return t


def _local_ground(Lenv, W1, W2, Renv, theta, k: int = 1, tol: float = 1e-13, penalty=()):
    """Lowest ``k`` eigenpairs of the two-site effective Hamiltonian.

    ``penalty`` holds ``(weight, v)`` pairs that add ``weight * |v><v|``.
    """
    shape = theta.shape
    n = theta.size
    dtype = np.result_type(Lenv, W1, W2, Renv, theta, *[v for _, v in penalty])

    def mv(x):
        y = _two_site_matvec(Lenv, W1, W2, Renv, x.reshape(shape)).ravel()
        for w, v in penalty:
            y = y + w * v * np.vdot(v, x)
        return y

    if n <= DENSE_LOCAL_DIM:
        H = np.column_stack([mv(col) for col in np.eye(n, dtype=dtype)])
        H = 0.5 * (H + H.conj().T)
        w, v = eigh(H)
        return w[:k], v[:, :k]
    op = spla.LinearOperator((n, n), matvec=mv, dtype=dtype)
    v0 = theta.ravel().astype(dtype)
    try:
        w, v = spla.eigsh(op, k=k, which="SA", v0=v0, tol=tol, ncv=max(2 * k + 1, 20))
    except spla.ArpackNoConvergence as exc:
        if len(exc.eigenvalues) < k:
            raise
        w, v = exc.eigenvalues, exc.eigenvectors
    order = np.argsort(w)
    return w[order], v[:, order]


def chi_schedule(chi_max: int, chi_start: int = 16) -> list[int]:
    out = []
    chi = min(chi_start, chi_max)
    while chi < chi_max:
        out.append(chi)
        chi *= 2
    out.append(chi_max)
    return out


def _overlap_left(O, A, T):
    # O (a*, a') -> (b*, b') with conj(A) on the bra side and T on the ket side
    t = np.tensordot(O, T, axes=(1, 0))  # (a*, s, b')
    return np.tensordot(A.conj(), t, axes=([0, 1], [0, 1]))


def _overlap_right(O, A, T):
    t = np.tensordot(T, O, axes=(2, 1))  # (a', s, b*)
    return np.tensordot(A.conj(), t, axes=([1, 2], [1, 2]))


def _sweeps(Ws, A, schedule, energy_tol, max_sweeps, cutoff, targets=(), weight=0.0):
    """Two-site sweeps on tensors ``A`` (right-canonical, modified in place).

    ``targets`` are MPS tensor lists penalized by ``weight * |t><t|``.
    Returns ``(energies, converged, sweeps, max_discarded)``.
    """
    L = len(A)
    dtype = A[0].dtype
    chi_max = schedule[-1]
    Lenvs: list = [None] * (L + 1)
    Renvs: list = [None] * (L + 1)
    Lenvs[0] = np.ones((1, 1, 1), dtype=dtype)
    Renvs[L] = np.ones((1, 1, 1), dtype=dtype)
    for i in range(L - 1, 0, -1):
        Renvs[i] = _right_env(Renvs[i + 1], A[i], Ws[i])
    LO = [[None] * (L + 1) for _ in targets]
    RO = [[None] * (L + 1) for _ in targets]
    for k, T in enumerate(targets):
        LO[k][0] = np.ones((1, 1), dtype=dtype)
        RO[k][L] = np.ones((1, 1), dtype=dtype)
        for i in range(L - 1, 0, -1):
            RO[k][i] = _overlap_right(RO[k][i + 1], A[i], T[i])

    def penalty(i):
        out = []
        for k, T in enumerate(targets):
            v = np.tensordot(LO[k][i], T[i], axes=(1, 0))
            v = np.tensordot(v, T[i + 1], axes=(2, 0))
            v = np.tensordot(v, RO[k][i + 2], axes=(3, 1))
            out.append((weight, v.ravel()))
        return out

    energies: list[float] = []
    converged = False
    max_disc = 0.0
    sweep = 0
    for sweep in range(1, max_sweeps + 1):
        chi = schedule[min(sweep - 1, len(schedule) - 1)]
        disc = 0.0
        for i in range(L - 1):
            theta = np.tensordot(A[i], A[i + 1], axes=(2, 0))
            _, v = _local_ground(Lenvs[i], Ws[i], Ws[i + 1], Renvs[i + 2], theta, penalty=penalty(i))
            theta = v[:, 0].reshape(theta.shape)
            al, d1, d2, ar = theta.shape
            res = svd_truncated(theta.reshape(al * d1, d2 * ar), chi, cutoff)
            disc = max(disc, res.discarded_weight)
            A[i] = res.U.reshape(al, d1, -1)
            sv = res.s / np.linalg.norm(res.s)
            A[i + 1] = (sv[:, None] * res.Vh).reshape(-1, d2, ar)
            Lenvs[i + 1] = _left_env(Lenvs[i], A[i], Ws[i])
            for k, T in enumerate(targets):
                LO[k][i + 1] = _overlap_left(LO[k][i], A[i], T[i])
        for i in range(L - 2, -1, -1):
            theta = np.tensordot(A[i], A[i + 1], axes=(2, 0))
            w, v = _local_ground(Lenvs[i], Ws[i], Ws[i + 1], Renvs[i + 2], theta, penalty=penalty(i))
            theta = v[:, 0].reshape(theta.shape)
            al, d1, d2, ar = theta.shape
            res = svd_truncated(theta.reshape(al * d1, d2 * ar), chi, cutoff)
            disc = max(disc, res.discarded_weight)
            A[i + 1] = res.Vh.reshape(-1, d2, ar)
            sv = res.s / np.linalg.norm(res.s)
            A[i] = (res.U * sv[None, :]).reshape(al, d1, -1)
            Renvs[i + 1] = _right_env(Renvs[i + 2], A[i + 1], Ws[i + 1])
            for k, T in enumerate(targets):
                RO[k][i + 1] = _overlap_right(RO[k][i + 2], A[i + 1], T[i + 1])
        max_disc = max(max_disc, disc)
        # the last local eigenvalue includes any penalty term
        e = float(w[0])
        energies.append(e)
        log.debug("sweep %d chi %d energy %.14f discarded %.2e", sweep, chi, e, disc)
        if len(energies) >= 2 and energies[-1] > energies[-2] + 1e-10 * max(1.0, abs(e)):
            log.warning("DMRG energy rose between sweeps: %.3e", energies[-1] - energies[-2])
        if chi == chi_max and len(energies) >= 2 and abs(energies[-1] - energies[-2]) < energy_tol:
            converged = True
            break
    return energies, converged, sweep, max_disc


def _initial_tensors(L, d, chi, seed, real, initial=None):
    if initial is None:
        psi = MPS.random(L, chi, d=d, seed=seed, real=real)
    else:
        psi = initial.canonicalize(0)
    return [t.real.copy() if real else t.astype(complex) for t in psi.tensors]


def dmrg_ground_state(
    h: MPO,
    chi_max: int = 64,
    energy_tol: float = 1e-10,
    max_sweeps: int = 30,
    seed: int = 0,
    cutoff: float = 1e-12,
    chi_start: int = 16,
    initial: MPS | None = None,
    gap_chi: int | None = 16,
) -> DMRGResult:
    """Two-site DMRG.

    The bond dimension doubles each sweep from ``chi_start`` up to ``chi_max``.
    Convergence means the sweep energy changed by less than ``energy_tol``
    once ``chi_max`` is reached. The returned state is normalized and
    canonical at site 0.

    The gap comes from a second run at bond dimension ``gap_chi`` (capped by
    ``chi_max``) that penalizes overlap with the ground state. ``gap_chi=None``
    skips it and leaves ``gap`` as NaN.
    """
    if chi_max < 2:
        raise ContractViolation("chi_max must be at least 2")
    L = h.L
    if L < 2:
        raise ContractViolation("DMRG needs at least two sites")
    real = h.is_real()
    d = h.tensors[0].shape[1]
    Ws = [W.real.copy() if real else W.astype(complex) for W in h.tensors]
    schedule = chi_schedule(chi_max, chi_start)

    A = _initial_tensors(L, d, min(schedule[0], 8), seed, real, initial)
    energies, converged, sweep, max_disc = _sweeps(Ws, A, schedule, energy_tol, max_sweeps, cutoff)
    state = MPS([t.astype(complex) for t in A], center=0)
    energy = expectation(state, h)

    gap = float("nan")
    if gap_chi is not None:
        gchi = min(gap_chi, chi_max)
        B = _initial_tensors(L, d, min(gchi, 8), seed + 1, real)
        weight = 1.0 + abs(energy)
        _sweeps(Ws, B, chi_schedule(gchi, gchi), energy_tol, max_sweeps, cutoff, [A], weight)
        excited = MPS([t.astype(complex) for t in B], center=0)
        gap = max(0.0, expectation(excited, h) - energy)
    return DMRGResult(
        energy=energy,
        state=state,
        converged=converged,
        sweeps=sweep,
        energies=energies,
        max_discarded=max_disc,
        gap=gap,
        gap_flag=bool(gap < GAP_FLAG_TOL),
    )
