"""Stabilizer Renyi entropies of matrix product states.

Two estimators are provided:

* perfect Pauli sampling, which draws Pauli strings ``P`` with probability
  ``Xi_P = <P>**2 / 2**N`` one site at a time from the right-normalized MPS;
* the replica method, which builds the Pauli-basis MPS ``|P(psi)>`` with
  amplitudes ``<P>/sqrt(2**N)`` and contracts powers of the diagonal
  operator ``W`` against it.

Logarithms are natural throughout.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .models import cgs_angle
from .mps import MPS, PAULI, ResourceError
from .tensors import ContractViolation, svd_truncated

log = logging.getLogger(__name__)

LETTERS = "IXYZ"
# PAULI_STACK[alpha, t, s] = <t|P_alpha|s>
PAULI_STACK = np.stack([PAULI[p] for p in LETTERS])
SAMPLE_CHUNK = 1000
COND_TOL = 1e-8
# largest source bond dimension for the uncompressed replica contraction
MAX_EXACT_REPLICA_CHI = 8


class SamplingConsistencyError(RuntimeError):
    """Conditional Pauli probabilities do not sum to one."""


class TruncationWarning(UserWarning):
    pass


@dataclass
class SreEstimate:
    value: float
    std_error: float
    method: str
    alpha: float
    n_samples: int | None = None
    chi_used: int | None = None
    discarded_weight: float = 0.0
    warning: str | None = None


@dataclass
class PauliSample:
    string: str
    probability: float
    weight: float


# ---------------------------------------------------------------------------
# perfect sampling


def _right_normalized(m: MPS) -> list[np.ndarray]:
    mc = m if m.center == 0 else m.canonicalize(0)
    ts = [t.astype(complex) for t in mc.tensors]
    ts[0] = ts[0] / np.linalg.norm(ts[0])
    return ts


def sample_pauli_strings(m: MPS, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``n`` Pauli strings from ``Xi``.

    Returns the letter indices (``n x L`` array over ``I, X, Y, Z``) and
    ``log(Xi)`` of each drawn string.
    """
    A = _right_normalized(m)
    envs = np.ones((n, 1, 1), dtype=complex)
    letters = np.empty((n, len(A)), dtype=np.int8)
    log_p = np.zeros(n)
    rows = np.arange(n)
    for j, a in enumerate(A):
        chi_l, _, chi_r = a.shape
        # X[n, a, s', b'] = sum_a' L[n, a, a'] conj(A[a', s', b'])
        x = (envs.reshape(n * chi_l, chi_l) @ a.conj().reshape(chi_l, 2 * chi_r)).reshape(
            n, chi_l, 2, chi_r
        )
        # G[n, s, b, s', b'] = sum_a A[a, s, b] X[n, a, s', b']
        g = np.einsum("asb,natc->nsbtc", a, x, optimize=True)
        g00, g01 = g[:, 0, :, 0, :], g[:, 0, :, 1, :]
        g10, g11 = g[:, 1, :, 0, :], g[:, 1, :, 1, :]
        cand = np.stack([g00 + g11, g10 + g01, -1j * g10 + 1j * g01, g00 - g11], axis=1)
        probs = 0.5 * np.sum(np.abs(cand) ** 2, axis=(2, 3))
        tot = probs.sum(axis=1)
        if np.any(np.abs(tot - 1.0) > COND_TOL):
            raise SamplingConsistencyError(
                f"conditional probabilities at site {j} sum to {tot.min():.3e}..{tot.max():.3e}"
            )
        probs /= tot[:, None]
        u = rng.random(n)
        choice = np.minimum((np.cumsum(probs, axis=1) < u[:, None]).sum(axis=1), 3)
        # never pick a zero-probability letter through rounding at the top edge
        bad = probs[rows, choice] <= 0
        if np.any(bad):
            choice[bad] = np.argmax(probs[bad], axis=1)
        pc = probs[rows, choice]
        letters[:, j] = choice
        log_p += np.log(pc)
        envs = cand[rows, choice] / np.sqrt(2 * pc)[:, None, None]
    return letters, log_p


def pauli_sample(m: MPS, rng: np.random.Generator) -> PauliSample:
    """Draw one Pauli string together with its exact probability ``Xi``."""
    letters, log_p = sample_pauli_strings(m, 1, rng)
    word = "".join(LETTERS[k] for k in letters[0])
    p = float(np.exp(log_p[0]))
    return PauliSample(word, p, float(2.0 ** len(word) * p))


def _chunk_rngs(seed: int, n: int) -> list[tuple[np.random.Generator, int]]:
    n_chunks = -(-n // SAMPLE_CHUNK)
    seqs = np.random.SeedSequence(seed).spawn(n_chunks)
    out = []
    for k, s in enumerate(seqs):
        size = min(SAMPLE_CHUNK, n - k * SAMPLE_CHUNK)
        out.append((np.random.default_rng(s), size))
    return out


def sample_log_weights(m: MPS, n_samples: int, seed: int = 0) -> np.ndarray:
    """``log(d * Xi)`` of ``n_samples`` drawn strings, chunked with independent streams."""
    L = m.L
    out = []
    for rng, size in _chunk_rngs(seed, n_samples):
        _, lp = sample_pauli_strings(m, size, rng)
        out.append(lp + L * math.log(2.0))
    return np.concatenate(out)


def sre_from_log_weights(lw: np.ndarray, alpha: float) -> tuple[float, float]:
    """Estimate and jackknife standard error of ``M_alpha`` from ``log(d * Xi)`` draws."""
    n = lw.size
    if alpha == 1:
        v = -lw
        return float(v.mean()), float(v.std(ddof=1) / math.sqrt(n))
    k = alpha - 1.0
    x = k * lw
    top = x.max()
    w = np.exp(x - top)
    total = w.sum()
    value = (math.log(total / n) + top) / (1.0 - alpha)
    # leave-one-out estimates
    rest = np.maximum(total - w, np.finfo(float).tiny)
    loo = (np.log(rest / (n - 1)) + top) / (1.0 - alpha)
    err = math.sqrt((n - 1) / n * np.sum((loo - loo.mean()) ** 2))
    return float(value), float(err)


def sre_sampled(m: MPS, alpha: float = 2.0, n_samples: int = 100_000, seed: int = 0) -> SreEstimate:
    """``M_alpha`` by perfect Pauli sampling with a jackknife error bar."""
    if n_samples < 100:
        raise ContractViolation("sre_sampled needs at least 100 samples")
    if alpha < 1:
        raise ContractViolation("sampling estimator needs alpha >= 1")
    lw = sample_log_weights(m, n_samples, seed)
    value, err = sre_from_log_weights(lw, alpha)
    return SreEstimate(value, err, "sampling", alpha, n_samples=n_samples, chi_used=m.max_bond)


# ---------------------------------------------------------------------------
# Pauli-basis MPS and replica contraction


def build_pauli_mps(m: MPS) -> MPS:
    """MPS over ``{I, X, Y, Z}`` whose amplitude on a word ``P`` is ``<P>/sqrt(2**N)``.

    Bond dimensions are the squares of those of ``m``. If ``m`` is canonical at
    site 0 the result is right-normalized with unit norm.
    """
    A = _right_normalized(m)
    tensors = []
    for a in A:
        chi_l, _, chi_r = a.shape
        b = np.einsum("kts,asb,ctd->ackbd", PAULI_STACK, a, a.conj(), optimize=True)
        tensors.append(b.reshape(chi_l * chi_l, 4, chi_r * chi_r) / math.sqrt(2.0))
    return MPS(tensors, center=0)


def _truncate_sweep(ts: list[np.ndarray], chi_max, cutoff) -> tuple[list[np.ndarray], float]:
    """Right-to-left SVD truncation of a left-canonical chain with unit-norm last tensor."""
    ts = list(ts)
    disc = 0.0
    for i in range(len(ts) - 1, 0, -1):
        chi_l, d, chi_r = ts[i].shape
        res = svd_truncated(ts[i].reshape(chi_l, d * chi_r), chi_max, cutoff)
        disc += res.discarded_weight
        ts[i] = res.Vh.reshape(-1, d, chi_r)
        s = res.s / np.linalg.norm(res.s)
        ts[i - 1] = np.tensordot(ts[i - 1], res.U * s[None, :], axes=(2, 0))
    ts[0] = ts[0] / np.linalg.norm(ts[0])
    return ts, disc


def _zip(L: int, step, chi_max, cutoff) -> tuple[list[np.ndarray], float, float]:
    """Left-to-right zip-up compression of a chain generated site by site.

    ``step(C, i)`` contracts the carried remainder ``C[c, p, q]`` with the
    site-``i`` factors and returns ``T[c, alpha, p', q']``. The first pass
    truncates loosely; a right-to-left sweep then truncates to ``chi_max``
    on the exact Schmidt values. Returns right-normalized tensors of the
    normalized chain, its log norm and the summed discarded weight.
    """
    pass1_chi = None if chi_max is None else 2 * chi_max
    pass1_cut = cutoff * 1e-2
    C = np.ones((1, 1, 1), dtype=complex)
    lognorm = 0.0
    disc = 0.0
    out = []
    for i in range(L):
        t = step(C, i)
        c_dim, d, pr, qr = t.shape
        res = svd_truncated(t.reshape(c_dim * d, pr * qr), pass1_chi, pass1_cut)
        disc += res.discarded_weight
        nrm = np.linalg.norm(res.s)
        if nrm == 0:
            raise ContractViolation("replica product vanished")
        lognorm += math.log(nrm)
        out.append(res.U.reshape(c_dim, d, -1))
        C = ((res.s / nrm)[:, None] * res.Vh).reshape(-1, pr, qr)
    # C is now 1 x 1 x 1 up to a phase
    out[-1] = out[-1] * C.reshape(())
    out, d2 = _truncate_sweep(out, chi_max, cutoff)
    return out, lognorm, disc + d2


def _zip_diag_product(X: list[np.ndarray], B: list[np.ndarray], chi_max, cutoff):
    """Compress the site-wise diagonal product ``Y(alpha) = X(alpha) B(alpha)``."""

    def step(C, i):
        t = np.tensordot(C, X[i], axes=(1, 0))  # (c, q, alpha, p')
        return np.einsum("cqkp,qkr->ckpr", t, B[i], optimize=True)

    return _zip(len(X), step, chi_max, cutoff)


def _zip_pauli(A: list[np.ndarray], chi_max, cutoff):
    """Compressed Pauli-basis MPS of the right-normalized chain ``A``."""

    def step(C, i):
        a = A[i]
        t = np.tensordot(C, a, axes=(1, 0))  # (c, a', s, b)
        t = np.tensordot(t, a.conj(), axes=(1, 0))  # (c, s, b, t, b')
        t = np.tensordot(t, PAULI_STACK, axes=([1, 3], [2, 1]))  # (c, b, b', alpha)
        return t.transpose(0, 3, 1, 2) / math.sqrt(2.0)

    return _zip(len(A), step, chi_max, cutoff)


def sre_replica(
    m: MPS,
    n: int = 2,
    chi_max: int | None = None,
    cutoff: float = 1e-12,
    source_chi: int | None = None,
    budget: float = 1e-8,
) -> SreEstimate:
    """``M_n`` from ``(1 - n)**-1 log <P^(n)|P^(n)> - N log 2``.

    ``chi_max=None`` keeps every singular value above the numerical floor,
    which is exact up to round-off. With a finite ``chi_max`` each application
    of ``W`` is followed by compression and the discarded weights are summed;
    a warning is attached when they exceed ``budget``. ``source_chi``
    truncates the input state before the Pauli MPS is built.
    """
    if int(n) != n or n < 2:
        raise ContractViolation(f"replica index must be an integer >= 2, got {n}")
    n = int(n)
    L = m.L
    disc = 0.0
    src = m.canonicalize(0)
    if source_chi is not None and src.max_bond > source_chi:
        ts, d0 = _truncate_sweep(src.canonicalize(L - 1).tensors, source_chi, 0.0)
        src = MPS(ts, center=0)
        disc += d0
    if chi_max is None:
        if src.max_bond > MAX_EXACT_REPLICA_CHI:
            raise ResourceError(
                f"uncompressed replica limited to bond dimension {MAX_EXACT_REPLICA_CHI}; set chi_max"
            )
        Pt = build_pauli_mps(src).tensors
    else:
        Pt, _, dp = _zip_pauli(_right_normalized(src), chi_max, cutoff)
        disc += dp
    cur = Pt
    lognorm = 0.0
    for _ in range(n - 1):
        cur, ln, d = _zip_diag_product(cur, Pt, chi_max, cutoff)
        lognorm += ln
        disc += d
    # <P^(n)|P^(n)> = exp(2 * lognorm)
    value = 2.0 * lognorm / (1.0 - n) - L * math.log(2.0)
    chi_used = max(t.shape[2] for t in cur)
    warn = None
    if disc > budget:
        warn = f"discarded weight {disc:.3e} exceeds budget {budget:.1e}"
        warnings.warn(warn, TruncationWarning, stacklevel=2)
    return SreEstimate(
        value, 0.0, "replica", float(n), chi_used=chi_used, discarded_weight=disc, warning=warn
    )


# ---------------------------------------------------------------------------
# closed forms


def m2_closed_form_cluster_ising(g) -> np.ndarray | float:
    """Per-site ``M_2`` of the cluster-Ising MPS ground state on the solvable line."""
    g = np.asarray(g, dtype=float)
    out = -np.log((1 + 14 * g**2 + g**4) / (1 + np.abs(g)) ** 4)
    return float(out) if out.ndim == 0 else out


def single_qubit_sre(bloch: np.ndarray, alpha: float) -> float:
    """``M_alpha`` of a pure qubit with Bloch vector ``bloch``."""
    xi = np.concatenate([[1.0], np.asarray(bloch, dtype=float) ** 2]) / 2.0
    if alpha == 1:
        nz = xi[xi > 0]
        return float(-np.sum(nz * np.log(nz)) - math.log(2.0))
    return float(math.log(np.sum(xi**alpha)) / (1.0 - alpha) - math.log(2.0))


def m_alpha_closed_form_cgs(gamma: float, alpha: float = 2.0) -> float:
    """Per-site ``M_alpha`` of the factorized XY ground state on the separability circle."""
    theta = cgs_angle(gamma)
    return single_qubit_sre(np.array([math.sin(theta), 0.0, math.cos(theta)]), alpha)


def m2_theta_product(theta: float, L: int = 1) -> float:
    """``M_2`` of ``L`` copies of ``(|0> + e^{i theta}|1>)/sqrt(2)``."""
    return L * single_qubit_sre(np.array([math.cos(theta), math.sin(theta), 0.0]), 2.0)


def m_lin_theta_product(theta: float, L: int = 1) -> float:
    """Stabilizer linear entropy of the ``theta`` product state."""
    return 1.0 - ((1.0 + math.cos(theta) ** 4 + math.sin(theta) ** 4) / 2.0) ** L
