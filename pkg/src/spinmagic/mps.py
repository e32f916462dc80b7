"""Matrix product states and operators.

Site tensors of an :class:`MPS` have axes ``(left bond, physical, right
bond)``; those of an :class:`MPO` have ``(left bond, physical out, physical in,
right bond)``. Boundary bonds have extent one.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Iterable, Sequence

import numpy as np

from .tensors import ContractViolation, qr_positive, svd_truncated

MAX_STATEVECTOR_SITES = 14


class NormalizationError(ValueError):
    """The state has zero norm."""


class ResourceError(MemoryError):
    """Requested object would exceed the supported size."""


PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


@dataclass(frozen=True)
class SchmidtSpectrum:
    """Squared Schmidt coefficients across one cut, nonincreasing, summing to one."""

    probabilities: np.ndarray

    def __post_init__(self) -> None:
        p = np.asarray(self.probabilities, dtype=float)
        if np.any(p < 0):
            raise ValueError("Schmidt probabilities must be nonnegative")
        total = p.sum()
        if not abs(total - 1.0) < 1e-8:
            raise ValueError(f"Schmidt probabilities sum to {total}, not 1")
        object.__setattr__(self, "probabilities", np.sort(p)[::-1])

    @classmethod
    def from_singular_values(cls, s: np.ndarray) -> "SchmidtSpectrum":
        p = np.asarray(s, dtype=float) ** 2
        return cls(p / p.sum())

    def __len__(self) -> int:
        return len(self.probabilities)


class MPS:
    """Finite matrix product state with an optional orthogonality center."""

    def __init__(self, tensors: Sequence[np.ndarray], center: int | None = None):
        tensors = [np.asarray(t) for t in tensors]
        if not tensors:
            raise ContractViolation("an MPS needs at least one site")
        for i, t in enumerate(tensors):
            if t.ndim != 3:
                raise ContractViolation(f"site {i} tensor has shape {t.shape}, expected rank 3")
        if tensors[0].shape[0] != 1 or tensors[-1].shape[2] != 1:
            raise ContractViolation("boundary bonds must have extent 1")
        for i in range(len(tensors) - 1):
            if tensors[i].shape[2] != tensors[i + 1].shape[0]:
                raise ContractViolation(f"bond mismatch between sites {i} and {i + 1}")
        self.tensors = tensors
        self.center = center

    # -- construction ------------------------------------------------------

    @classmethod
    def product_state(cls, vectors: Iterable[np.ndarray]) -> "MPS":
        tensors = []
        for v in vectors:
            v = np.asarray(v, dtype=complex)
            tensors.append((v / np.linalg.norm(v)).reshape(1, -1, 1))
        return cls(tensors, center=0)

    @classmethod
    def basis_state(cls, bits: Sequence[int], d: int = 2) -> "MPS":
        vecs = []
        for b in bits:
            v = np.zeros(d)
            v[b] = 1.0
            vecs.append(v)
        return cls.product_state(vecs)

    @classmethod
    def random(
        cls,
        L: int,
        chi: int,
        d: int = 2,
        seed: int | np.random.Generator | None = None,
        real: bool = False,
    ) -> "MPS":
        """Random normalized MPS, canonical at site 0, bonds capped by ``chi``."""
        rng = np.random.default_rng(seed)
        dims = [1] + [min(chi, d**k, d ** (L - k)) for k in range(1, L)] + [1]
        tensors = []
        for i in range(L):
            shape = (dims[i], d, dims[i + 1])
            t = rng.normal(size=shape)
            if not real:
                t = t + 1j * rng.normal(size=shape)
            tensors.append(t.astype(complex))
        return cls(tensors).canonicalize(0)

    @classmethod
    def from_statevector(cls, psi: np.ndarray, d: int = 2, chi_max: int | None = None) -> "MPS":
        psi = np.asarray(psi, dtype=complex).ravel()
        L = int(round(np.log(psi.size) / np.log(d)))
        if d**L != psi.size:
            raise ContractViolation("statevector length is not a power of the local dimension")
        tensors = []
        rest = psi.reshape(1, -1)
        for _ in range(L - 1):
            chi_l = rest.shape[0]
            m = rest.reshape(chi_l * d, -1)
            res = svd_truncated(m, chi_max)
            tensors.append(res.U.reshape(chi_l, d, -1))
            rest = res.s[:, None] * res.Vh
        tensors.append(rest.reshape(rest.shape[0], d, 1))
        return cls(tensors, center=L - 1)

    # -- basic properties --------------------------------------------------

    @property
    def L(self) -> int:
        return len(self.tensors)

    @property
    def phys_dims(self) -> list[int]:
        return [t.shape[1] for t in self.tensors]

    @property
    def bond_dims(self) -> list[int]:
        return [t.shape[2] for t in self.tensors[:-1]]

    @property
    def max_bond(self) -> int:
        return max([1] + self.bond_dims)

    def copy(self) -> "MPS":
        return MPS([t.copy() for t in self.tensors], self.center)

    def __repr__(self) -> str:
        return f"MPS(L={self.L}, d={self.phys_dims[0]}, chi={self.max_bond}, center={self.center})"

    # -- contractions ------------------------------------------------------

    def overlap(self, other: "MPS") -> complex:
        """``<self|other>``."""
        env = np.ones((1, 1), dtype=complex)
        for a, b in zip(self.tensors, other.tensors):
            env = np.tensordot(env, b, axes=(1, 0))  # (a*, s, b)
            env = np.tensordot(a.conj(), env, axes=([0, 1], [0, 1]))
        return complex(env[0, 0])

    def norm(self) -> float:
        if self.center is not None:
            return float(np.linalg.norm(self.tensors[self.center]))
        return float(np.sqrt(abs(self.overlap(self))))

    def to_statevector(self) -> np.ndarray:
        if self.L > MAX_STATEVECTOR_SITES:
            raise ResourceError(f"statevector of {self.L} sites exceeds {MAX_STATEVECTOR_SITES}")
        psi = self.tensors[0]
        for t in self.tensors[1:]:
            psi = np.tensordot(psi, t, axes=(-1, 0))
        return psi.reshape(-1)

    # -- gauge -------------------------------------------------------------

    def canonicalize(self, center: int, normalize: bool = True) -> "MPS":
        """Mixed-canonical copy with orthogonality center at ``center``."""
        if not 0 <= center < self.L:
            raise IndexError(f"center {center} outside 0..{self.L - 1}")
        ts = [t.copy() for t in self.tensors]
        if self.center is None:
            left_done, right_done = 0, self.L - 1
        else:
            left_done, right_done = self.center, self.center
        lo = min(left_done, center)
        hi = max(right_done, center)
        for i in range(lo, center):
            chi_l, d, chi_r = ts[i].shape
            q, r = qr_positive(ts[i].reshape(chi_l * d, chi_r))
            ts[i] = q.reshape(chi_l, d, -1)
            ts[i + 1] = np.tensordot(r, ts[i + 1], axes=(1, 0))
        for i in range(hi, center, -1):
            chi_l, d, chi_r = ts[i].shape
            q, r = qr_positive(ts[i].reshape(chi_l, d * chi_r).T)
            ts[i] = q.T.reshape(-1, d, chi_r)
            ts[i - 1] = np.tensordot(ts[i - 1], r.T, axes=(2, 0))
        nrm = np.linalg.norm(ts[center])
        if normalize:
            if nrm == 0 or not np.isfinite(nrm):
                raise NormalizationError("cannot normalize a zero-norm MPS")
            ts[center] = ts[center] / nrm
        return MPS(ts, center)

    def normalized(self) -> "MPS":
        c = self.center if self.center is not None else 0
        return self.canonicalize(c)

    def singular_values(self, cut: int) -> np.ndarray:
        """Singular values across the bond between sites ``cut - 1`` and ``cut``."""
        if not 0 < cut < self.L:
            raise IndexError(f"cut {cut} outside 1..{self.L - 1}")
        m = self.canonicalize(cut - 1, normalize=False)
        t = m.tensors[cut - 1]
        s = np.linalg.svd(t.reshape(-1, t.shape[2]), compute_uv=False)
        return s

    def schmidt_spectrum(self, cut: int | None = None) -> SchmidtSpectrum:
        """Entanglement spectrum across ``cut`` (default: half chain)."""
        if cut is None:
            cut = self.L // 2
        s = self.singular_values(cut)
        s = s[s > 1e-14 * s[0]] if s[0] > 0 else s
        return SchmidtSpectrum.from_singular_values(s)

    def is_left_isometric(self, i: int, tol: float = 1e-10) -> bool:
        t = self.tensors[i]
        m = t.reshape(-1, t.shape[2])
        return np.allclose(m.conj().T @ m, np.eye(m.shape[1]), atol=tol)

    def is_right_isometric(self, i: int, tol: float = 1e-10) -> bool:
        t = self.tensors[i]
        m = t.reshape(t.shape[0], -1)
        return np.allclose(m @ m.conj().T, np.eye(m.shape[0]), atol=tol)

    def apply_local(self, site: int, op: np.ndarray) -> "MPS":
        """Apply a one-site operator; the canonical center moves to ``site``."""
        out = self.copy() if self.center == site else self.canonicalize(site, normalize=False)
        out.tensors[site] = np.einsum("st,atb->asb", op, out.tensors[site])
        return out

    def expectation(self, op: "MPO") -> float:
        return expectation(self, op)

    # -- serialization -----------------------------------------------------

    def save(self, path: str | Path) -> None:
        with open(path, "wb") as fh:
            write_mps(self, fh)

    @classmethod
    def load(cls, path: str | Path) -> "MPS":
        with open(path, "rb") as fh:
            return read_mps(fh)


class MPO:
    """Finite matrix product operator."""

    def __init__(self, tensors: Sequence[np.ndarray]):
        tensors = [np.asarray(t) for t in tensors]
        for i, t in enumerate(tensors):
            if t.ndim != 4:
                raise ContractViolation(f"site {i} tensor has shape {t.shape}, expected rank 4")
        if tensors[0].shape[0] != 1 or tensors[-1].shape[3] != 1:
            raise ContractViolation("boundary bonds must have extent 1")
        for i in range(len(tensors) - 1):
            if tensors[i].shape[3] != tensors[i + 1].shape[0]:
                raise ContractViolation(f"bond mismatch between sites {i} and {i + 1}")
        self.tensors = tensors

    @property
    def L(self) -> int:
        return len(self.tensors)

    @property
    def bond_dims(self) -> list[int]:
        return [t.shape[3] for t in self.tensors[:-1]]

    @classmethod
    def identity(cls, L: int, d: int = 2) -> "MPO":
        return cls([np.eye(d, dtype=complex).reshape(1, d, d, 1) for _ in range(L)])

    @classmethod
    def product(cls, ops: Sequence[np.ndarray]) -> "MPO":
        return cls([np.asarray(o, dtype=complex)[None, :, :, None] for o in ops])

    def is_real(self) -> bool:
        return all(np.allclose(t.imag, 0) for t in self.tensors)

    def to_dense(self) -> np.ndarray:
        if self.L > 12:
            raise ResourceError("dense MPO expansion limited to 12 sites")
        out = self.tensors[0][0]  # (s, t, w)
        for t in self.tensors[1:]:
            out = np.einsum("stw,wuvx->sutvx", out, t)
            a, b, c, e, f = out.shape
            out = out.reshape(a * b, c * e, f)
        return out[:, :, 0]


def mpo_from_terms(terms, L: int) -> MPO:
    """Build an MPO from a list of :class:`~spinmagic.models.PauliTerm`.

    Bond ``b`` (between sites ``b - 1`` and ``b``) carries an idle channel, a
    finished channel, and one channel per distinct remainder ``{(site, letter)}``
    of a term that has started left of ``b`` but has operators at or right of
    ``b``. Coefficients sit on a term's first operator.
    """
    IDLE, DONE = "idle", "done"
    chans: list[dict] = [{IDLE: 0}] + [{IDLE: 0, DONE: 1} for _ in range(L - 1)] + [{DONE: 0}]
    starts = []
    for term in terms:
        ops = tuple(sorted(term.ops))
        if not ops:
            continue
        if ops[0][0] < 0 or ops[-1][0] >= L:
            raise ContractViolation(f"term {term} does not fit on {L} sites")
        for b in range(ops[0][0] + 1, ops[-1][0] + 1):
            key = frozenset(op for op in ops if op[0] >= b)
            chans[b].setdefault(key, len(chans[b]))
        rest = frozenset(ops[1:]) if len(ops) > 1 else DONE
        starts.append((ops[0][0], ops[0][1], complex(term.coef), rest))
    tensors = []
    for i in range(L):
        left, right = chans[i], chans[i + 1]
        W = np.zeros((len(left), 2, 2, len(right)), dtype=complex)
        for key in (IDLE, DONE):
            if key in left and key in right:
                W[left[key], :, :, right[key]] += PAULI["I"]
        for key, a in left.items():
            if key in (IDLE, DONE):
                continue
            site, letter = min(key)
            if site == i:
                nxt = key - {(site, letter)}
                W[a, :, :, right[nxt if nxt else DONE]] += PAULI[letter]
            else:
                W[a, :, :, right[key]] += PAULI["I"]
        for site, letter, coef, rest in starts:
            if site == i:
                W[left[IDLE], :, :, right[rest]] += coef * PAULI[letter]
        tensors.append(W)
    return MPO(tensors)


# ---------------------------------------------------------------------------
# expectation values and operator application


def expectation(m: MPS, op: MPO, tol: float = 1e-8) -> float:
    """``<m|op|m> / <m|m>``; raises if the result has an imaginary part above ``tol``."""
    env = np.ones((1, 1, 1), dtype=complex)  # (bra, mpo, ket)
    for A, W in zip(m.tensors, op.tensors):
        env = np.tensordot(env, A, axes=(2, 0))  # (bra, w, s, b)
        env = np.tensordot(env, W, axes=([1, 2], [0, 2]))  # (bra, b, s', w')
        env = np.tensordot(A.conj(), env, axes=([0, 1], [0, 2]))  # (b*, b, w')
        env = env.transpose(0, 2, 1)
    val = env[0, 0, 0]
    nrm = m.norm() ** 2
    val = val / nrm
    if abs(val.imag) > tol * max(1.0, abs(val.real)):
        raise ContractViolation(f"expectation value has imaginary part {val.imag:.3e}")
    return float(val.real)


def apply_mpo_exact(op: MPO, m: MPS) -> MPS:
    tensors = []
    for W, A in zip(op.tensors, m.tensors):
        t = np.tensordot(W, A, axes=(2, 1))  # (wl, s', wr, al, ar)
        wl, d, wr, al, ar = t.shape
        t = t.transpose(0, 3, 1, 2, 4).reshape(wl * al, d, wr * ar)
        tensors.append(t)
    return MPS(tensors)


def compress(m: MPS, chi_max: int | None = None, cutoff: float = 0.0) -> tuple[MPS, float]:
    """SVD compression; returns the compressed state and the summed discarded weight.

    The norm of the input is preserved on the result (up to discarded weight).
    """
    mc = m.canonicalize(m.L - 1, normalize=False)
    ts = mc.tensors
    nrm = np.linalg.norm(ts[-1])
    if nrm == 0:
        raise NormalizationError("cannot compress a zero-norm MPS")
    ts[-1] = ts[-1] / nrm
    discarded = 0.0
    for i in range(m.L - 1, 0, -1):
        chi_l, d, chi_r = ts[i].shape
        res = svd_truncated(ts[i].reshape(chi_l, d * chi_r), chi_max, cutoff)
        discarded += res.discarded_weight
        ts[i] = res.Vh.reshape(-1, d, chi_r)
        ts[i - 1] = np.tensordot(ts[i - 1], res.U * res.s[None, :], axes=(2, 0))
    ts[0] = ts[0] / np.linalg.norm(ts[0]) * nrm
    return MPS(ts, center=0), discarded


def apply_mpo(
    op: MPO, m: MPS, chi_max: int | None = None, cutoff: float = 0.0
) -> tuple[MPS, float]:
    """``op|m>`` compressed to ``chi_max``; returns (state, discarded weight)."""
    if op.L != m.L:
        raise ContractViolation("MPO and MPS lengths differ")
    for i, (W, A) in enumerate(zip(op.tensors, m.tensors)):
        if W.shape[2] != A.shape[1]:
            raise ContractViolation(f"physical extent mismatch at site {i}")
    return compress(apply_mpo_exact(op, m), chi_max, cutoff)


# ---------------------------------------------------------------------------
# binary container
#
# header: b"SMPS" | u32 version | u32 L | i32 center (-1: none)
#         | L x u32 physical extents | (L + 1) x u32 bond extents
# payload: site tensors in order, complex128 little endian, C order (left, phys, right)

_MAGIC = b"SMPS"
_VERSION = 1


def write_mps(m: MPS, fh: BinaryIO) -> None:
    L = m.L
    bonds = [1] + m.bond_dims + [1]
    fh.write(_MAGIC)
    fh.write(struct.pack("<IIi", _VERSION, L, -1 if m.center is None else m.center))
    fh.write(struct.pack(f"<{L}I", *m.phys_dims))
    fh.write(struct.pack(f"<{L + 1}I", *bonds))
    for t in m.tensors:
        fh.write(np.ascontiguousarray(t, dtype="<c16").tobytes())


def read_mps(fh: BinaryIO) -> MPS:
    if fh.read(4) != _MAGIC:
        raise ValueError("not an MPS container")
    version, L, center = struct.unpack("<IIi", fh.read(12))
    if version != _VERSION:
        raise ValueError(f"unsupported MPS container version {version}")
    phys = struct.unpack(f"<{L}I", fh.read(4 * L))
    bonds = struct.unpack(f"<{L + 1}I", fh.read(4 * (L + 1)))
    tensors = []
    for i in range(L):
        shape = (bonds[i], phys[i], bonds[i + 1])
        n = int(np.prod(shape))
        buf = fh.read(16 * n)
        if len(buf) != 16 * n:
            raise ValueError("truncated MPS container")
        tensors.append(np.frombuffer(buf, dtype="<c16").reshape(shape).astype(complex))
    return MPS(tensors, None if center < 0 else center)
