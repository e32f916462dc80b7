"""Dense tensor primitives shared by every other module.

Tensors are plain ``numpy.ndarray`` objects (C-ordered). The helpers here add
the argument checking and truncation conventions the MPS code relies on.
"""

from __future__ import annotations

from typing import NamedTuple, Sequence

import numpy as np
import scipy.linalg

# Singular values below this fraction of the largest one are always dropped.
SVD_FLOOR = 1e-14
HERMITIAN_TOL = 1e-10


class DimensionError(ValueError):
    """Paired axes of a contraction have different extents."""


class FactorizationError(RuntimeError):
    """A matrix factorization failed to converge."""


class ContractViolation(ValueError):
    """An input broke an operation's documented precondition."""


class TruncatedSVD(NamedTuple):
    U: np.ndarray
    s: np.ndarray
    Vh: np.ndarray
    discarded_weight: float


def contract(a: np.ndarray, b: np.ndarray, pairs: Sequence[tuple[int, int]]) -> np.ndarray:
    """Sum over the paired axes of ``a`` and ``b``.

    The result carries the free axes of ``a`` (in order) followed by the free
    axes of ``b``.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    axes_a = [p[0] for p in pairs]
    axes_b = [p[1] for p in pairs]
    for ia, ib in zip(axes_a, axes_b):
        if a.shape[ia] != b.shape[ib]:
            raise DimensionError(
                f"axis {ia} of a has extent {a.shape[ia]} but axis {ib} of b has {b.shape[ib]}"
            )
    return np.tensordot(a, b, axes=(axes_a, axes_b))


def svd_truncated(m: np.ndarray, chi_max: int | None = None, cutoff: float = 0.0) -> TruncatedSVD:
    """Truncated singular value decomposition of a matrix.

    Keeps at most ``chi_max`` singular values and drops every value below
    ``max(cutoff, SVD_FLOOR) * s[0]``. ``discarded_weight`` is the dropped
    fraction of ``sum(s**2)``.
    """
    m = np.asarray(m)
    if m.ndim != 2:
        raise ContractViolation(f"svd_truncated needs a matrix, got shape {m.shape}")
    try:
        U, s, Vh = scipy.linalg.svd(m, full_matrices=False, lapack_driver="gesdd", check_finite=False)
    except np.linalg.LinAlgError:
        try:
            U, s, Vh = scipy.linalg.svd(m, full_matrices=False, lapack_driver="gesvd", check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise FactorizationError(str(exc)) from exc
    total = float(np.sum(s**2))
    if total == 0.0:
        return TruncatedSVD(U[:, :1], s[:1], Vh[:1], 0.0)
    keep = int(np.count_nonzero(s > max(cutoff, SVD_FLOOR) * s[0]))
    keep = max(keep, 1)
    if chi_max is not None:
        keep = min(keep, int(chi_max))
    discarded = float(np.sum(s[keep:] ** 2)) / total
    return TruncatedSVD(U[:, :keep], s[:keep], Vh[:keep], discarded)


def eigh(h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a Hermitian matrix, eigenvalues ascending."""
    h = np.asarray(h)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ContractViolation(f"eigh needs a square matrix, got shape {h.shape}")
    if h.size and np.max(np.abs(h - h.conj().T)) >= HERMITIAN_TOL:
        raise ContractViolation("eigh input is not Hermitian")
    try:
        return scipy.linalg.eigh(h, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise FactorizationError(str(exc)) from exc


def qr_positive(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Thin QR with a non-negative diagonal in R (unique gauge)."""
    q, r = np.linalg.qr(m)
    d = np.diagonal(r)
    phase = np.where(np.abs(d) > 0, d / np.where(np.abs(d) > 0, np.abs(d), 1.0), 1.0)
    return q * phase[None, :], r * phase.conj()[:, None]


def is_finite(t: np.ndarray) -> bool:
    return bool(np.all(np.isfinite(t)))
