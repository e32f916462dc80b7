"""Measures of an entanglement spectrum.

All functions accept a :class:`~spinmagic.mps.SchmidtSpectrum` or any array
of probabilities. Logarithms are natural; probabilities below ``PROB_FLOOR``
are left out of every logarithmic term.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .mps import SchmidtSpectrum

PROB_FLOOR = 1e-14


def _probs(s) -> np.ndarray:
    if isinstance(s, SchmidtSpectrum):
        return s.probabilities
    p = np.asarray(s, dtype=float).ravel()
    if np.any(p < 0):
        raise ValueError("probabilities must be nonnegative")
    return p


def _support(s) -> np.ndarray:
    p = _probs(s)
    return p[p > PROB_FLOOR]


def entropy(s) -> float:
    """Von Neumann entropy ``-sum p log p``."""
    p = _support(s)
    return float(-np.sum(p * np.log(p)))


def moments(s, k: int) -> float:
    """``p_k = sum p**k``."""
    if k < 2:
        raise ValueError(f"moment order must be >= 2, got {k}")
    return float(np.sum(_probs(s) ** k))


def renyi(s, n: float) -> float:
    """Renyi entropy ``log(sum p**n) / (1 - n)``; ``n = 1`` gives :func:`entropy`."""
    if n <= 0:
        raise ValueError(f"Renyi index must be positive, got {n}")
    if n == 1:
        return entropy(s)
    p = _support(s)
    return float(np.log(np.sum(p**n)) / (1.0 - n))


def capacity(s) -> float:
    """Capacity of entanglement, the variance of ``-log p`` under ``p``."""
    p = _support(s)
    lp = np.log(p)
    mean = np.sum(p * lp)
    # variance written as a centered sum so it stays nonnegative in floating point
    return float(np.sum(p * (lp - mean) ** 2))


def antiflatness(s) -> tuple[float, float, float]:
    """``(F, Lambda, log Lambda)`` with ``F = p3 - p2**2`` and ``Lambda = p3 / p2**2``."""
    p2 = moments(s, 2)
    p3 = moments(s, 3)
    F = p3 - p2 * p2
    lam = p3 / (p2 * p2)
    log_lam = np.log(p3) - 2.0 * np.log(p2)
    return float(F), float(lam), float(log_lam)


@dataclass
class SpectralPanel:
    S: float
    renyi: dict = field(default_factory=dict)
    CE: float = 0.0
    p2: float = 1.0
    p3: float = 1.0
    F: float = 0.0
    Lambda: float = 1.0
    logLambda: float = 0.0

    @classmethod
    def from_spectrum(cls, s, renyi_orders: Sequence[float] = (2, 3)) -> "SpectralPanel":
        F, lam, log_lam = antiflatness(s)
        return cls(
            S=entropy(s),
            renyi={n: renyi(s, n) for n in renyi_orders},
            CE=capacity(s),
            p2=moments(s, 2),
            p3=moments(s, 3),
            F=F,
            Lambda=lam,
            logLambda=log_lam,
        )

    def as_dict(self) -> dict:
        d = asdict(self)
        for n, v in d.pop("renyi").items():
            d[f"S{n:g}"] = v
        return d


def two_qubit_spectrum(u: float) -> SchmidtSpectrum:
    """Spectrum ``(u, 1 - u)`` of one qubit of a two-qubit pure state."""
    return SchmidtSpectrum(np.array([u, 1.0 - u]))


def two_qubit_closed_forms(u) -> dict:
    """Closed-form ``S, CE, S2, S3, Lambda`` for the spectrum ``(u, 1 - u)`` (vectorized)."""
    u = np.asarray(u, dtype=float)
    v = 1.0 - u
    with np.errstate(divide="ignore", invalid="ignore"):
        lu = np.where(u > 0, np.log(np.where(u > 0, u, 1.0)), 0.0)
        lv = np.where(v > 0, np.log(np.where(v > 0, v, 1.0)), 0.0)
    S = -(u * lu + v * lv)
    CE = u * v * (lu - lv) ** 2
    p2 = u**2 + v**2
    p3 = u**3 + v**3
    return {
        "S": S,
        "CE": CE,
        "S2": -np.log(p2),
        "S3": -0.5 * np.log(p3),
        "Lambda": p3 / p2**2,
    }
