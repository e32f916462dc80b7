"""Spin-1/2 chain Hamiltonians and analytic reference states.

Every Hamiltonian is assembled as a list of :class:`PauliTerm` objects, which
both the dense builder (:mod:`spinmagic.exact`) and the MPO builder consume, so
the two representations agree term by term.

Conventions
-----------
* Sites are 0-indexed; site 0 is the most significant bit of a statevector.
* Pauli letters are ``I, X, Y, Z``; basis state ``|0>`` has ``Z = +1``.
* Open boundaries: two- and three-site sums run over fully interior windows.
  ``periodic=True`` adds the wrap-around windows.
* Hamiltonians follow the printed operators literally, including the ``J/2``
  prefactor of the XY chain. With ``J = 1`` that chain is critical at
  ``h = 1/2``; the usual normalization (critical field 1, separability circle
  ``h**2 + gamma**2 = 1``) is ``J = 2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np


class SpecificationError(ValueError):
    """Invalid model family, parameter set, or size."""


@dataclass(frozen=True)
class PauliTerm:
    """``coef * prod_k P_{letter_k}(site_k)`` with distinct sites."""

    coef: complex
    ops: tuple[tuple[int, str], ...]

    @property
    def sites(self) -> tuple[int, ...]:
        return tuple(s for s, _ in self.ops)

    def word(self, L: int) -> str:
        letters = ["I"] * L
        for s, p in self.ops:
            letters[s] = p
        return "".join(letters)


def _windows(L: int, width: int, periodic: bool) -> list[tuple[int, ...]]:
    if periodic and L > width:
        return [tuple((j + k) % L for k in range(width)) for j in range(L)]
    return [tuple(j + k for k in range(width)) for j in range(L - width + 1)]


def _add(terms: list[PauliTerm], coef: complex, sites: tuple[int, ...], letters: str) -> None:
    if coef != 0:
        terms.append(PauliTerm(coef, tuple(zip(sites, letters))))


def _heisenberg_xxz(L: int, p: Mapping[str, float], periodic: bool) -> list[PauliTerm]:
    J, g, delta, h = p["J"], p["gamma"], p["delta"], p["h"]
    terms: list[PauliTerm] = []
    for w in _windows(L, 2, periodic):
        _add(terms, -J / 2 * (1 - g) / 2, w, "XX")
        _add(terms, -J / 2 * (1 + g) / 2, w, "YY")
        _add(terms, -J / 2 * delta / 2, w, "ZZ")
    for j in range(L):
        _add(terms, -h, (j,), "Z")
    return terms


def _xy(L: int, p: Mapping[str, float], periodic: bool) -> list[PauliTerm]:
    J, g, h = p["J"], p["gamma"], p["h"]
    terms: list[PauliTerm] = []
    for w in _windows(L, 2, periodic):
        _add(terms, J / 2 * (1 + g) / 2, w, "XX")
        _add(terms, J / 2 * (1 - g) / 2, w, "YY")
    for j in range(L):
        _add(terms, -h, (j,), "Z")
    return terms


def _xy_dm(L: int, p: Mapping[str, float], periodic: bool) -> list[PauliTerm]:
    J, g, D, h = p["J"], p["gamma"], p["D"], p["h"]
    terms: list[PauliTerm] = []
    for w in _windows(L, 2, periodic):
        _add(terms, J * (1 - g) / 2, w, "XX")
        _add(terms, J * (1 + g) / 2, w, "YY")
        # z component of sigma_j x sigma_{j+1}
        _add(terms, J * D, w, "XY")
        _add(terms, -J * D, w, "YX")
    for j in range(L):
        _add(terms, -h, (j,), "Z")
    return terms


def _cluster_ising(L: int, p: Mapping[str, float], periodic: bool) -> list[PauliTerm]:
    terms: list[PauliTerm] = []
    for w in _windows(L, 2, periodic):
        _add(terms, -p["g_zz"], w, "ZZ")
    for j in range(L):
        _add(terms, -p["g_x"], (j,), "X")
    for w in _windows(L, 3, periodic):
        _add(terms, p["g_zxz"], w, "ZXZ")
    return terms


def _cluster_xy(L: int, p: Mapping[str, float], periodic: bool) -> list[PauliTerm]:
    terms: list[PauliTerm] = []
    for w in _windows(L, 3, periodic):
        _add(terms, -1.0, w, "XZX")
    for j in range(L):
        _add(terms, -p["h"], (j,), "Z")
    for w in _windows(L, 2, periodic):
        _add(terms, p["lambda_y"], w, "YY")
        _add(terms, p["lambda_x"], w, "XX")
    return terms


@dataclass(frozen=True)
class Family:
    name: str
    defaults: Mapping[str, float]
    min_L: int
    builder: Callable[[int, Mapping[str, float], bool], list[PauliTerm]]


FAMILIES: dict[str, Family] = {
    "heisenberg_xxz": Family(
        "heisenberg_xxz", {"J": 1.0, "gamma": 0.0, "delta": 0.0, "h": 0.0}, 2, _heisenberg_xxz
    ),
    "xy": Family("xy", {"J": 1.0, "gamma": 0.0, "h": 0.0}, 2, _xy),
    "xy_dm": Family("xy_dm", {"J": 1.0, "gamma": 0.0, "D": 0.0, "h": 0.0}, 2, _xy_dm),
    "cluster_ising": Family(
        "cluster_ising", {"g_zz": 0.0, "g_x": 0.0, "g_zxz": 0.0}, 3, _cluster_ising
    ),
    "cluster_xy": Family(
        "cluster_xy", {"h": 0.0, "lambda_x": 0.0, "lambda_y": 0.0}, 3, _cluster_xy
    ),
}


@dataclass(frozen=True)
class ModelSpec:
    """A model family, its couplings and the chain length.

    Parameters not given fall back to the family defaults (``J = 1``, all other
    couplings zero). Unknown parameter names are rejected.
    """

    family: str
    L: int
    params: Mapping[str, float] = field(default_factory=dict)
    periodic: bool = False

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise SpecificationError(f"unknown model family {self.family!r}")
        fam = FAMILIES[self.family]
        unknown = set(self.params) - set(fam.defaults)
        if unknown:
            raise SpecificationError(
                f"parameters {sorted(unknown)} do not belong to family {self.family!r}"
            )
        if int(self.L) != self.L or self.L < fam.min_L:
            raise SpecificationError(f"family {self.family!r} needs L >= {fam.min_L}, got {self.L}")
        full = dict(fam.defaults)
        full.update({k: float(v) for k, v in self.params.items()})
        object.__setattr__(self, "params", full)

    def with_params(self, **updates: float) -> "ModelSpec":
        p = dict(self.params)
        p.update(updates)
        return ModelSpec(self.family, self.L, p, self.periodic)

    def with_size(self, L: int) -> "ModelSpec":
        return ModelSpec(self.family, L, dict(self.params), self.periodic)

    def terms(self) -> list[PauliTerm]:
        return FAMILIES[self.family].builder(self.L, self.params, self.periodic)


def hamiltonian_terms(spec: ModelSpec) -> list[PauliTerm]:
    return spec.terms()


def build_mpo(spec: ModelSpec):
    """Matrix product operator of the model Hamiltonian."""
    from .mps import mpo_from_terms

    return mpo_from_terms(spec.terms(), spec.L)


# --- parameter maps ---------------------------------------------------------


def solvable_trajectory(g: float) -> tuple[float, float, float]:
    """Cluster-Ising couplings ``(g_zz, g_x, g_zxz)`` on the MPS-solvable line."""
    return 2 * (1 - g * g), (1 + g) ** 2, (g - 1) ** 2


def separability_field(gamma: float) -> float:
    """Factorizing field of the XY chain in the ``J = 2`` normalization."""
    _check_gamma(gamma)
    return math.sqrt(1.0 - gamma * gamma)


def cgs_angle(gamma: float) -> float:
    """``theta_gamma`` with ``cos(theta_gamma) = sqrt((1 - gamma) / (1 + gamma))``."""
    _check_gamma(gamma)
    return math.acos(math.sqrt((1.0 - gamma) / (1.0 + gamma)))


def _check_gamma(gamma: float) -> None:
    if not 0.0 <= gamma <= 1.0:
        raise SpecificationError(f"gamma must lie in [0, 1], got {gamma}")


# --- analytic states --------------------------------------------------------


def product_mps(vectors):
    from .mps import MPS

    return MPS.product_state(vectors)


def cgs_product_state(gamma: float, L: int):
    """Factorized XY ground state on the separability circle.

    Site ``i`` (1-based) carries ``(-1)**i cos(theta/2)|a> + sin(theta/2)|b>``
    where ``|a> = |0>`` is aligned with the field and ``|b> = |1>``.
    """
    theta = cgs_angle(gamma)
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    vecs = [np.array([(-1) ** (i + 1) * c, s]) for i in range(L)]
    return product_mps(vecs)


def theta_product_state(theta: float, L: int):
    """``prod_i (|0> + e^{i theta}|1>)/sqrt(2)`` as a bond-dimension-one MPS."""
    v = np.array([1.0, np.exp(1j * theta)]) / math.sqrt(2)
    return product_mps([v] * L)


def ghz_mps(L: int):
    """``(|0...0> + |1...1>)/sqrt(2)`` with bond dimension two."""
    from .mps import MPS

    tensors = []
    for i in range(L):
        t = np.zeros((1 if i == 0 else 2, 2, 1 if i == L - 1 else 2), dtype=complex)
        if i == 0:
            t[0, 0, 0] = t[0, 1, -1] = 1 / math.sqrt(2)
        elif i == L - 1:
            t[0, 0, 0] = t[-1, 1, 0] = 1.0
        else:
            t[0, 0, 0] = t[1, 1, 1] = 1.0
        tensors.append(t)
    return MPS(tensors)


def cluster_ising_tensors(g: float) -> np.ndarray:
    """Bulk tensor ``A[s, a, b]`` of the exact bond-dimension-two ground state.

    ``A[0]`` is the printed ``A^(1)`` (spin up, ``|0>``) and ``A[1]`` the
    printed ``A^(0)``.
    """
    n = 1.0 / math.sqrt(1.0 + abs(g))
    r = math.sqrt(abs(g))
    sg = 1.0 if g >= 0 else -1.0
    up = n * np.array([[1.0, sg * r], [0.0, 0.0]])
    down = n * np.array([[0.0, 0.0], [r, 1.0]])
    return np.stack([up, down])


def cluster_ising_exact_mps(g: float, L: int, periodic: bool = True):
    """Exact MPS ground state of the cluster-Ising model on the solvable line.

    With ``periodic=True`` (default) the chain is closed by a trace, which makes
    the state an exact eigenstate of the periodic Hamiltonian; it is stored as
    an open MPS with bond dimension four. With ``periodic=False`` the bulk
    tensors are capped by the boundary vectors ``(1, 1)`` and the state is only
    approximately an eigenstate of the open chain.
    """
    from .mps import MPS

    if L < 2:
        raise SpecificationError("cluster_ising_exact_mps needs L >= 2")
    A = cluster_ising_tensors(g).astype(complex)  # (s, a, b)
    bulk = A.transpose(1, 0, 2)  # (a, s, b)
    if not periodic:
        edge = np.ones(2)
        tensors = [bulk.copy() for _ in range(L)]
        tensors[0] = np.einsum("a,asb->sb", edge, bulk)[None]
        tensors[-1] = np.einsum("asb,b->as", bulk, edge)[:, :, None]
        return MPS(tensors).canonicalize(0)
    eye = np.eye(2)
    # carry the trace index alongside the running bond: (a, t) pairs
    dbl = np.einsum("asb,tu->atsbu", bulk, eye).reshape(4, 2, 4)
    first = np.einsum("asb,at->sbt", bulk, eye).reshape(1, 2, 4)
    last = np.einsum("asb,bt->ats", bulk, eye).reshape(4, 2)
    last = last[:, :, None]
    tensors = [first] + [dbl.copy() for _ in range(L - 2)] + [last]
    return MPS(tensors).canonicalize(0)
