"""Polarization kets, two-photon density matrices and the real 16-vector encoding."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

SQRT1_2 = 1.0 / np.sqrt(2.0)


class Basis(str, Enum):
    COMPUTATIONAL = "computational"  # (HH, HV, VH, VV)
    BELL = "bell"  # (Psi-, Psi+, Phi-, Phi+)


COMPUTATIONAL_LABELS = ("HH", "HV", "VH", "VV")
BELL_LABELS = ("Psi-", "Psi+", "Phi-", "Phi+")

_KETS = {
    "H": (1.0, 0.0),
    "V": (0.0, 1.0),
    "D": (SQRT1_2, SQRT1_2),
    "A": (SQRT1_2, -SQRT1_2),
    "R": (SQRT1_2, -1j * SQRT1_2),
    "L": (SQRT1_2, 1j * SQRT1_2),
}

# Input and analyzer states, in acquisition order.
TOMOGRAPHIC_LABELS = (
    "HH", "HV", "VV", "VH",
    "RH", "RV", "DV", "DH",
    "DR", "DD", "RD", "HD",
    "VD", "VL", "HL", "RL",
)

# Columns are the Bell kets written in the computational basis.
BELL_CHANGE = SQRT1_2 * np.array(
    [
        [0, 0, 1, 1],
        [1, 1, 0, 0],
        [-1, 1, 0, 0],
        [0, 0, -1, 1],
    ],
    dtype=complex,
)

# (row, col) pairs of the upper triangle, in vector order.
_OFFDIAG = [(i, j) for i in range(4) for j in range(i + 1, 4)]


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class PolarizationKet:
    """Single-photon polarization state as (H, V) amplitudes."""

    amplitudes: np.ndarray
    label: str = ""

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=complex).reshape(2)
        norm = np.linalg.norm(a)
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"polarization ket must be unit norm, got norm {norm}")
        # fix global phase: first nonzero component real and positive
        k = 0 if abs(a[0]) > 1e-15 else 1
        if a[k].imag != 0 or a[k].real < 0:
            mag = abs(a[k])
            a = a * (np.conj(a[k]) / mag)
            a[k] = mag
        object.__setattr__(self, "amplitudes", _frozen(a))


@dataclass(frozen=True)
class TwoPhotonState:
    """A 4x4 Hermitian PSD density matrix, trace at most one.

    ``check=False`` skips the physicality checks; linear inversion uses it to
    hand back estimates that may have negative eigenvalues.
    """

    matrix: np.ndarray
    basis: Basis = Basis.COMPUTATIONAL
    check: bool = True

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (4, 4):
            raise ValueError(f"two-photon density matrix must be 4x4, got {m.shape}")
        if np.max(np.abs(m - m.conj().T)) > 1e-10:
            raise ValueError("density matrix is not Hermitian")
        m = 0.5 * (m + m.conj().T)
        object.__setattr__(self, "basis", Basis(self.basis))
        object.__setattr__(self, "matrix", _frozen(m))
        if self.check:
            if np.linalg.eigvalsh(m).min() < -1e-9:
                raise ValueError("density matrix is not positive semidefinite")
            tr = self.trace
            if tr < -1e-9 or tr > 1 + 1e-9:
                raise ValueError(f"density matrix trace {tr} outside [0, 1]")

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def normalized(self) -> "TwoPhotonState":
        tr = self.trace
        if tr <= 0:
            raise ValueError("cannot normalize a zero-trace state")
        return TwoPhotonState(self.matrix / tr, self.basis, check=self.check)

    def is_physical(self, tol: float = 1e-9) -> bool:
        return bool(np.linalg.eigvalsh(self.matrix).min() >= -tol)

    def in_basis(self, basis: Basis | str) -> "TwoPhotonState":
        basis = Basis(basis)
        if basis == self.basis:
            return self
        if basis == Basis.BELL:
            return to_bell_basis(self)
        return to_computational_basis(self)


def make_ket(label: str) -> PolarizationKet:
    """Unit ket for one of ``H, V, D, A, R, L``."""
    try:
        amps = _KETS[label]
    except KeyError:
        raise ValueError(f"unknown polarization label {label!r}") from None
    return PolarizationKet(np.array(amps, dtype=complex), label)


def two_photon_ket(label: str) -> np.ndarray:
    """Product ket such as ``"HV"`` as a length-4 vector, first photon first."""
    if len(label) != 2:
        raise ValueError(f"two-photon label must have two letters, got {label!r}")
    return np.kron(make_ket(label[0]).amplitudes, make_ket(label[1]).amplitudes)


def product_state(a: PolarizationKet, b: PolarizationKet) -> TwoPhotonState:
    psi = np.kron(a.amplitudes, b.amplitudes)
    return TwoPhotonState(np.outer(psi, psi.conj()))


def pure_state(psi: Sequence[complex], basis: Basis | str = Basis.COMPUTATIONAL) -> TwoPhotonState:
    psi = np.asarray(psi, dtype=complex)
    return TwoPhotonState(np.outer(psi, psi.conj()), basis)


def state_from_label(label: str) -> TwoPhotonState:
    return pure_state(two_photon_ket(label))


def bell_ket(name: str) -> np.ndarray:
    """Bell ket in the computational basis; ``name`` is one of BELL_LABELS."""
    return BELL_CHANGE[:, BELL_LABELS.index(name)].copy()


def psi_minus_phi(phi: float) -> np.ndarray:
    """(HV - exp(i phi) VH)/sqrt(2) in the computational basis."""
    return SQRT1_2 * np.array([0, 1, -np.exp(1j * phi), 0], dtype=complex)


def to_bell_basis(s: TwoPhotonState) -> TwoPhotonState:
    if s.basis == Basis.BELL:
        raise ValueError("state is already in the Bell basis")
    m = BELL_CHANGE.conj().T @ s.matrix @ BELL_CHANGE
    return TwoPhotonState(m, Basis.BELL, check=s.check)


def to_computational_basis(s: TwoPhotonState) -> TwoPhotonState:
    if s.basis == Basis.COMPUTATIONAL:
        raise ValueError("state is already in the computational basis")
    m = BELL_CHANGE @ s.matrix @ BELL_CHANGE.conj().T
    return TwoPhotonState(m, Basis.COMPUTATIONAL, check=s.check)


def vectorize_matrix(m: np.ndarray) -> np.ndarray:
    """Real 16-vector (diagonal, then Re/Im of the upper triangle row by row)."""
    m = np.asarray(m)
    v = np.empty(16)
    v[:4] = np.diagonal(m).real
    for k, (i, j) in enumerate(_OFFDIAG):
        v[4 + 2 * k] = m[i, j].real
        v[5 + 2 * k] = m[i, j].imag
    return v


def devectorize_matrix(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float).reshape(16)
    m = np.diag(v[:4]).astype(complex)
    for k, (i, j) in enumerate(_OFFDIAG):
        m[i, j] = v[4 + 2 * k] + 1j * v[5 + 2 * k]
        m[j, i] = np.conj(m[i, j])
    return m


@dataclass(frozen=True)
class RhoVector:
    entries: np.ndarray
    basis: Basis = Basis.COMPUTATIONAL

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=float).reshape(16)
        object.__setattr__(self, "entries", _frozen(e))
        object.__setattr__(self, "basis", Basis(self.basis))


def vectorize(s: TwoPhotonState) -> RhoVector:
    return RhoVector(vectorize_matrix(s.matrix), s.basis)


def devectorize(v: RhoVector, check: bool = False) -> TwoPhotonState:
    # positivity is the caller's business
    return TwoPhotonState(devectorize_matrix(v.entries), v.basis, check=check)


@dataclass(frozen=True)
class TomographicSet:
    labels: tuple = TOMOGRAPHIC_LABELS

    @property
    def kets(self) -> np.ndarray:
        """(n, 4) array of product kets."""
        return np.array([two_photon_ket(lab) for lab in self.labels])

    @property
    def projectors(self) -> np.ndarray:
        k = self.kets
        return np.einsum("na,nb->nab", k, k.conj())

    def design_matrix(self) -> np.ndarray:
        """Rows map a RhoVector to the projection probabilities Tr[rho P_j]."""
        return np.array([_trace_functional(p) for p in self.projectors])


def _trace_functional(p: np.ndarray) -> np.ndarray:
    # Tr[rho P] = sum_i rho_ii P_ii + 2 Re sum_{i<j} rho_ij P_ji
    row = np.empty(16)
    row[:4] = np.diagonal(p).real
    for k, (i, j) in enumerate(_OFFDIAG):
        row[4 + 2 * k] = 2 * p[j, i].real
        row[5 + 2 * k] = -2 * p[j, i].imag
    return row


CANONICAL_SET = TomographicSet()


def state_to_json(s: TwoPhotonState) -> dict:
    return {
        "basis": s.basis.value,
        "re": s.matrix.real.tolist(),
        "im": s.matrix.imag.tolist(),
    }


def state_from_json(d: dict, check: bool = True) -> TwoPhotonState:
    m = np.array(d["re"], dtype=float) + 1j * np.array(d["im"], dtype=float)
    return TwoPhotonState(m, Basis(d["basis"]), check=check)
