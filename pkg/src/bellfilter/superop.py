"""Superoperators on two-photon states as a real 16x16 matrix, Choi matrix or Kraus list.

The Choi matrix uses C = sum_ij E(|i><j|) (x) |i><j|, output factor first, so
``C.reshape(4, 4, 4, 4)[a, i, b, j] == E(|i><j|)[a, b]`` and a Kraus operator
K contributes ``K.reshape(16)`` as a Choi eigenvector.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .polarization import (
    BELL_CHANGE,
    Basis,
    TwoPhotonState,
    _frozen,
    devectorize_matrix,
    vectorize_matrix,
)

CP_TOL = 1e-8
KRAUS_CUTOFF = 1e-10


class NotCompletelyPositiveError(ValueError):
    pass


class DiagnosisError(ValueError):
    """The leading Kraus operator does not look like a Psi- filter."""

    def __init__(self, message: str, weight: float):
        super().__init__(message)
        self.weight = weight


@dataclass(frozen=True)
class SuperMatrix:
    m: np.ndarray
    basis: Basis = Basis.COMPUTATIONAL

    def __post_init__(self):
        m = np.asarray(self.m, dtype=float)
        if m.shape != (16, 16):
            raise ValueError(f"superoperator matrix must be 16x16, got {m.shape}")
        object.__setattr__(self, "m", _frozen(m))
        object.__setattr__(self, "basis", Basis(self.basis))

    def in_basis(self, basis: Basis | str) -> "SuperMatrix":
        basis = Basis(basis)
        if basis == self.basis:
            return self
        w = BELL_CHANGE if basis == Basis.BELL else BELL_CHANGE.conj().T
        # new-basis matrices r map to old-basis w r w^dagger
        to_old = superop_from_function(lambda r: w @ r @ w.conj().T).m
        to_new = superop_from_function(lambda r: w.conj().T @ r @ w).m
        return SuperMatrix(to_new @ self.m @ to_old, basis)

    def choi(self) -> "ChoiMatrix":
        return matrix_to_choi(self)

    def is_cp(self, tol: float = CP_TOL) -> bool:
        return matrix_to_choi(self).is_psd(tol)

    def is_trace_nonincreasing(self, tol: float = CP_TOL) -> bool:
        return matrix_to_choi(self).is_trace_nonincreasing(tol)


@dataclass(frozen=True)
class ChoiMatrix:
    c: np.ndarray
    basis: Basis = Basis.COMPUTATIONAL

    def __post_init__(self):
        c = np.asarray(self.c, dtype=complex)
        if c.shape != (16, 16):
            raise ValueError(f"Choi matrix must be 16x16, got {c.shape}")
        if np.max(np.abs(c - c.conj().T)) > 1e-10:
            raise ValueError("Choi matrix is not Hermitian")
        object.__setattr__(self, "c", _frozen(0.5 * (c + c.conj().T)))
        object.__setattr__(self, "basis", Basis(self.basis))

    def in_basis(self, basis: Basis | str) -> "ChoiMatrix":
        if Basis(basis) == self.basis:
            return self
        return matrix_to_choi(choi_to_matrix(self).in_basis(basis))

    def eigvalsh(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.c)

    def is_psd(self, tol: float = CP_TOL) -> bool:
        return bool(self.eigvalsh().min() >= -tol)

    def partial_trace_output(self) -> np.ndarray:
        """Tr_out C, equal to the transpose of sum_l K_l^dagger K_l."""
        return np.einsum("aiaj->ij", self.c.reshape(4, 4, 4, 4))

    def max_transmission(self) -> float:
        """Largest eigenvalue of Tr_out C (the best-case pass probability)."""
        return float(np.linalg.eigvalsh(self.partial_trace_output()).max())

    def is_trace_nonincreasing(self, tol: float = CP_TOL) -> bool:
        return self.max_transmission() <= 1 + tol


@dataclass(frozen=True)
class KrausSet:
    """Kraus operators ordered by descending weight Tr[K^dagger K]."""

    operators: tuple
    basis: Basis = Basis.COMPUTATIONAL

    def __post_init__(self):
        ops = tuple(_frozen(np.asarray(k, dtype=complex).reshape(4, 4)) for k in self.operators)
        object.__setattr__(self, "operators", ops)
        object.__setattr__(self, "basis", Basis(self.basis))

    def __len__(self):
        return len(self.operators)

    @property
    def weights(self) -> np.ndarray:
        return np.array([np.vdot(k, k).real for k in self.operators])

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return sum((k @ rho @ k.conj().T for k in self.operators), np.zeros((4, 4), complex))

    def in_basis(self, basis: Basis | str) -> "KrausSet":
        basis = Basis(basis)
        if basis == self.basis:
            return self
        w = BELL_CHANGE if basis == Basis.BELL else BELL_CHANGE.conj().T
        return KrausSet(tuple(w.conj().T @ k @ w for k in self.operators), basis)


class PhaseDiagnosis(NamedTuple):
    phi: float
    weight: float


def superop_from_function(f: Callable[[np.ndarray], np.ndarray], basis: Basis | str = Basis.COMPUTATIONAL) -> SuperMatrix:
    """Matrix of a real-linear map on Hermitian 4x4 matrices, column by column."""
    cols = [vectorize_matrix(f(devectorize_matrix(e))) for e in np.eye(16)]
    return SuperMatrix(np.array(cols).T, basis)


def identity(basis: Basis | str = Basis.COMPUTATIONAL) -> SuperMatrix:
    return SuperMatrix(np.eye(16), basis)


def ideal_filter(basis: Basis | str = Basis.BELL) -> SuperMatrix:
    """Perfect singlet filter: M_ij = 1 only for i = j = Psi- in the Bell basis."""
    m = np.zeros((16, 16))
    m[0, 0] = 1.0
    return SuperMatrix(m, Basis.BELL).in_basis(basis)


def unitary_superop(u: np.ndarray, basis: Basis | str = Basis.COMPUTATIONAL) -> SuperMatrix:
    u = np.asarray(u, dtype=complex)
    return superop_from_function(lambda r: u @ r @ u.conj().T, basis)


def apply(e: SuperMatrix, s: TwoPhotonState) -> TwoPhotonState:
    if e.basis != s.basis:
        raise ValueError(f"basis mismatch: superoperator {e.basis.value}, state {s.basis.value}")
    out = devectorize_matrix(e.m @ vectorize_matrix(s.matrix))
    return TwoPhotonState(out, s.basis, check=False)


def apply_matrix(e: SuperMatrix, rho: np.ndarray) -> np.ndarray:
    return devectorize_matrix(e.m @ vectorize_matrix(rho))


def compose(e2: SuperMatrix, e1: SuperMatrix) -> SuperMatrix:
    """e2 after e1."""
    if e2.basis != e1.basis:
        raise ValueError("basis mismatch in composition")
    return SuperMatrix(e2.m @ e1.m, e1.basis)


def matrix_to_choi(e: SuperMatrix) -> ChoiMatrix:
    c = np.zeros((4, 4, 4, 4), dtype=complex)
    for i in range(4):
        for j in range(4):
            eij = np.zeros((4, 4), complex)
            eij[i, j] = 1.0
            herm = 0.5 * (eij + eij.T)
            anti = (eij - eij.T) / 2j
            c[:, i, :, j] = apply_matrix(e, herm) + 1j * apply_matrix(e, anti)
    return ChoiMatrix(c.reshape(16, 16), e.basis)


def choi_apply(c: ChoiMatrix, rho: np.ndarray) -> np.ndarray:
    return np.einsum("aibj,ij->ab", c.c.reshape(4, 4, 4, 4), rho)


def choi_to_matrix(c: ChoiMatrix) -> SuperMatrix:
    return superop_from_function(lambda r: choi_apply(c, r), c.basis)


def kraus_to_choi(k: KrausSet) -> ChoiMatrix:
    vecs = np.array([op.reshape(16) for op in k.operators]).reshape(-1, 16)
    return ChoiMatrix(vecs.T @ vecs.conj(), k.basis)


def kraus_to_matrix(k: KrausSet) -> SuperMatrix:
    return superop_from_function(k.apply, k.basis)


def choi_to_kraus(c: ChoiMatrix, cutoff: float = KRAUS_CUTOFF) -> KrausSet:
    """Canonical (orthogonal) Kraus operators from the Choi eigendecomposition."""
    lam, vecs = np.linalg.eigh(c.c)
    if lam.min() < -CP_TOL:
        raise NotCompletelyPositiveError(f"Choi matrix has eigenvalue {lam.min():.3e}")
    order = np.argsort(lam)[::-1]
    lam, vecs = lam[order], vecs[:, order]
    if lam[0] <= 0:
        return KrausSet((), c.basis)
    keep = lam > cutoff * lam[0]
    ops = tuple(np.sqrt(l) * v.reshape(4, 4) for l, v in zip(lam[keep], vecs[:, keep].T))
    return KrausSet(ops, c.basis)


def leading_projector_phase(k: KrausSet, min_weight: float = 0.9, max_runner_up: float = 0.5) -> PhaseDiagnosis:
    """Phase phi of the state (HV - exp(i phi) VH)/sqrt(2) selected by the leading Kraus operator.

    The dominant right-singular vector of K_1 is projected on span{HV, VH} and
    phi = pi + arg(c_VH / c_HV), so the singlet itself gives 0. Raises
    :class:`DiagnosisError` if K_1 does not dominate (second weight above
    ``max_runner_up`` times the first), if less than ``min_weight`` of the
    vector lies in the span, or if the in-span part is nearly a product state
    (concurrence below 1/2).
    """
    if len(k) == 0:
        raise ValueError("empty Kraus set")
    w = k.weights
    if len(w) > 1 and w[1] > max_runner_up * w[0]:
        raise DiagnosisError(f"no dominant Kraus operator (weights {w[0]:.3g}, {w[1]:.3g})", float("nan"))
    k1 = k.in_basis(Basis.COMPUTATIONAL).operators[0]
    _, _, vh = np.linalg.svd(k1)
    v = vh[0].conj()
    weight = float(abs(v[1]) ** 2 + abs(v[2]) ** 2)
    if weight < min_weight:
        raise DiagnosisError(
            f"leading Kraus operator has only {weight:.3f} weight in span{{HV, VH}}", weight
        )
    if 2 * abs(v[1] * v[2]) / weight < 0.5:
        raise DiagnosisError("leading Kraus operator selects a nearly separable state", weight)
    phi = np.pi + np.angle(v[2] / v[1])
    phi = float(np.angle(np.exp(1j * phi)))
    if phi <= -np.pi + 1e-15:
        phi = np.pi
    return PhaseDiagnosis(phi, weight)


def phase_shifter(phi: float, basis: Basis | str = Basis.COMPUTATIONAL) -> np.ndarray:
    """Unitary taking VH -> exp(-i phi) VH, other product states untouched."""
    u = np.diag([1, 1, np.exp(-1j * phi), 1]).astype(complex)
    if Basis(basis) == Basis.BELL:
        u = BELL_CHANGE.conj().T @ u @ BELL_CHANGE
    return u


def conjugate_by_phase_shifter(e: SuperMatrix, phi: float) -> SuperMatrix:
    """Sandwich E between the phase shifter U(phi) and its inverse.

    E'(rho) = U^dagger E(U rho U^dagger) U with U = diag(1, 1, exp(-i phi), 1)
    in (HH, HV, VH, VV) order.
    """
    u = phase_shifter(phi, e.basis)
    pre = unitary_superop(u, e.basis)
    post = unitary_superop(u.conj().T, e.basis)
    return SuperMatrix(post.m @ e.m @ pre.m, e.basis)


def normalize_superoperator(e: SuperMatrix) -> SuperMatrix:
    """Rescale so the completely mixed input comes out with trace 1/4."""
    tr = np.trace(apply_matrix(e, np.eye(4) / 4)).real
    if tr <= 0:
        raise ValueError("degenerate process: zero output for the completely mixed input")
    return SuperMatrix(e.m * (0.25 / tr), e.basis)


def repair(e: SuperMatrix, phi: float) -> SuperMatrix:
    """Undo a diagnosed filter phase: the state (HV - exp(i phi) VH) becomes the singlet."""
    return conjugate_by_phase_shifter(e, -phi)


def superop_to_json(obj) -> dict:
    if isinstance(obj, SuperMatrix):
        return {"form": "matrix", "basis": obj.basis.value, "data": obj.m.tolist()}
    if isinstance(obj, ChoiMatrix):
        return {"form": "choi", "basis": obj.basis.value, "re": obj.c.real.tolist(), "im": obj.c.imag.tolist()}
    if isinstance(obj, KrausSet):
        return {
            "form": "kraus",
            "basis": obj.basis.value,
            "re": [k.real.tolist() for k in obj.operators],
            "im": [k.imag.tolist() for k in obj.operators],
        }
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def superop_from_json(d: dict):
    basis = Basis(d["basis"])
    form = d["form"]
    if form == "matrix":
        return SuperMatrix(np.array(d["data"], dtype=float), basis)
    if form == "choi":
        return ChoiMatrix(np.array(d["re"]) + 1j * np.array(d["im"]), basis)
    if form == "kraus":
        ops: Sequence = [np.array(r) + 1j * np.array(i) for r, i in zip(d["re"], d["im"])]
        return KrausSet(tuple(ops), basis)
    raise ValueError(f"unknown superoperator form {form!r}")
