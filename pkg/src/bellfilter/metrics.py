"""Entanglement, purity and fidelity measures, and the repaired-filter report."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .polarization import BELL_LABELS, Basis, TwoPhotonState, bell_ket
from .superop import ChoiMatrix, SuperMatrix, apply_matrix, matrix_to_choi, normalize_superoperator

NORM_TOL = 1e-9
RATIO_CAP = 1e6

_SIGMA_YY = np.kron([[0, -1j], [1j, 0]], [[0, -1j], [1j, 0]])


def _normalized_matrix(s: TwoPhotonState, what: str) -> np.ndarray:
    if abs(s.trace - 1) > NORM_TOL:
        raise ValueError(f"{what} needs a normalized state, got trace {s.trace:.6g}")
    return s.in_basis(Basis.COMPUTATIONAL).matrix


def concurrence_matrix(rho: np.ndarray) -> float:
    # Wootters' lambdas are the singular values of sqrt(rho) Y sqrt(rho)^*, which
    # avoids square roots of round-off eigenvalues of rho rho~
    r = _psd_sqrt(rho)
    lam = np.linalg.svd(r @ _SIGMA_YY @ r.conj(), compute_uv=False)
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))


def concurrence(s: TwoPhotonState) -> float:
    """Wootters concurrence of a normalized two-qubit state."""
    return concurrence_matrix(_normalized_matrix(s, "concurrence"))


def linear_entropy_matrix(rho: np.ndarray) -> float:
    purity = np.trace(rho @ rho).real
    return float(4.0 / 3.0 * (1.0 - purity))


def linear_entropy(s: TwoPhotonState) -> float:
    """(4/3)(1 - Tr rho^2): 0 for pure states, 1 for the completely mixed state."""
    return linear_entropy_matrix(_normalized_matrix(s, "linear entropy"))


def _psd_sqrt(a: np.ndarray, rtol: float = 1e-14) -> np.ndarray:
    w, v = np.linalg.eigh(a)
    w = np.where(w > rtol * max(w.max(), 0.0), w, 0.0)
    return (v * np.sqrt(w)) @ v.conj().T


def fidelity_matrix(a: np.ndarray, b: np.ndarray) -> float:
    """Uhlmann fidelity (Tr sqrt(sqrt(a) b sqrt(a)))^2 = ||sqrt(a) sqrt(b)||_1^2, PSD inputs."""
    s = np.linalg.svd(_psd_sqrt(a) @ _psd_sqrt(b), compute_uv=False)
    return float(min(1.0, s.sum() ** 2))


def fidelity(a: TwoPhotonState, b: TwoPhotonState) -> float:
    return fidelity_matrix(_normalized_matrix(a, "fidelity"), _normalized_matrix(b, "fidelity"))


def process_fidelity(e1: SuperMatrix | ChoiMatrix, e2: SuperMatrix | ChoiMatrix) -> float:
    """Fidelity between trace-normalized Choi matrices."""
    chois = []
    for e in (e1, e2):
        c = e if isinstance(e, ChoiMatrix) else matrix_to_choi(e)
        c = c.in_basis(Basis.COMPUTATIONAL).c
        chois.append(c / np.trace(c).real)
    return fidelity_matrix(*chois)


@dataclass(frozen=True)
class FilterReport:
    singlet_fraction_on_mixed: float
    polarization_ratio: float
    ratio_saturated: bool
    concurrence_on_mixed: float
    linear_entropy_on_mixed: float
    bell_pass: dict  # Bell label -> (pass probability, output linear entropy or None)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["bell_pass"] = {k: list(v) for k, v in self.bell_pass.items()}
        return d

    def table(self) -> str:
        rows = [
            ("singlet fraction (mixed input)", f"{self.singlet_fraction_on_mixed:.4f}"),
            (
                "polarization ratio",
                (">= " if self.ratio_saturated else "") + f"{self.polarization_ratio:.2f} : 1",
            ),
            ("concurrence (mixed input)", f"{self.concurrence_on_mixed:.4f}"),
            ("linear entropy (mixed input)", f"{self.linear_entropy_on_mixed:.4f}"),
        ]
        for name, (p, sl) in self.bell_pass.items():
            rows.append((f"{name} passed / S_L", f"{p:.4f} / " + ("-" if sl is None else f"{sl:.4f}")))
        width = max(len(r[0]) for r in rows)
        return "\n".join(f"{k:<{width}}  {v}" for k, v in rows)


def bell_diagnostics(e: SuperMatrix, pass_floor: float = 1e-6) -> FilterReport:
    """Figures of merit of a normalized filter process.

    E is first normalized so the completely mixed input comes out with trace
    1/4; pass probabilities Tr E(|B><B|) then sum to one over the Bell basis.
    Output entropies are of the renormalized outputs and are None for a
    blocked input.
    """
    e = normalize_superoperator(e.in_basis(Basis.COMPUTATIONAL))
    mixed = 4 * apply_matrix(e, np.eye(4) / 4)
    intensities = np.array([np.vdot(bell_ket(b), mixed @ bell_ket(b)).real for b in BELL_LABELS])
    singlet = float(intensities[0])
    others = float(np.mean(intensities[1:]))
    saturated = others * RATIO_CAP <= singlet
    ratio = RATIO_CAP if saturated else singlet / others

    passes = {}
    for b in BELL_LABELS:
        psi = bell_ket(b)
        out = apply_matrix(e, np.outer(psi, psi.conj()))
        p = float(np.trace(out).real)
        sl = linear_entropy_matrix(out / p) if p > pass_floor else None
        passes[b] = (max(p, 0.0), sl)
    return FilterReport(
        singlet_fraction_on_mixed=singlet,
        polarization_ratio=float(ratio),
        ratio_saturated=bool(saturated),
        concurrence_on_mixed=concurrence_matrix(mixed),
        linear_entropy_on_mixed=linear_entropy_matrix(mixed),
        bell_pass=passes,
    )
