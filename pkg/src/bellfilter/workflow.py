"""Diagnose a reconstructed filter, repair it with a phase shifter and report."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .homsim import FilterModel, simulate
from .metrics import FilterReport, bell_diagnostics
from .polarization import Basis
from .superop import (
    DiagnosisError,
    PhaseDiagnosis,
    SuperMatrix,
    choi_to_kraus,
    leading_projector_phase,
    matrix_to_choi,
    normalize_superoperator,
    repair,
    superop_to_json,
)
from .tomography import mle_process


@dataclass(frozen=True)
class RepairOutcome:
    diagnosis: PhaseDiagnosis
    repaired: SuperMatrix  # normalized, Bell basis
    report: FilterReport
    kraus_weights: np.ndarray

    def to_dict(self) -> dict:
        return {
            "phi": self.diagnosis.phi,
            "phi_over_pi": self.diagnosis.phi / np.pi,
            "span_weight": self.diagnosis.weight,
            "kraus_weights": self.kraus_weights.tolist(),
            "report": self.report.to_dict(),
            "repaired": superop_to_json(self.repaired),
        }


def diagnose_repair(e: SuperMatrix) -> RepairOutcome:
    """Kraus-decompose, read the filter phase, undo it and evaluate the result.

    Raises :class:`DiagnosisError` when the leading Kraus operator is not a
    singlet-like projector.
    """
    kraus = choi_to_kraus(matrix_to_choi(e.in_basis(Basis.COMPUTATIONAL)))
    diagnosis = leading_projector_phase(kraus)
    fixed = normalize_superoperator(repair(e.in_basis(Basis.COMPUTATIONAL), diagnosis.phi))
    return RepairOutcome(diagnosis, fixed.in_basis(Basis.BELL), bell_diagnostics(fixed), kraus.weights)


def run_workflow(model: FilterModel, rate_scale: float, seed: int) -> RepairOutcome:
    """Simulate, reconstruct and diagnose in one process."""
    record = simulate(model, rate_scale, seed)
    return diagnose_repair(mle_process(record).m_hat)


__all__ = ["DiagnosisError", "RepairOutcome", "diagnose_repair", "run_workflow"]
