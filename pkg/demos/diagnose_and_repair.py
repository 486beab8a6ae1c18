"""
Diagnose and repair
===================

The leading Kraus operator of the reconstructed filter is close to a
projector onto a singlet with a twisted relative phase. A phase shifter in
one input arm undoes the twist; the repaired map is then scored with the
Bell-state statistics.
"""

import numpy as np

from bellfilter.homsim import FilterModel, model_superoperator, preset, simulate
from bellfilter.metrics import bell_diagnostics
from bellfilter.superop import DiagnosisError, choi_to_kraus, matrix_to_choi
from bellfilter.tomography import mle_process
from bellfilter.workflow import diagnose_repair

model = preset("paper-like")
res = mle_process(simulate(model, 1e4, seed=2))

kraus = choi_to_kraus(res.choi_hat)
print("Kraus weights:", np.round(kraus.weights, 4))

outcome = diagnose_repair(res.m_hat)
print("diagnosed phase %.4f pi (true %.2f pi), span weight %.4f"
      % (outcome.diagnosis.phi / np.pi, model.phi / np.pi, outcome.diagnosis.weight))

print("\nbefore repair")
print(bell_diagnostics(res.m_hat).table())
print("\nafter repair")
print(outcome.report.table())

# a fully dephasing filter has no coherent leading operator: diagnosis refuses
try:
    diagnose_repair(model_superoperator(FilterModel(visibility=0.0)))
except DiagnosisError as err:
    print("\nV = 0:", err)
