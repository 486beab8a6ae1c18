"""Process tomography of a two-photon singlet-state filter."""

from .homsim import PRESETS, CountRecord, FilterModel, model_superoperator, preset, simulate
from .metrics import bell_diagnostics, concurrence, fidelity, linear_entropy, process_fidelity
from .polarization import Basis, TwoPhotonState, make_ket, product_state
from .superop import (
    ChoiMatrix,
    KrausSet,
    SuperMatrix,
    apply,
    choi_to_kraus,
    conjugate_by_phase_shifter,
    leading_projector_phase,
    normalize_superoperator,
    repair,
)
from .tomography import bootstrap, mle_process, mle_state
from .workflow import diagnose_repair

__version__ = "0.1.0"
