"""
Entanglement and purity of filter outputs
=========================================

Concurrence, linear entropy and Uhlmann fidelity on a few reference states,
then on the reconstructed output for an HV input.
"""

import numpy as np

from bellfilter.homsim import preset, simulate
from bellfilter.metrics import concurrence_matrix, fidelity_matrix, linear_entropy_matrix
from bellfilter.polarization import bell_ket, psi_minus_phi
from bellfilter.tomography import mle_state

singlet = np.outer(bell_ket("Psi-"), bell_ket("Psi-").conj())

# Werner states: entangled only above p = 1/3
for p in np.linspace(0, 1, 6):
    w = p * singlet + (1 - p) * np.eye(4) / 4
    print(f"p = {p:.1f}  C = {concurrence_matrix(w):.3f}  S_L = {linear_entropy_matrix(w):.3f}")

# HV input through the paper-like filter
record = simulate(preset("paper-like"), 1e4, seed=0)
res = mle_state(record.row("HV"), record.rate_scale)
rho = res.rho_hat.matrix
print("pass probability of HV: %.3f" % np.trace(rho).real)
rho = rho / np.trace(rho).real
# the filter selects the twisted singlet, not Psi- itself
twisted = psi_minus_phi(preset("paper-like").phi)
twisted = np.outer(twisted, twisted.conj())
print("C = %.3f, S_L = %.3f" % (concurrence_matrix(rho), linear_entropy_matrix(rho)))
print("fidelity to Psi-: %.3f, to the twisted singlet: %.3f" % (fidelity_matrix(rho, singlet), fidelity_matrix(rho, twisted)))
np.set_printoptions(precision=3, suppress=True)
print("real part in the computational basis (HH, HV, VH, VV):")
print(rho.real)
