"""
Two-photon polarization states
==============================

Product states from single-photon labels, the Bell basis, and the real
16-vector that the process matrix acts on.
"""

import numpy as np

from bellfilter.polarization import (
    BELL_LABELS,
    TomographicSet,
    bell_ket,
    devectorize,
    make_ket,
    product_state,
    psi_minus_phi,
    to_bell_basis,
    vectorize,
)

np.set_printoptions(precision=3, suppress=True)

# R and L differ only in the sign of the V amplitude
for lab in "HVDARL":
    print(lab, make_ket(lab).amplitudes)

# HV is an equal superposition of Psi- and Psi+
hv = product_state(make_ket("H"), make_ket("V"))
print("HV in the Bell basis (order", BELL_LABELS, ")")
print(to_bell_basis(hv).matrix.real)

# the twisted singlet at phi = pi is Psi+ up to a global phase
print("|<Psi+|Psi-_pi>|^2 =", abs(np.vdot(bell_ket("Psi+"), psi_minus_phi(np.pi))) ** 2)

# density matrix <-> real 16-vector: diagonal first, then Re/Im of the upper triangle
v = vectorize(to_bell_basis(hv))
print("vector:", v.entries)
print("round trip exact:", np.array_equal(devectorize(v).matrix, to_bell_basis(hv).matrix))

# the 16 analyzer settings are informationally complete
d = TomographicSet().design_matrix()
print("design matrix rank", np.linalg.matrix_rank(d), "condition number %.1f" % np.linalg.cond(d))
