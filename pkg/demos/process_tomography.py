"""
Maximum-likelihood process tomography
=====================================

Reconstruct the filter from a simulated count grid. The Choi matrix is kept
positive by writing it as T^dagger T, so every estimate is a physical map.
"""

import time

import numpy as np

from bellfilter.homsim import model_superoperator, preset, simulate
from bellfilter.metrics import process_fidelity
from bellfilter.polarization import TOMOGRAPHIC_LABELS, Basis
from bellfilter.tomography import bootstrap, holdout_fidelities, linear_invert_process, mle_process

np.set_printoptions(precision=3, suppress=True, linewidth=140)

model = preset("paper-like")
record = simulate(model, 1e4, seed=1, inputs=TOMOGRAPHIC_LABELS + ("LL", "RR"))

# linear inversion is fast but usually not completely positive
lin = linear_invert_process(record)
print("linear inversion: min Choi eigenvalue %.4f" % lin.choi().eigvalsh().min())

t0 = time.perf_counter()
res = mle_process(record)
print("MLE: %d iterations, converged %s, %.1f s" % (res.iterations, res.converged, time.perf_counter() - t0))
print("min Choi eigenvalue %.2e, max transmission %.4f" % (res.choi_hat.eigvalsh().min(), res.choi_hat.max_transmission()))
print("fidelity to the generating process %.4f" % process_fidelity(res.m_hat, model_superoperator(model)))

# normalized so the mixed input comes out with trace 1/4
m = res.normalized().in_basis(Basis.BELL).m
print("top-left 4 x 4 block of M in the Bell basis:")
print(m[:4, :4])

# LL and RR were never used in the fit
print("held-out fidelities:", holdout_fidelities(res, record, ["LL", "RR"]))

# error bars from Poisson resampling; a handful of replicas keeps this quick
ens = bootstrap(record.subset(TOMOGRAPHIC_LABELS), n_replicas=8, seed=0)
print("bootstrap std of the 4 x 4 block (%d replicas):" % len(ens.replicas))
print(ens.std[:4, :4])
