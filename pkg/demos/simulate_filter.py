"""
Simulating the HOM singlet filter
=================================

The filter passes the antisymmetric polarization state when both photons
leave through different ports. Partial distinguishability (V < 1) lets the
other states leak through, dephased.
"""

import numpy as np

from bellfilter.homsim import dip_scan, expected_rates, model_superoperator, preset, simulate
from bellfilter.polarization import TOMOGRAPHIC_LABELS, state_from_label

model = preset("paper-like")
print(model)

# dip scan: HH coincidences vanish for perfect overlap, the singlet is untouched
overlaps = np.linspace(0, 1, 6)
for lab in ("HH", "HV"):
    print(lab, np.round(dip_scan(preset("ideal"), state_from_label(lab), overlaps), 3))

# expected counts for the 16 x 16 grid and one Poisson draw of it
rates = expected_rates(model_superoperator(model), rate_scale=1e4)
record = simulate(model, rate_scale=1e4, seed=7)
print("row totals (expected / observed)")
for lab, r, n in zip(TOMOGRAPHIC_LABELS, rates, record.counts):
    print(f"  {lab}  {r.sum():9.1f}  {n.sum():7d}")

# the same seed gives the same counts, cell by cell
assert record == simulate(model, rate_scale=1e4, seed=7)

record.to_csv("paper_like_counts.csv")
print("wrote paper_like_counts.csv and its .meta.json sidecar")
