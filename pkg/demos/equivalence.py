"""
Electronic noise as optical loss
================================

A homodyne detector with gain ``alpha`` and electronic noise ``T`` is
calibrated against its own shot noise.  Once calibrated, the noise acts on
the measured Wigner function exactly like a beam splitter of transmission
``alpha^2 / (alpha^2 + T)``.  This script checks that on a grid.
"""

import numpy as np

import quadtomo as qt
from quadtomo.channels import db_to_linear

# a squeezed state and a detector with a signal-to-noise ratio of 10 dB
state = qt.squeezed_vacuum(1.0, phi=0.3)
d = qt.DetectorModel.from_snr(db_to_linear(10.0), alpha=1.0)
print(f"alpha' = {d.alpha_prime:.4f}, eta_eq = {qt.equivalent_efficiency_from_gain(d):.4f}")

grid = qt.wigner_eval(state)
en = qt.apply_en_wigner(grid, d)
ol = qt.apply_loss_wigner(grid, qt.equivalent_efficiency_from_gain(d))
print("max |W_EN - W_OL| / peak:", np.abs(en.values - ol.values).max() / ol.values.max())

# the efficiency only depends on the SNR
for db in (3, 6.02, 10, 14, 17, 20, 30):
    s = db_to_linear(db)
    print(f"{db:6.2f} dB  ->  eta_eq = {qt.equivalent_efficiency_from_snr(s):.4f}")
