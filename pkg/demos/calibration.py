"""
Calibrating quadrature units from shot noise
============================================

The vacuum has variance 1/2, so a shot-noise trace fixes the conversion from
volts to quadrature units: ``alpha' = sqrt(2 <V^2>)``.  Here we simulate the
three traces of a measurement and watch the estimator converge.
"""

import numpy as np

import quadtomo as qt
from quadtomo import detector as det

d = qt.DetectorModel(alpha=2.0, t_noise=1.0)
print(f"true alpha' = {d.alpha_prime:.5f}, S = {d.snr:.2f}")

for n in (10**3, 10**4, 10**5, 10**6):
    shot = det.acquire_trace(d, None, "shot_noise", n=n, seed=1)
    a = qt.calibration_factor(shot.samples)
    se = qt.calibration_factor_stderr(shot.samples)
    print(f"n = {n:>7d}   alpha' = {a:.5f} +- {se:.5f}")

# electronic noise and shot noise together give the SNR
en = det.acquire_trace(d, None, "electronic_noise", n=10**6, seed=2)
shot = det.acquire_trace(d, None, "shot_noise", n=10**6, seed=3)
print(f"measured S = {det.estimate_snr(shot, en):.3f}")

# calibrated signal variances at the squeezed and anti-squeezed phases
sig = det.acquire_trace(d, qt.squeezed_vacuum(0.55), "signal", [0.0, np.pi / 2], n=10**6, seed=4)
x = det.rescale_trace(sig, qt.calibration_factor(shot.samples))
theta, var, sigma, _ = det.phase_resolved_variances(x, sig.sample_phases)
for th, v, s in zip(theta, var, sigma):
    print(f"theta = {th:.3f}: <X^2> = {v:.4f} +- {s:.4f}")
print("expected after equivalent loss:", qt.predict_loss_variances(0.55, qt.equivalent_efficiency_from_gain(d)))
