"""
Reconstructing a Wigner function
================================

Quadrature samples at twelve local-oscillator phases are binned into
histograms.  Filtered back-projection turns them into a Wigner function; a
moment fit gives the Gaussian state directly, with error bars.
"""

import numpy as np

import quadtomo as qt
from quadtomo import detector as det
from quadtomo import tomography as tomo

truth = qt.apply_loss_cov(qt.squeezed_vacuum(0.55, phi=0.3), 0.8)
d = qt.DetectorModel(1.0, 0.0)
phases = np.pi * np.arange(12) / 12
trace = det.acquire_trace(d, truth, "signal", phases, n=12 * 10**5, seed=5)
x = det.rescale_trace(trace, d.alpha_prime)

edges = np.linspace(-6, 6, 61)
hists = [tomo.histogram(x[trace.sample_phases == th], th, bins=edges) for th in phases]

w = tomo.inverse_radon(hists)
_, cov = w.moments()
print("FBP covariance:\n", np.round(cov, 4))

fit = tomo.fit_gaussian_state(hists)
print("fitted covariance:\n", np.round(fit.cov, 4))
print("standard errors (xx, xp, pp):", np.round(fit.cov_sigma, 4))
print("true covariance:\n", np.round(truth.cov, 4))
