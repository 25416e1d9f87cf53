"""
Inferred efficiency versus detector SNR
=======================================

Squeezed light sent through an optical efficiency of 0.51 is measured with
detectors of increasing signal-to-noise ratio.  The efficiency inferred from
the squeezed and anti-squeezed variances should follow ``0.51 (S - 1) / S``.

The same sweep is available from the command line::

    quadtomo sweep --config demos/snr_sweep.json --out sweep_out
"""

from quadtomo import analysis as an
from quadtomo.channels import db_to_linear

snr_db = (3, 6, 9, 12, 15, 18)
config = an.SweepConfig(
    r=an.DEFAULT_R,
    eta_optical=0.51,
    snr=tuple(db_to_linear(v) for v in snr_db),
    n=10**6,
    seed=1,
)
print(f"pure squeezing r = {config.r:.4f}")

rows = an.snr_sweep_experiment(config)
print(f"{'S [dB]':>7} {'eta':>7} {'sigma':>7} {'theory':>7}")
for db, row in zip(snr_db, rows):
    print(f"{db:7.1f} {row['eta_inferred']:7.4f} {row['eta_sigma']:7.4f} {row['eta_predicted']:7.4f}")
