"""Optical homodyne tomography with optical loss and detector electronic noise.

Electronic noise calibrated on the vacuum acts on the reconstructed state like
an absorber of transmission ``(S - 1)/S``, ``S`` being the detector's
signal-to-noise ratio.  The modules simulate both effects, the detector and
its calibration, reconstruction, and the efficiency analysis of squeezing data.
"""

from .analysis import (
    EfficiencyReport,
    SweepConfig,
    correct_for_loss,
    extreme_variances,
    infer_efficiency,
    predict_loss_variances,
    snr_sweep_experiment,
)
from .channels import (
    DetectorModel,
    apply_en_wigner,
    apply_loss_cov,
    apply_loss_wigner,
    calibration_factor,
    calibration_factor_stderr,
    en_vacuum_distribution,
    equivalent_efficiency_from_gain,
    equivalent_efficiency_from_snr,
    snr,
)
from .detector import (
    QuadratureTrace,
    TraceKind,
    acquire_trace,
    estimate_snr,
    measure_voltage,
    rescale_trace,
    sample_quadrature,
)
from .states import (
    GaussianState,
    GridSpec,
    MarginalDensity,
    WignerGrid,
    marginal,
    squeezed_vacuum,
    vacuum,
    wigner_eval,
)
from .tomography import (
    GaussianFit,
    MarginalHistogram,
    fit_gaussian_state,
    histogram,
    inverse_radon,
    radon_project,
)

__version__ = "0.1.0"
