"""Squeezing analysis: loss model, efficiency inference and the SNR sweep.

Variances are in shot-noise units where the vacuum has variance 1/2.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import chi2

from . import detector as det
from .channels import (
    DetectorModel,
    apply_loss_cov,
    calibration_factor,
    equivalent_efficiency_from_snr,
    linear_to_db,
)
from .errors import ConsistencyError, DataError, FitError, IndeterminateError
from .rng import ordered_map
from .states import squeezed_vacuum

#: |2 q+ + 2 q- - 2| below this makes the efficiency 0/0
DENOMINATOR_TOL = 1e-9
#: reduced chi-square p-value below which a cos(2 theta) fit is rejected
FIT_PVALUE_MIN = 1e-6


def predict_loss_variances(r: float, eta: float) -> tuple[float, float]:
    """Extreme variances of pure squeezed vacuum ``r`` after transmission ``eta``."""
    if not r >= 0:
        raise ValueError(f"squeezing parameter must be non-negative, got {r}")
    if not 0 <= eta <= 1:
        raise ValueError(f"transmission must lie in [0, 1], got {eta}")
    vac = (1 - eta) / 2
    return eta * math.exp(2 * r) / 2 + vac, eta * math.exp(-2 * r) / 2 + vac


def infer_efficiency(q_plus_sq: float, q_minus_sq: float, tol: float = 1e-9) -> float:
    """Transmission that turns a pure squeezed state into the observed variances.

    Results above ``1 + tol`` (data below the uncertainty bound) or not
    positive raise :class:`ConsistencyError`; nothing is clamped.
    """
    denom = 2 * q_plus_sq + 2 * q_minus_sq - 2
    if abs(denom) < DENOMINATOR_TOL:
        raise IndeterminateError("variances are vacuum-like; efficiency is indeterminate")
    if not q_minus_sq < 0.5 < q_plus_sq:
        raise ConsistencyError(
            f"need q_minus < 1/2 < q_plus for squeezing, got ({q_plus_sq}, {q_minus_sq})"
        )
    eta = (2 * q_plus_sq - 1) * (1 - 2 * q_minus_sq) / denom
    if eta > 1 + tol or eta <= 0:
        raise ConsistencyError(f"variances ({q_plus_sq}, {q_minus_sq}) imply eta = {eta}")
    return eta


def efficiency_gradient(q_plus_sq: float, q_minus_sq: float) -> np.ndarray:
    """Partial derivatives of :func:`infer_efficiency` w.r.t. ``(q_plus, q_minus)``."""
    a, b = 2 * q_plus_sq - 1, 1 - 2 * q_minus_sq
    d2 = (a - b) ** 2
    # eta = a b / (a - b)
    return np.array([-2 * b * b / d2, -2 * a * a / d2])


def correct_for_loss(q_plus_sq: float, q_minus_sq: float, eta: float) -> tuple[float, float]:
    """Undo a known loss: ``(Q^2 - (1 - eta)/2) / eta`` for both quadratures."""
    if not 0 < eta <= 1:
        raise ValueError(f"transmission must lie in (0, 1], got {eta}")
    vac = (1 - eta) / 2
    if q_plus_sq <= vac or q_minus_sq <= vac:
        raise ConsistencyError("variance at or below the added vacuum noise")
    return (q_plus_sq - vac) / eta, (q_minus_sq - vac) / eta


@dataclass(frozen=True)
class SinusoidFit:
    """``variance(theta) = mean + amp_c cos(2 theta) + amp_s sin(2 theta)``."""

    q_plus_sq: float
    q_minus_sq: float
    cov: np.ndarray | None = field(default=None, repr=False)
    squeeze_phase: float = 0.0

    @property
    def sigma(self) -> tuple[float, float] | None:
        if self.cov is None:
            return None
        return float(np.sqrt(self.cov[0, 0])), float(np.sqrt(self.cov[1, 1]))


def _covers_half_period(thetas) -> bool:
    folded = np.sort(np.mod(thetas, math.pi))
    gaps = np.diff(np.concatenate([folded, [folded[0] + math.pi]]))
    return gaps.max() <= math.pi / 2 + 1e-12


def fit_extreme_variances(thetas, variances, sigma=None, rtol: float = 0.05) -> SinusoidFit:
    """Fit ``A + B cos 2theta + C sin 2theta`` and return its maximum and minimum.

    Residuals are judged by a chi-square test when ``sigma`` is given, and
    otherwise by their RMS relative to ``A`` (``rtol``).  With only two
    distinct phases modulo pi (locked-phase measurements) the raw extremes are
    returned.
    """
    thetas = np.asarray(thetas, dtype=float)
    y = np.asarray(variances, dtype=float)
    if thetas.size < 2 or thetas.shape != y.shape:
        raise FitError("need at least two (phase, variance) pairs")
    if not _covers_half_period(thetas):
        raise FitError("phases must span at least pi/2")
    distinct = np.unique(np.round(np.mod(thetas, math.pi), 12))
    if distinct.size < 3:
        hi, lo = int(np.argmax(y)), int(np.argmin(y))
        cov = None
        if sigma is not None:
            s = np.asarray(sigma, dtype=float)
            cov = np.diag([s[hi] ** 2, s[lo] ** 2])
        return SinusoidFit(float(y[hi]), float(y[lo]), cov, float(thetas[lo]))

    A = np.column_stack([np.ones_like(thetas), np.cos(2 * thetas), np.sin(2 * thetas)])
    if sigma is None:
        beta, *_ = np.linalg.lstsq(A, y, rcond=None)
        resid = y - A @ beta
        if np.sqrt(np.mean(resid**2)) > rtol * abs(beta[0]):
            raise FitError("variances are not sinusoidal in 2 theta")
        beta_cov = None
    else:
        w = 1 / np.asarray(sigma, dtype=float)
        beta, *_ = np.linalg.lstsq(A * w[:, None], y * w, rcond=None)
        beta_cov = np.linalg.inv((A * (w * w)[:, None]).T @ A)
        dof = y.size - 3
        if dof > 0:
            chisq = float(np.sum(((y - A @ beta) * w) ** 2))
            if chi2.sf(chisq, dof) < FIT_PVALUE_MIN:
                raise FitError(f"cos(2 theta) fit rejected: chi2 = {chisq:.1f} for {dof} dof")
    mean, bc, bs = beta
    amp = math.hypot(bc, bs)
    cov = None
    if beta_cov is not None:
        if amp > 0:
            J = np.array([[1, bc / amp, bs / amp], [1, -bc / amp, -bs / amp]])
        else:
            J = np.array([[1, 0, 0], [1, 0, 0]])
        cov = J @ beta_cov @ J.T
    # minimum of cos(2 theta - phi0) sits at 2 theta = phi0 + pi
    squeeze_phase = 0.5 * (math.atan2(bs, bc) + math.pi) % math.pi
    return SinusoidFit(mean + amp, mean - amp, cov, squeeze_phase)


def extreme_variances(phase_resolved, sigma=None) -> tuple[float, float]:
    """Highest and lowest quadrature variance from ``(theta, variance)`` pairs."""
    pairs = np.asarray(phase_resolved, dtype=float)
    if pairs.ndim != 2 or pairs.shape[1] != 2:
        raise ValueError("expected a sequence of (theta, variance) pairs")
    fit = fit_extreme_variances(pairs[:, 0], pairs[:, 1], sigma)
    return fit.q_plus_sq, fit.q_minus_sq


@dataclass(frozen=True)
class EfficiencyReport:
    q_plus_sq: float
    q_minus_sq: float
    eta: float
    eta_sigma: float
    snr_db: float

    def __post_init__(self):
        if not self.q_plus_sq >= self.q_minus_sq > 0:
            raise ValueError("need q_plus_sq >= q_minus_sq > 0")


def efficiency_report(q_plus_sq, q_minus_sq, q_cov=None, snr_db=math.inf, tol=None):
    """Infer the efficiency and propagate the variance covariance ``q_cov`` to it.

    ``tol`` is the slack allowed above 1; by default five standard errors.
    """
    grad = efficiency_gradient(q_plus_sq, q_minus_sq)
    sigma = 0.0 if q_cov is None else float(np.sqrt(grad @ np.asarray(q_cov) @ grad))
    if tol is None:
        tol = max(1e-9, 5 * sigma)
    eta = infer_efficiency(q_plus_sq, q_minus_sq, tol=tol)
    return EfficiencyReport(float(q_plus_sq), float(q_minus_sq), float(eta), sigma, snr_db)


@dataclass(frozen=True)
class SweepConfig:
    """Parameters of the simulated efficiency-versus-SNR measurement.

    ``snr`` holds linear signal-to-noise ratios (``inf`` for a noiseless
    detector).  The signal is measured at ``n_phases`` equally spaced
    local-oscillator phases in [0, pi), ``n`` samples in total per trace.
    """

    r: float
    eta_optical: float
    snr: tuple
    n: int = 1_000_000
    seed: int = 0
    alpha: float = 1.0
    n_phases: int = 12
    phi: float = 0.0


def squeezing_for_observed_db(db: float, eta: float) -> float:
    """Pure squeezing ``r`` that shows ``db`` of squeezing below shot noise after loss ``eta``."""
    target = 10 ** (-db / 10)
    inner = (target - (1 - eta)) / eta
    if not 0 < inner < 1:
        raise ValueError(f"{db} dB of squeezing is unreachable at eta = {eta}")
    return -0.5 * math.log(inner)


#: pure squeezing giving 3 dB observed squeezing behind an efficiency of 0.51
DEFAULT_R = squeezing_for_observed_db(3.0, 0.51)


def simulate_efficiency_point(
    detector: DetectorModel,
    r: float,
    eta_optical: float,
    n: int,
    seed: int,
    stream=(),
    n_phases: int = 12,
    phi: float = 0.0,
    workers: int = 1,
) -> dict:
    """One point of the sweep: acquire three traces, calibrate, infer efficiency."""
    source = apply_loss_cov(squeezed_vacuum(r, phi), eta_optical)
    phases = np.pi * np.arange(n_phases) / n_phases
    shot = det.acquire_trace(detector, None, "shot_noise", 0.0, n, seed, stream, workers)
    signal = det.acquire_trace(detector, source, "signal", phases, n, seed, stream, workers)
    if detector.t_noise > 0:
        en = det.acquire_trace(detector, None, "electronic_noise", 0.0, n, seed, stream, workers)
        snr_measured = det.estimate_snr(shot, en)
    else:
        snr_measured = math.inf

    alpha_prime = calibration_factor(shot.samples)
    x = det.rescale_trace(signal, alpha_prime)
    thetas, var, var_sigma, _ = det.phase_resolved_variances(x, signal.sample_phases)
    fit = fit_extreme_variances(thetas, var, var_sigma)
    q = np.array([fit.q_plus_sq, fit.q_minus_sq])
    # calibration uncertainty rescales both variances together
    q_cov = fit.cov + np.outer(q, q) * (2.0 / shot.samples.size)
    snr_set = detector.snr
    report = efficiency_report(
        q[0], q[1], q_cov, linear_to_db(snr_set) if math.isfinite(snr_set) else math.inf
    )
    return {
        "snr": snr_set,
        "snr_db": report.snr_db,
        "snr_measured": snr_measured,
        "alpha_prime": alpha_prime,
        "q_plus_sq": report.q_plus_sq,
        "q_minus_sq": report.q_minus_sq,
        "eta_inferred": report.eta,
        "eta_sigma": report.eta_sigma,
        "eta_predicted": eta_optical * equivalent_efficiency_from_snr(snr_set),
    }


def snr_sweep_experiment(config: SweepConfig, workers: int = 1) -> list[dict]:
    """Efficiency inferred from squeezing data at each detector SNR.

    Each point uses its own random substreams, so the table depends only on
    the configuration.  Rows come back in the order of ``config.snr``.
    """
    for s in config.snr:
        if not s > 1:
            raise ValueError(f"signal-to-noise ratio must exceed 1, got {s}")

    def point(k):
        d = DetectorModel.from_snr(config.snr[k], config.alpha)
        return simulate_efficiency_point(
            d,
            config.r,
            config.eta_optical,
            config.n,
            config.seed,
            ("sweep", k),
            config.n_phases,
            config.phi,
        )

    return ordered_map(point, range(len(config.snr)), workers)


def theory_curve(eta_optical: float, snr_db) -> np.ndarray:
    """``eta_optical (S - 1)/S`` on the given dB values."""
    s = 10 ** (np.asarray(snr_db, dtype=float) / 10)
    return eta_optical * (s - 1) / s


def sweep_summary(config: SweepConfig, rows: list[dict]) -> dict:
    cfg = asdict(config)
    cfg["snr"] = [float(s) for s in config.snr]
    return {"config": cfg, "seed": config.seed, "rows": rows}


def efficiency_from_trace(
    shot: det.QuadratureTrace, signal: det.QuadratureTrace, n_bins: int | None = None
) -> EfficiencyReport:
    """Efficiency from a shot-noise trace and a phase-scanned signal trace."""
    if signal.phases.size == 1:
        raise DataError("signal trace must cover several phases")
    alpha_prime = calibration_factor(shot.samples)
    x = det.rescale_trace(signal, alpha_prime)
    thetas, var, var_sigma, _ = det.phase_resolved_variances(x, signal.sample_phases, n_bins)
    fit = fit_extreme_variances(thetas, var, var_sigma)
    q = np.array([fit.q_plus_sq, fit.q_minus_sq])
    q_cov = fit.cov
    if n_bins is not None:
        # a bin of width w averages cos(2 theta) down by sin(w)/w
        w = 2 * math.pi / n_bins
        k = math.sin(w) / w
        J = 0.5 * np.array([[1 + 1 / k, 1 - 1 / k], [1 - 1 / k, 1 + 1 / k]])
        q = J @ q
        q_cov = J @ q_cov @ J.T
    q_cov = q_cov + np.outer(q, q) * (2.0 / shot.samples.size)
    return efficiency_report(q[0], q[1], q_cov)
