import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st_

from quadtomo import analysis as an
from quadtomo import channels as ch
from quadtomo import detector as det
from quadtomo import states as st
from quadtomo.errors import ConsistencyError, DataError, FitError, IndeterminateError

LOSSY_R1_HALF = (2.0972640247326626, 0.2838338208091532)


def test_predicted_variances():
    assert an.predict_loss_variances(1.0, 0.5) == pytest.approx(LOSSY_R1_HALF, rel=1e-15)
    assert an.predict_loss_variances(0.0, 0.3) == pytest.approx((0.5, 0.5))
    assert an.predict_loss_variances(2.0, 0.0) == (0.5, 0.5)


def test_predicted_variances_agree_with_covariance_model():
    s = ch.apply_loss_cov(st.squeezed_vacuum(0.8), 0.37)
    assert an.predict_loss_variances(0.8, 0.37) == pytest.approx(
        (s.cov[1, 1], s.cov[0, 0]), rel=1e-14
    )


def test_infer_efficiency_examples():
    assert an.infer_efficiency(*LOSSY_R1_HALF) == pytest.approx(0.5, rel=1e-14)
    assert an.infer_efficiency(math.exp(1) / 2, math.exp(-1) / 2) == pytest.approx(1.0)


@pytest.mark.parametrize("q", [(0.5, 0.5), (0.7, 0.3), (0.5 + 1e-12, 0.5)])
def test_infer_efficiency_indeterminate(q):
    with pytest.raises(IndeterminateError):
        an.infer_efficiency(*q)


@pytest.mark.parametrize(
    "q",
    [
        (2.0, 0.1),  # below the uncertainty bound, eta > 1
        (0.6, 0.55),  # no squeezing
        (0.45, 0.3),  # no anti-squeezing
    ],
)
def test_infer_efficiency_inconsistent(q):
    with pytest.raises(ConsistencyError):
        an.infer_efficiency(*q)


def test_infer_efficiency_tolerance_above_one():
    qp, qm = math.exp(1) / 2, math.exp(-1) / 2 * (1 - 1e-4)
    with pytest.raises(ConsistencyError):
        an.infer_efficiency(qp, qm)
    assert an.infer_efficiency(qp, qm, tol=1e-3) > 1


def test_efficiency_gradient_matches_finite_differences():
    qp, qm, h = 1.7, 0.31, 1e-6
    num = [
        (an.infer_efficiency(qp + h, qm) - an.infer_efficiency(qp - h, qm)) / (2 * h),
        (an.infer_efficiency(qp, qm + h) - an.infer_efficiency(qp, qm - h)) / (2 * h),
    ]
    np.testing.assert_allclose(an.efficiency_gradient(qp, qm), num, rtol=1e-7)


@settings(max_examples=300, deadline=None)
@given(r=st_.floats(0.05, 2.5), eta=st_.floats(0.05, 1.0))
def test_infer_inverts_prediction(r, eta):
    qp, qm = an.predict_loss_variances(r, eta)
    assert an.infer_efficiency(qp, qm) == pytest.approx(eta, rel=1e-9)
    assert an.correct_for_loss(qp, qm, eta) == pytest.approx(
        (math.exp(2 * r) / 2, math.exp(-2 * r) / 2), rel=1e-9
    )


@settings(max_examples=200, deadline=None)
@given(r=st_.floats(0.05, 2.0), e1=st_.floats(0.1, 1.0), e2=st_.floats(0.1, 1.0))
def test_serial_losses_multiply(r, e1, e2):
    s = ch.apply_loss_cov(ch.apply_loss_cov(st.squeezed_vacuum(r), e1), e2)
    assert an.infer_efficiency(s.cov[1, 1], s.cov[0, 0]) == pytest.approx(e1 * e2, rel=1e-9)


def test_correct_for_loss_rejects():
    with pytest.raises(ConsistencyError):
        an.correct_for_loss(1.0, 0.2, 0.5)
    with pytest.raises(ValueError):
        an.correct_for_loss(1.0, 0.4, 0.0)


PH12 = np.pi * np.arange(12) / 12


def _variances(r, eta, phi, thetas):
    s = ch.apply_loss_cov(st.squeezed_vacuum(r, phi), eta)
    return np.array([st.marginal(s, t).variance for t in thetas])


def test_extreme_variances_exact_sinusoid():
    v = _variances(1.0, 0.5, 0.37, PH12)
    fit = an.fit_extreme_variances(PH12, v)
    assert (fit.q_plus_sq, fit.q_minus_sq) == pytest.approx(LOSSY_R1_HALF, abs=1e-9)
    assert fit.squeeze_phase == pytest.approx(0.37, abs=1e-9)
    pairs = np.column_stack([PH12, v])
    assert an.extreme_variances(pairs) == pytest.approx(LOSSY_R1_HALF, abs=1e-9)


def test_extreme_variances_locked_phases():
    v = _variances(1.0, 0.5, 0.0, [0.0, np.pi / 2])
    fit = an.fit_extreme_variances([0.0, np.pi / 2], v, sigma=[0.01, 0.01])
    assert (fit.q_plus_sq, fit.q_minus_sq) == pytest.approx(LOSSY_R1_HALF, rel=1e-15)
    np.testing.assert_allclose(fit.sigma, [0.01, 0.01])


def test_extreme_variances_noisy_within_errors(gen):
    n = 100_000
    s = ch.apply_loss_cov(st.squeezed_vacuum(0.55, 0.2), 0.8)
    theta = np.repeat(PH12, n)
    x = det.sample_quadrature(s, theta, gen)
    th, var, sig, _ = det.phase_resolved_variances(x, theta)
    fit = an.fit_extreme_variances(th, var, sig)
    truth = an.predict_loss_variances(0.55, 0.8)
    assert abs(fit.q_plus_sq - truth[0]) < 3 * fit.sigma[0]
    assert abs(fit.q_minus_sq - truth[1]) < 3 * fit.sigma[1]


def test_extreme_variances_rejects():
    with pytest.raises(FitError):
        an.fit_extreme_variances([0.0, 0.2, 0.4], [1.0, 0.8, 0.6])  # under pi/2
    with pytest.raises(FitError):
        an.fit_extreme_variances(PH12, np.where(np.arange(12) % 2, 2.0, 0.2))
    with pytest.raises(FitError):
        an.fit_extreme_variances(
            PH12, np.where(np.arange(12) % 2, 2.0, 0.2), sigma=np.full(12, 0.01)
        )
    with pytest.raises(FitError):
        an.fit_extreme_variances([0.0], [1.0])
    with pytest.raises(ValueError):
        an.extreme_variances([1.0, 2.0, 3.0])


def test_report_propagates_uncertainty():
    qp, qm = LOSSY_R1_HALF
    rep = an.efficiency_report(qp, qm, np.diag([1e-4, 1e-6]), snr_db=10.0)
    g = an.efficiency_gradient(qp, qm)
    assert rep.eta == pytest.approx(0.5)
    assert rep.eta_sigma == pytest.approx(math.sqrt(g[0] ** 2 * 1e-4 + g[1] ** 2 * 1e-6))
    assert an.efficiency_report(qp, qm).eta_sigma == 0.0


def test_squeezing_for_observed_db():
    r = an.squeezing_for_observed_db(3.0, 0.51)
    _, qm = an.predict_loss_variances(r, 0.51)
    assert 10 * math.log10(2 * qm) == pytest.approx(-3.0, abs=1e-12)
    assert an.DEFAULT_R == r
    with pytest.raises(ValueError):
        an.squeezing_for_observed_db(4.0, 0.51)  # beyond -10 log10(1 - eta)


def test_theory_curve():
    np.testing.assert_allclose(
        an.theory_curve(0.51, [20.0, 10 * math.log10(4)]), [0.51 * 0.99, 0.51 * 0.75]
    )
    assert 0.51 * 0.99 == pytest.approx(0.5049)


def test_noiseless_detector_infers_optical_efficiency():
    row = an.simulate_efficiency_point(ch.DetectorModel(1.0, 0.0), 0.8, 0.7, 200_000, 3)
    assert row["eta_predicted"] == 0.7
    assert row["snr_measured"] == math.inf
    assert abs(row["eta_inferred"] - 0.7) < 3 * row["eta_sigma"]


def test_single_point_agrees_with_equivalent_loss():
    d = ch.DetectorModel.from_snr(10.0)
    row = an.simulate_efficiency_point(d, 0.55, 1.0, 10**6, 0)
    assert row["eta_predicted"] == pytest.approx(0.9)
    assert abs(row["eta_inferred"] - 0.9) < 3 * row["eta_sigma"]
    assert row["snr_measured"] == pytest.approx(10.0, rel=0.01)


def test_error_bars_are_calibrated():
    # pulls over independent repetitions should have unit spread
    d = ch.DetectorModel.from_snr(4.0)
    pulls = []
    for seed in range(40):
        row = an.simulate_efficiency_point(d, 1.0, 0.8, 50_000, seed)
        pulls.append((row["eta_inferred"] - row["eta_predicted"]) / row["eta_sigma"])
    assert abs(np.mean(pulls)) < 0.5
    assert 0.7 < np.std(pulls, ddof=1) < 1.35


def test_sweep_is_deterministic_and_ordered():
    cfg = an.SweepConfig(r=1.0, eta_optical=0.6, snr=(2.0, 20.0, 200.0), n=50_000, seed=4)
    rows = an.snr_sweep_experiment(cfg)
    assert [r["snr"] for r in rows] == pytest.approx([2.0, 20.0, 200.0])
    assert rows == an.snr_sweep_experiment(cfg, workers=3)
    assert rows[0]["eta_inferred"] < rows[2]["eta_inferred"]
    summary = an.sweep_summary(cfg, rows)
    assert summary["config"]["snr"] == [2.0, 20.0, 200.0]
    with pytest.raises(ValueError):
        an.snr_sweep_experiment(an.SweepConfig(r=1.0, eta_optical=0.5, snr=(1.0,)))


@pytest.mark.parametrize("n_bins", [None, 48])
def test_efficiency_from_trace(n_bins):
    d = ch.DetectorModel.from_snr(20.0)
    src = ch.apply_loss_cov(st.squeezed_vacuum(0.9), 0.8)
    phases = "ramp" if n_bins else PH12
    shot = det.acquire_trace(d, None, "shot_noise", n=10**6, seed=2)
    sig = det.acquire_trace(d, src, "signal", phases, n=10**6, seed=2)
    rep = an.efficiency_from_trace(shot, sig, n_bins)
    assert abs(rep.eta - 0.8 * 0.95) < 3 * rep.eta_sigma


def test_efficiency_from_trace_needs_phases():
    d = ch.DetectorModel(1.0, 0.0)
    shot = det.acquire_trace(d, None, "shot_noise", n=100)
    with pytest.raises(DataError):
        an.efficiency_from_trace(shot, shot)
