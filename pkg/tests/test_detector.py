import math

import numpy as np
import pytest

from quadtomo import channels as ch
from quadtomo import detector as det
from quadtomo import states as st
from quadtomo.errors import DataError

N = 10**6


def _sigma_var(var, n):
    return var * math.sqrt(2 / (n - 1))


@pytest.mark.parametrize("theta, expected", [(0.0, np.exp(-2) / 2), (np.pi / 2, np.exp(2) / 2)])
def test_sample_quadrature_variance(gen, theta, expected):
    x = det.sample_quadrature(st.squeezed_vacuum(1.0), theta, gen, size=N)
    assert abs(x.var() - expected) < 3 * _sigma_var(expected, N)
    assert abs(x.mean()) < 3 * math.sqrt(expected / N)


def test_sample_quadrature_per_sample_phases(gen):
    theta = np.tile([0.0, np.pi / 2], N // 2)
    x = det.sample_quadrature(st.squeezed_vacuum(0.5), theta, gen)
    for k, v in enumerate([np.exp(-1) / 2, np.exp(1) / 2]):
        assert abs(x[k::2].var() - v) < 3 * _sigma_var(v, N // 2)


def test_measure_voltage_statistics(gen):
    d = ch.DetectorModel(2.0, 1.0)
    x = det.sample_quadrature(st.vacuum(), 0.0, gen, size=N)
    v = det.measure_voltage(d, x, gen)
    assert abs(v.var() - 2.5) < 3 * _sigma_var(2.5, N)


def test_noiseless_detector_is_exact(gen):
    x = gen.standard_normal(100)
    np.testing.assert_array_equal(det.measure_voltage(ch.DetectorModel(1.7, 0.0), x, gen), 1.7 * x)


@pytest.mark.parametrize(
    "spec, n, expected",
    [
        (0.5, 4, [0.5]),
        ("ramp", 4, [0, np.pi / 2, np.pi, 3 * np.pi / 2]),
        ([0.0, 1.0], 5, [0, 0, 0, 1, 1]),
        ([3.0, 2.0, 1.0], 3, [3, 2, 1]),
    ],
)
def test_phase_schedule(spec, n, expected):
    np.testing.assert_allclose(det.phase_schedule(spec, n), expected)


@pytest.mark.parametrize("spec, n", [("saw", 4), ([0.0, 1.0, 2.0], 2), ([], 3), (0.0, 0)])
def test_phase_schedule_rejects(spec, n):
    with pytest.raises(ValueError):
        det.phase_schedule(spec, n)


def test_trace_kinds_and_power():
    d = ch.DetectorModel(2.0, 1.0)
    en = det.acquire_trace(d, None, "electronic_noise", n=N, seed=3)
    shot = det.acquire_trace(d, None, det.TraceKind.SHOT_NOISE, n=N, seed=3)
    sig = det.acquire_trace(d, st.squeezed_vacuum(1.0), "signal", n=N, seed=3)
    assert abs(en.mean_square - 0.5) < 3 * _sigma_var(0.5, N)
    assert abs(shot.mean_square - 2.5) < 3 * _sigma_var(2.5, N)
    expected = 4 * np.exp(-2) / 2 + 0.5
    assert abs(sig.mean_square - expected) < 3 * _sigma_var(expected, N)


def test_acquire_rejects_wrong_source():
    d = ch.DetectorModel(1.0, 1.0)
    with pytest.raises(ValueError):
        det.acquire_trace(d, st.vacuum(), "electronic_noise", n=10)
    with pytest.raises(ValueError):
        det.acquire_trace(d, st.squeezed_vacuum(0.3), "shot_noise", n=10)
    with pytest.raises(ValueError):
        det.acquire_trace(d, None, "signal", n=10)
    with pytest.raises(ValueError):
        det.acquire_trace(d, None, "dark", n=10)


def test_noiseless_electronic_trace_is_zero():
    t = det.acquire_trace(ch.DetectorModel(1.0, 0.0), None, "electronic_noise", n=100)
    assert not t.samples.any()


def test_acquisition_is_deterministic_and_worker_independent():
    d = ch.DetectorModel(1.3, 0.4)
    s = st.squeezed_vacuum(0.7, 0.2)
    n = 3 * (1 << 16) + 17
    a = det.acquire_trace(d, s, "signal", "ramp", n=n, seed=11)
    b = det.acquire_trace(d, s, "signal", "ramp", n=n, seed=11, workers=4)
    np.testing.assert_array_equal(a.samples, b.samples)
    c = det.acquire_trace(d, s, "signal", "ramp", n=n, seed=12)
    assert not np.array_equal(a.samples, c.samples)


def test_prefix_is_stable_under_length_change():
    d = ch.DetectorModel(1.0, 1.0)
    a = det.acquire_trace(d, None, "shot_noise", n=1000, seed=5)
    b = det.acquire_trace(d, None, "shot_noise", n=100_000, seed=5)
    np.testing.assert_array_equal(a.samples, b.samples[:1000])


@pytest.mark.parametrize(
    "alpha, t, expected", [(1.0, 1.0, 2.0), (1.0, 1 / 3, 4.0), (3.0, 1.0, 10.0)]
)
def test_estimate_snr(alpha, t, expected):
    d = ch.DetectorModel(alpha, t)
    en = det.acquire_trace(d, None, "electronic_noise", n=N, seed=1)
    shot = det.acquire_trace(d, None, "shot_noise", n=N, seed=2)
    # ratio of two independent mean squares, each with relative error sqrt(2/N)
    assert det.estimate_snr(shot, en) == pytest.approx(expected, rel=3 * math.sqrt(4 / N))
    assert ch.snr(d) == pytest.approx(expected)


def test_estimate_snr_needs_noise():
    d = ch.DetectorModel(1.0, 0.0)
    en = det.acquire_trace(d, None, "electronic_noise", n=10)
    shot = det.acquire_trace(d, None, "shot_noise", n=10)
    with pytest.raises(DataError):
        det.estimate_snr(shot, en)


def test_rescale_trace():
    t = det.QuadratureTrace("signal", 0.0, [2.0, -4.0], 0, ch.DetectorModel(2.0, 0.0))
    np.testing.assert_array_equal(det.rescale_trace(t, 2.0), [1.0, -2.0])
    with pytest.raises(ValueError):
        det.rescale_trace(t, 0.0)


def test_calibrated_signal_equals_lossy_state():
    # electronic noise read through alpha' is optical loss at (S-1)/S
    d = ch.DetectorModel.from_snr(10.0, 1.0)
    sq = st.squeezed_vacuum(0.55)
    shot = det.acquire_trace(d, None, "shot_noise", n=N, seed=7)
    sig = det.acquire_trace(d, sq, "signal", [0.0, np.pi / 2], n=2 * N, seed=7)
    x = det.rescale_trace(sig, ch.calibration_factor(shot.samples))
    lossy = ch.apply_loss_cov(sq, ch.equivalent_efficiency_from_snr(10.0))
    _, var, sigma, _ = det.phase_resolved_variances(x, sig.sample_phases)
    # calibration adds a relative error sqrt(2/N) on top of the per-phase error
    tol = 3 * np.hypot(sigma, np.diag(lossy.cov) * math.sqrt(2 / N))
    assert np.all(abs(var - np.diag(lossy.cov)) < tol)


def test_trace_round_trip_is_exact(tmp_path):
    d = ch.DetectorModel(1.1, 0.3)
    t = det.acquire_trace(d, st.squeezed_vacuum(0.4), "signal", "ramp", n=500, seed=9)
    t.save(tmp_path / "sig.csv")
    back = det.QuadratureTrace.load(tmp_path / "sig.csv")
    np.testing.assert_array_equal(back.samples, t.samples)
    np.testing.assert_array_equal(back.phases, t.phases)
    assert back.kind is det.TraceKind.SIGNAL
    assert back.seed == 9 and back.detector == d


def test_constant_phase_collapses_on_load(tmp_path):
    t = det.acquire_trace(ch.DetectorModel(1.0, 1.0), None, "shot_noise", n=50, seed=1)
    t.save(tmp_path / "s.csv")
    assert det.QuadratureTrace.load(tmp_path / "s.csv").phases.shape == (1,)


@pytest.mark.parametrize(
    "text",
    [
        "",
        "# kind: signal\nphase_rad,volts\n0,1\n",
        "# kind: signal\n# seed: 0\n# alpha: 1\n# t_noise: 0\nx,y\n0,1\n",
        "# kind: laser\n# seed: 0\n# alpha: 1\n# t_noise: 0\nphase_rad,volts\n0,1\n",
        "# kind: signal\n# seed: 0\n# alpha: 1\n# t_noise: 0\nphase_rad,volts\n0,abc\n",
    ],
)
def test_malformed_trace_files(tmp_path, text):
    path = tmp_path / "bad.csv"
    path.write_text(text)
    with pytest.raises(DataError):
        det.QuadratureTrace.load(path)


def test_phase_resolved_variances_exact_groups():
    samples = [1.0, -1.0, 2.0, -2.0, 0.0]
    phases = [0.0, 0.0, 1.0, 1.0, 1.0]
    theta, var, sigma, counts = det.phase_resolved_variances(samples, phases)
    np.testing.assert_array_equal(theta, [0.0, 1.0])
    np.testing.assert_allclose(var, [2.0, 4.0])
    np.testing.assert_array_equal(counts, [2, 3])
    np.testing.assert_allclose(sigma, [2.0 * math.sqrt(2), 4.0])


def test_phase_resolved_variances_binned(gen):
    theta = 2 * np.pi * np.arange(N) / N
    x = det.sample_quadrature(st.squeezed_vacuum(1.0), theta, gen)
    labels, var, _, counts = det.phase_resolved_variances(x, theta, n_bins=36)
    assert labels.size == 36 and counts.sum() == N
    assert var.min() == pytest.approx(var[0], rel=0.5)
    assert np.argmax(var) in (8, 9, 26, 27)
