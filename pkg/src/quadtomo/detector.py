"""Monte Carlo homodyne detector and the three-trace acquisition protocol.

A trace is one of: electronic noise (both photodiodes blocked), shot noise
(signal blocked, only the local oscillator) or the signal itself.  Samples are
i.i.d. draws at a single sideband; no spectral filtering is modelled.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import rng as _rng
from .channels import DetectorModel
from .errors import DataError
from .states import GaussianState, marginal, quadrature_direction, vacuum


class TraceKind(enum.Enum):
    ELECTRONIC_NOISE = "electronic_noise"
    SHOT_NOISE = "shot_noise"
    SIGNAL = "signal"


def sample_quadrature(state: GaussianState, theta, rng: np.random.Generator, size=None):
    """Draw quadrature values at phase(s) ``theta`` from the state's marginal.

    ``theta`` may be an array, in which case one draw is made per phase.
    """
    theta = np.asarray(theta, dtype=float)
    if theta.ndim == 0 and size is None:
        m = marginal(state, float(theta))
        return m.mean + math.sqrt(m.variance) * rng.standard_normal()
    c, s = np.cos(theta), np.sin(theta)
    mean = c * state.mean[0] + s * state.mean[1]
    var = c * c * state.cov[0, 0] + 2 * c * s * state.cov[0, 1] + s * s * state.cov[1, 1]
    shape = np.broadcast_shapes(theta.shape, () if size is None else np.atleast_1d(size))
    return mean + np.sqrt(var) * rng.standard_normal(shape)


def measure_voltage(detector: DetectorModel, x, rng: np.random.Generator):
    """``V = alpha x + e`` with Gaussian electronic noise of variance ``T/2``."""
    x = np.asarray(x, dtype=float)
    if detector.t_noise == 0:
        return detector.alpha * x if x.ndim else float(detector.alpha * x)
    e = math.sqrt(detector.noise_variance) * rng.standard_normal(x.shape or None)
    return detector.alpha * x + e


def phase_schedule(spec, n: int) -> np.ndarray:
    """Turn a phase-schedule spec into phases for ``n`` samples.

    * a number: constant phase (returned as a length-1 array)
    * ``"ramp"``: ``2 pi k / n``, a linear local-oscillator scan over [0, 2 pi)
    * a sequence of length ``n``: one phase per sample
    * any other sequence of ``m`` phases: ``n`` samples split into ``m``
      contiguous, nearly equal blocks
    """
    if n < 1:
        raise ValueError("a trace needs at least one sample")
    if isinstance(spec, str):
        if spec != "ramp":
            raise ValueError(f"unknown phase schedule {spec!r}")
        return 2 * np.pi * np.arange(n) / n
    arr = np.asarray(spec, dtype=float)
    if arr.ndim == 0:
        return arr.reshape(1)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("phase list must be a non-empty 1-D sequence")
    if arr.size == n:
        return arr.copy()
    if arr.size > n:
        raise ValueError(f"{arr.size} phases do not fit into {n} samples")
    return arr[(np.arange(n) * arr.size) // n]


@dataclass(frozen=True, eq=False)
class QuadratureTrace:
    """Voltage samples from one acquisition, with the phases they were taken at."""

    kind: TraceKind
    phases: np.ndarray
    samples: np.ndarray
    seed: int
    detector: DetectorModel
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        samples = np.array(self.samples, dtype=float).ravel()
        phases = np.array(self.phases, dtype=float).ravel()
        if samples.size == 0:
            raise DataError("trace has no samples")
        if phases.size not in (1, samples.size):
            raise DataError("phases must be a single value or one per sample")
        samples.setflags(write=False)
        phases.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "phases", phases)
        object.__setattr__(self, "kind", TraceKind(self.kind))

    def __len__(self):
        return self.samples.size

    @property
    def sample_phases(self) -> np.ndarray:
        return np.broadcast_to(self.phases, self.samples.shape)

    @property
    def mean_square(self) -> float:
        return float(np.mean(self.samples * self.samples))

    def save(self, path) -> None:
        """CSV ``phase_rad,volts`` with ``# key: value`` header lines."""
        with open(path, "w", newline="\n") as fh:
            fh.write(f"# kind: {self.kind.value}\n")
            fh.write(f"# seed: {self.seed}\n")
            fh.write(f"# alpha: {self.detector.alpha!r}\n")
            fh.write(f"# t_noise: {self.detector.t_noise!r}\n")
            fh.write("phase_rad,volts\n")
            np.savetxt(
                fh,
                np.column_stack([self.sample_phases, self.samples]),
                fmt="%.17g",
                delimiter=",",
            )

    @classmethod
    def load(cls, path) -> "QuadratureTrace":
        path = Path(path)
        header = {}
        with open(path) as fh:
            line = fh.readline()
            while line.startswith("#"):
                key, _, value = line[1:].partition(":")
                header[key.strip()] = value.strip()
                line = fh.readline()
            if line.strip() != "phase_rad,volts":
                raise DataError(f"{path}: expected column header 'phase_rad,volts'")
            try:
                data = np.loadtxt(fh, delimiter=",", ndmin=2)
            except ValueError as exc:
                raise DataError(f"{path}: {exc}") from exc
        missing = {"kind", "seed", "alpha", "t_noise"} - set(header)
        if missing:
            raise DataError(f"{path}: missing header fields {sorted(missing)}")
        if data.shape[0] == 0 or data.shape[1] != 2:
            raise DataError(f"{path}: expected two columns of data")
        phases = data[:, 0]
        if np.all(phases == phases[0]):
            phases = phases[:1]
        try:
            return cls(
                TraceKind(header["kind"]),
                phases,
                data[:, 1],
                int(header["seed"]),
                DetectorModel(float(header["alpha"]), float(header["t_noise"])),
            )
        except ValueError as exc:
            raise DataError(f"{path}: {exc}") from exc


def acquire_trace(
    detector: DetectorModel,
    source: GaussianState | None,
    kind: TraceKind | str,
    phases=0.0,
    n: int = 100_000,
    seed: int = 0,
    stream: tuple = (),
    workers: int = 1,
) -> QuadratureTrace:
    """Simulate one trace of ``n`` samples.

    Electronic-noise traces take no source; shot-noise traces take the vacuum
    (or ``None``); signal traces need a state.  Samples are generated in fixed
    chunks, each with its own random substream keyed by ``(kind, *stream,
    chunk)``, so output depends only on the seed and never on ``workers``,
    and a longer trace extends a shorter one with the same seed.
    """
    kind = TraceKind(kind)
    if kind is TraceKind.ELECTRONIC_NOISE and source is not None:
        raise ValueError("electronic-noise traces are taken with both photodiodes blocked")
    if kind is TraceKind.SHOT_NOISE:
        if source is not None and source != vacuum():
            raise ValueError("shot-noise traces are taken on the vacuum")
        source = vacuum()
    if kind is TraceKind.SIGNAL and source is None:
        raise ValueError("signal traces need a source state")
    seed = _rng.check_seed(seed)
    theta = phase_schedule(phases, n)
    noise_sigma = math.sqrt(detector.noise_variance)

    def chunk(bounds):
        lo, hi = bounds
        key = (seed, kind.value, *stream, lo // _rng.CHUNK_SIZE)
        if noise_sigma:
            e = noise_sigma * _rng.stream(*key, "noise").standard_normal(hi - lo)
        else:
            e = np.zeros(hi - lo)
        if kind is TraceKind.ELECTRONIC_NOISE:
            return e
        th = theta if theta.size == 1 else theta[lo:hi]
        x = sample_quadrature(source, th, _rng.stream(*key, "quadrature"), size=hi - lo)
        return detector.alpha * x + e

    parts = _rng.ordered_map(chunk, _rng.chunk_bounds(n), workers)
    return QuadratureTrace(kind, theta, np.concatenate(parts), seed, detector)


def estimate_snr(shot: QuadratureTrace, en: QuadratureTrace) -> float:
    """Ratio of shot-noise to electronic-noise mean square."""
    en_power = en.mean_square
    if not en_power > 0:
        raise DataError("electronic-noise trace has zero power")
    return shot.mean_square / en_power


def rescale_trace(trace: QuadratureTrace, alpha_prime: float) -> np.ndarray:
    """Convert voltages to calibrated quadrature units."""
    if not alpha_prime > 0:
        raise ValueError(f"calibration factor must be positive, got {alpha_prime}")
    return trace.samples / alpha_prime


def phase_resolved_variances(samples, phases, n_bins: int | None = None):
    """Group samples by phase and return ``(theta, variance, variance_sigma, counts)``.

    Discrete schedules are grouped by exact phase value.  With ``n_bins`` the
    phases are instead binned on [0, 2 pi) and each bin is labelled by its
    mean phase.
    """
    samples = np.asarray(samples, dtype=float).ravel()
    phases = np.broadcast_to(np.asarray(phases, dtype=float), samples.shape)
    if n_bins is None:
        labels, idx = np.unique(phases, return_inverse=True)
    else:
        wrapped = np.mod(phases, 2 * np.pi)
        idx = np.minimum((wrapped / (2 * np.pi) * n_bins).astype(int), n_bins - 1)
        labels = None
    counts = np.bincount(idx)
    keep = counts > 1
    s1 = np.bincount(idx, samples)
    s2 = np.bincount(idx, samples * samples)
    if labels is None:
        labels = np.bincount(idx, np.mod(phases, 2 * np.pi))[keep] / counts[keep]
    else:
        labels = labels[keep]
    s1, s2, counts = s1[keep], s2[keep], counts[keep]
    mean = s1 / counts
    var = (s2 - counts * mean * mean) / (counts - 1)
    sigma = var * np.sqrt(2.0 / (counts - 1))
    return labels, var, sigma, counts
