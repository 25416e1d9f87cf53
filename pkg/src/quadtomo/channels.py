"""Optical loss, detector electronic noise and the vacuum calibration.

Both inefficiencies act on the reconstructed Wigner function as a rescaling of
phase space followed by an isotropic Gaussian blur.  After calibration on the
vacuum, electronic noise with signal-to-noise ratio ``S`` is indistinguishable
from an absorber of transmission ``(S - 1) / S``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import DataError, ResolutionError
from .states import GaussianState, MarginalDensity, WignerGrid, vacuum, wigner_value

#: kernels are cut off beyond this many standard deviations
KERNEL_TRUNCATION = 8.0
#: minimal kernel standard deviation, in grid cells, for direct quadrature
MIN_KERNEL_CELLS = 2.0


@dataclass(frozen=True)
class DetectorModel:
    """Homodyne detector with gain ``alpha`` (V per quadrature unit).

    ``t_noise`` is the parameter ``T`` of the electronic-noise density
    ``exp(-V^2/T) / sqrt(pi T)``; the noise variance is therefore ``T/2``.
    """

    alpha: float
    t_noise: float = 0.0

    def __post_init__(self):
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise ValueError(f"alpha must be positive and finite, got {self.alpha}")
        if not (self.t_noise >= 0 and math.isfinite(self.t_noise)):
            raise ValueError(f"t_noise must be non-negative and finite, got {self.t_noise}")

    @classmethod
    def from_snr(cls, s: float, alpha: float = 1.0) -> "DetectorModel":
        """Detector with linear signal-to-noise ratio ``s`` (``inf`` for no noise)."""
        if s == math.inf:
            return cls(alpha, 0.0)
        if not s > 1:
            raise ValueError(f"signal-to-noise ratio must exceed 1, got {s}")
        return cls(alpha, alpha**2 / (s - 1))

    @property
    def alpha_prime(self) -> float:
        """Calibration factor obtained from a noisy vacuum measurement."""
        return math.sqrt(self.alpha**2 + self.t_noise)

    @property
    def noise_variance(self) -> float:
        return self.t_noise / 2

    @property
    def snr(self) -> float:
        return snr(self) if self.t_noise > 0 else math.inf

    def to_json(self) -> str:
        return json.dumps({"alpha": self.alpha, "t_noise": self.t_noise})

    @classmethod
    def from_json(cls, text: str) -> "DetectorModel":
        d = json.loads(text)
        if set(d) != {"alpha", "t_noise"}:
            raise ValueError(f"detector JSON needs exactly alpha and t_noise, got {sorted(d)}")
        return cls(float(d["alpha"]), float(d["t_noise"]))


def _check_eta(eta: float) -> float:
    if not 0 <= eta <= 1:
        raise ValueError(f"transmission must lie in [0, 1], got {eta}")
    return float(eta)


def apply_loss_cov(state: GaussianState, eta: float) -> GaussianState:
    """Beam-splitter loss: ``cov -> eta cov + (1 - eta)/2 I``, ``mean -> sqrt(eta) mean``."""
    eta = _check_eta(eta)
    if eta == 1:
        return state
    return GaussianState(
        math.sqrt(eta) * state.mean, eta * state.cov + (1 - eta) / 2 * np.eye(2)
    )


def _trapezoid_weights(n: int, h: float) -> np.ndarray:
    w = np.full(n, h)
    w[0] = w[-1] = h / 2
    return w


def _quadrature_kernel(out, nodes, h, scale, width_sq):
    """K[i, j] ~ weight_j * exp(-(out_i - scale nodes_j)^2 / width_sq)."""
    d = out[:, None] - scale * nodes[None, :]
    K = np.exp(-(d * d) / width_sq)
    K[np.abs(d) > KERNEL_TRUNCATION * math.sqrt(width_sq / 2)] = 0.0
    return K * _trapezoid_weights(len(nodes), h)[None, :]


def _spline_kernel(out, nodes, h, scale, width_sq):
    """Quadrature kernel on nodes refined by cubic-spline interpolation.

    Used when the kernel is narrower than ``MIN_KERNEL_CELLS`` grid cells, where
    direct quadrature on the original nodes would undersample it.
    """
    sigma_nodes = math.sqrt(width_sq / 2) / scale
    refine = math.ceil(MIN_KERNEL_CELLS * h / sigma_nodes)
    fine_h = h / refine
    fine = nodes[0] + fine_h * np.arange((len(nodes) - 1) * refine + 1)
    upsample = CubicSpline(nodes, np.eye(len(nodes)), axis=0)(fine)
    return _quadrature_kernel(out, fine, fine_h, scale, width_sq) @ upsample


def _rescaled_blur(grid, scale, width_sq, prefactor, on_narrow):
    """Evaluate ``prefactor * int W(u) exp(-|v - scale u|^2 / width_sq) d^2u`` on the grid.

    The 2-D kernel factorizes, so the integral is ``Kx @ W @ Kp.T``.
    """
    kernels = []
    for nodes, h in ((grid.x, grid.spec.dx), (grid.p, grid.spec.dp)):
        sigma_nodes = math.sqrt(width_sq / 2) / scale
        if sigma_nodes >= MIN_KERNEL_CELLS * h:
            kernels.append(_quadrature_kernel(nodes, nodes, h, scale, width_sq))
        elif on_narrow == "interpolate":
            kernels.append(_spline_kernel(nodes, nodes, h, scale, width_sq))
        elif on_narrow == "raise":
            raise ResolutionError(
                f"kernel width {sigma_nodes:.3g} is below {MIN_KERNEL_CELLS} grid cells ({h:.3g})"
            )
        else:
            raise ValueError(f"on_narrow must be 'interpolate' or 'raise', got {on_narrow!r}")
    Kx, Kp = kernels
    return WignerGrid.from_spec(grid.spec, prefactor * (Kx @ grid.values @ Kp.T))


def apply_loss_wigner(grid: WignerGrid, eta: float, on_narrow: str = "interpolate") -> WignerGrid:
    """Wigner function after an absorber of transmission ``eta``.

    Evaluates ``1/(pi eta (1-eta)) int W(X'/sqrt(eta), P'/sqrt(eta))
    exp(-|v - v'|^2 / (1-eta)) d^2v'`` after substituting ``u = v'/sqrt(eta)``,
    which keeps the integration on the input nodes.  ``eta`` of 0 and 1 are the
    analytic limits (vacuum and identity).

    ``on_narrow`` selects what happens when the blur kernel is under two grid
    cells wide: ``"interpolate"`` refines the nodes by cubic-spline
    interpolation before integrating, ``"raise"`` raises :class:`ResolutionError`.
    """
    eta = _check_eta(eta)
    if eta == 1:
        return WignerGrid.from_spec(grid.spec, grid.values.copy())
    if eta == 0:
        X, P = np.meshgrid(grid.x, grid.p, indexing="ij")
        return WignerGrid.from_spec(grid.spec, wigner_value(vacuum(), X, P))
    jacobian = eta
    prefactor = jacobian / (math.pi * eta * (1 - eta))
    return _rescaled_blur(grid, math.sqrt(eta), 1 - eta, prefactor, on_narrow)


def apply_en_wigner(
    grid: WignerGrid, detector: DetectorModel, on_narrow: str = "interpolate"
) -> WignerGrid:
    """Wigner function reconstructed from noisy data calibrated on the noisy vacuum.

    Evaluates ``a'^4/(pi T a^2) int W(a'/a X', a'/a P')
    exp(-|v - v'|^2 / (T/a'^2)) d^2v'`` with ``a = alpha``, ``a' = alpha'``,
    substituting ``u = (a'/a) v'``.  A noiseless detector returns a copy.
    """
    a, t = detector.alpha, detector.t_noise
    if t == 0:
        return WignerGrid.from_spec(grid.spec, grid.values.copy())
    ap = detector.alpha_prime
    jacobian = (a / ap) ** 2
    prefactor = jacobian * ap**4 / (math.pi * t * a**2)
    return _rescaled_blur(grid, a / ap, t / ap**2, prefactor, on_narrow)


def en_vacuum_distribution(detector: DetectorModel) -> MarginalDensity:
    """Voltage distribution of the vacuum seen through gain and electronic noise."""
    return MarginalDensity(0.0, 0.0, (detector.alpha**2 + detector.t_noise) / 2)


def calibration_factor(vacuum_samples) -> float:
    """``sqrt(2 <V0^2>)`` from vacuum voltage samples."""
    v = np.asarray(vacuum_samples, dtype=float).ravel()
    if v.size < 2:
        raise DataError("calibration needs at least two vacuum samples")
    ms = float(np.mean(v * v))
    if not ms > 0:
        raise DataError("vacuum samples carry no power")
    return math.sqrt(2 * ms)


def calibration_factor_stderr(vacuum_samples) -> float:
    """Delta-method standard error of :func:`calibration_factor`."""
    v = np.asarray(vacuum_samples, dtype=float).ravel()
    a = calibration_factor(v)
    v2 = v * v
    return float(np.std(v2, ddof=1) / math.sqrt(v.size) / a)


def equivalent_efficiency_from_gain(detector: DetectorModel) -> float:
    a2 = detector.alpha**2
    return a2 / (a2 + detector.t_noise)


def snr(detector: DetectorModel) -> float:
    """Ratio of noisy-vacuum mean square to electronic-noise mean square."""
    if detector.t_noise == 0:
        raise ZeroDivisionError("noiseless detector has infinite signal-to-noise ratio")
    return (detector.alpha**2 + detector.t_noise) / detector.t_noise


def equivalent_efficiency_from_snr(s: float) -> float:
    """``(S - 1)/S`` for a linear signal-to-noise ratio ``S > 1``."""
    if s == math.inf:
        return 1.0
    if not s > 1:
        raise ValueError(f"signal-to-noise ratio must exceed 1, got {s}")
    return (s - 1) / s


def db_to_linear(db: float) -> float:
    return 10 ** (db / 10)


def linear_to_db(s: float) -> float:
    return 10 * math.log10(s)
