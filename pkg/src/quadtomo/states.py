"""Single-mode Gaussian states, their Wigner functions and quadrature marginals.

Quadratures are normalized so that the vacuum has ``<X^2> = 1/2``; the vacuum
marginal is ``exp(-x^2) / sqrt(pi)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ResolutionError, StateError

VACUUM_VARIANCE = 0.5
#: slack on the uncertainty bound det(cov) >= 1/4
HEISENBERG_TOL = 1e-12
MIN_GRID_POINTS = 8


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def rotation(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class GaussianState:
    """Mean vector ``(x, p)`` and 2x2 quadrature covariance matrix.

    The constructor enforces symmetry, positive definiteness and the
    uncertainty bound ``det(cov) >= 1/4``.  Estimates that may violate the
    bound are carried by :class:`quadtomo.tomography.GaussianFit` instead.
    """

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = _frozen(self.mean)
        cov = np.array(self.cov, dtype=float)
        if mean.shape != (2,):
            raise StateError(f"mean must have shape (2,), got {mean.shape}")
        if cov.shape != (2, 2):
            raise StateError(f"cov must have shape (2, 2), got {cov.shape}")
        if not np.all(np.isfinite(cov)) or not np.all(np.isfinite(mean)):
            raise StateError("state parameters must be finite")
        if abs(cov[0, 1] - cov[1, 0]) > 1e-12 * max(1.0, np.abs(cov).max()):
            raise StateError("covariance matrix is not symmetric")
        cov[0, 1] = cov[1, 0] = 0.5 * (cov[0, 1] + cov[1, 0])
        if np.linalg.eigvalsh(cov).min() <= 0:
            raise StateError("covariance matrix is not positive definite")
        if np.linalg.det(cov) < 0.25 - HEISENBERG_TOL:
            raise StateError(f"det(cov) = {np.linalg.det(cov):.6g} violates the bound 1/4")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", _frozen(cov))

    @property
    def purity(self) -> float:
        return 0.5 / np.sqrt(np.linalg.det(self.cov))

    def rotated(self, phi: float) -> "GaussianState":
        """Rotate the state by ``phi`` in phase space."""
        R = rotation(phi)
        return GaussianState(R @ self.mean, R @ self.cov @ R.T)

    def __eq__(self, other):
        if not isinstance(other, GaussianState):
            return NotImplemented
        return np.array_equal(self.mean, other.mean) and np.array_equal(self.cov, other.cov)

    def __hash__(self):
        return hash((self.mean.tobytes(), self.cov.tobytes()))


def vacuum() -> GaussianState:
    return GaussianState(np.zeros(2), VACUUM_VARIANCE * np.eye(2))


def squeezed_vacuum(r: float, phi: float = 0.0) -> GaussianState:
    """Pure squeezed vacuum with variances ``exp(-2r)/2`` and ``exp(2r)/2``.

    For ``phi = 0`` the X quadrature is squeezed; ``phi`` rotates the squeezed
    axis counterclockwise, so the marginal at ``theta = phi`` is the squeezed one.
    """
    if not r >= 0:
        raise ValueError(f"squeezing parameter must be non-negative, got {r}")
    cov = np.diag([np.exp(-2 * r) / 2, np.exp(2 * r) / 2])
    if phi:
        R = rotation(phi)
        cov = R @ cov @ R.T
        cov = 0.5 * (cov + cov.T)
    return GaussianState(np.zeros(2), cov)


@dataclass(frozen=True)
class MarginalDensity:
    """Gaussian quadrature distribution measured at local-oscillator phase ``theta``."""

    theta: float
    mean: float
    variance: float

    def __post_init__(self):
        if not self.variance > 0:
            raise ValueError("marginal variance must be positive")

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.exp(-((x - self.mean) ** 2) / (2 * self.variance)) / np.sqrt(
            2 * np.pi * self.variance
        )


def quadrature_direction(theta: float) -> np.ndarray:
    return np.array([np.cos(theta), np.sin(theta)])


def marginal(state: GaussianState, theta: float) -> MarginalDensity:
    """Distribution of ``X_theta = X cos(theta) + P sin(theta)``."""
    u = quadrature_direction(theta)
    return MarginalDensity(float(theta), float(u @ state.mean), float(u @ state.cov @ u))


def gaussian_wigner(mean, cov, x, p):
    """Gaussian phase-space density with the given moments at ``(x, p)``."""
    x, p = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(p, dtype=float))
    cov = np.asarray(cov, dtype=float)
    det = np.linalg.det(cov)
    if not det > 0:
        raise StateError("covariance matrix is singular")
    inv = np.linalg.inv(cov)
    dx, dp = x - mean[0], p - mean[1]
    quad = inv[0, 0] * dx * dx + 2 * inv[0, 1] * dx * dp + inv[1, 1] * dp * dp
    return np.exp(-0.5 * quad) / (2 * np.pi * np.sqrt(det))


def wigner_value(state: GaussianState, x, p):
    """Wigner function of ``state`` evaluated pointwise at ``(x, p)``."""
    return gaussian_wigner(state.mean, state.cov, x, p)


@dataclass(frozen=True)
class GridSpec:
    """Rectangular phase-space grid sampled at cell centers."""

    x_min: float
    x_max: float
    p_min: float
    p_max: float
    nx: int = 256
    ny: int = 256

    def __post_init__(self):
        for name in ("x_min", "x_max", "p_min", "p_max"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not (self.x_max > self.x_min and self.p_max > self.p_min):
            raise ValueError("grid bounds must satisfy max > min")
        if self.nx < MIN_GRID_POINTS or self.ny < MIN_GRID_POINTS:
            raise ResolutionError(f"grid needs at least {MIN_GRID_POINTS} points per axis")

    @classmethod
    def square(cls, half_width: float, n: int = 256) -> "GridSpec":
        return cls(-half_width, half_width, -half_width, half_width, n, n)

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.nx

    @property
    def dp(self) -> float:
        return (self.p_max - self.p_min) / self.ny

    @property
    def x(self) -> np.ndarray:
        return self.x_min + (np.arange(self.nx) + 0.5) * self.dx

    @property
    def p(self) -> np.ndarray:
        return self.p_min + (np.arange(self.ny) + 0.5) * self.dp


def default_grid_spec(state: GaussianState, n: int = 256) -> GridSpec:
    """Square grid centred on the state mean, wide enough that truncated mass < 1e-8."""
    half = max(6.0, 6.0 * np.sqrt(2.0 * np.linalg.eigvalsh(state.cov).max()))
    x0, p0 = state.mean
    return GridSpec(x0 - half, x0 + half, p0 - half, p0 + half, n, n)


@dataclass(frozen=True, eq=False)
class WignerGrid:
    """Wigner function samples; ``values[i, j]`` is ``W(x[i], p[j])``."""

    x_min: float
    x_max: float
    p_min: float
    p_max: float
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = _frozen(self.values)
        for name in ("x_min", "x_max", "p_min", "p_max"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if values.ndim != 2:
            raise ValueError("values must be a 2-D array")
        object.__setattr__(self, "values", values)
        GridSpec(self.x_min, self.x_max, self.p_min, self.p_max, *values.shape)

    @classmethod
    def from_spec(cls, spec: GridSpec, values) -> "WignerGrid":
        return cls(spec.x_min, spec.x_max, spec.p_min, spec.p_max, values)

    @property
    def spec(self) -> GridSpec:
        return GridSpec(self.x_min, self.x_max, self.p_min, self.p_max, self.nx, self.ny)

    @property
    def nx(self) -> int:
        return self.values.shape[0]

    @property
    def ny(self) -> int:
        return self.values.shape[1]

    @property
    def x(self) -> np.ndarray:
        return self.spec.x

    @property
    def p(self) -> np.ndarray:
        return self.spec.p

    def integrate(self, f=None) -> float:
        """Trapezoid integral of ``f(x, p) * W`` over the grid (``f = 1`` by default)."""
        vals = self.values
        if f is not None:
            X, P = np.meshgrid(self.x, self.p, indexing="ij")
            vals = f(X, P) * vals
        return float(np.trapezoid(np.trapezoid(vals, self.p, axis=1), self.x))

    def moments(self) -> tuple[np.ndarray, np.ndarray]:
        """Normalized mean vector and covariance matrix of the sampled distribution."""
        norm = self.integrate()
        mx = self.integrate(lambda X, P: X) / norm
        mp = self.integrate(lambda X, P: P) / norm
        cxx = self.integrate(lambda X, P: (X - mx) ** 2) / norm
        cpp = self.integrate(lambda X, P: (P - mp) ** 2) / norm
        cxp = self.integrate(lambda X, P: (X - mx) * (P - mp)) / norm
        return np.array([mx, mp]), np.array([[cxx, cxp], [cxp, cpp]])

    def save(self, path) -> None:
        """Write a one-line JSON header followed by row-major CSV values."""
        header = {
            "x_min": self.x_min,
            "x_max": self.x_max,
            "p_min": self.p_min,
            "p_max": self.p_max,
            "nx": self.nx,
            "ny": self.ny,
        }
        with open(path, "w", newline="\n") as fh:
            fh.write("# " + json.dumps(header) + "\n")
            np.savetxt(fh, self.values, fmt="%.17g", delimiter=",")

    @classmethod
    def load(cls, path) -> "WignerGrid":
        path = Path(path)
        with open(path) as fh:
            first = fh.readline()
            if not first.startswith("#"):
                raise ValueError(f"{path}: missing JSON header line")
            header = json.loads(first[1:])
            values = np.loadtxt(fh, delimiter=",", ndmin=2)
        if values.shape != (header["nx"], header["ny"]):
            raise ValueError(f"{path}: values shape {values.shape} does not match header")
        return cls(header["x_min"], header["x_max"], header["p_min"], header["p_max"], values)


def wigner_eval(state: GaussianState, spec: GridSpec | None = None) -> WignerGrid:
    if spec is None:
        spec = default_grid_spec(state)
    X, P = np.meshgrid(spec.x, spec.p, indexing="ij")
    return WignerGrid.from_spec(spec, wigner_value(state, X, P))
