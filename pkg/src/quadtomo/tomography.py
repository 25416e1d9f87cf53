"""Marginal histograms, Radon projection and Wigner-function reconstruction."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.ndimage import map_coordinates
from scipy.signal import fftconvolve

from .errors import DataError, DegenerateFitError, FitError, ResolutionError, StateError
from .rng import ordered_map
from .states import HEISENBERG_TOL, GaussianState, GridSpec, WignerGrid

MIN_FBP_PHASES = 8
MIN_FBP_SAMPLES = 1000


@dataclass(frozen=True, eq=False)
class MarginalHistogram:
    """Counts of quadrature samples taken at phase ``theta``.

    Samples outside ``bin_edges`` are tallied in ``overflow`` and excluded
    from ``total``.
    """

    theta: float
    bin_edges: np.ndarray
    counts: np.ndarray
    overflow: int = 0

    def __post_init__(self):
        edges = np.array(self.bin_edges, dtype=float)
        counts = np.array(self.counts)
        if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
            raise DataError("bin edges must be strictly increasing")
        if counts.shape != (edges.size - 1,):
            raise DataError("need one count per bin")
        if np.any(counts < 0) or not np.all(counts == np.round(counts)):
            raise DataError("counts must be non-negative integers")
        counts = counts.astype(np.int64)
        if counts.sum() == 0:
            raise DataError("histogram is empty")
        edges.setflags(write=False)
        counts.setflags(write=False)
        object.__setattr__(self, "bin_edges", edges)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "theta", float(self.theta))
        object.__setattr__(self, "overflow", int(self.overflow))

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[1:] + self.bin_edges[:-1])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.bin_edges)

    def density(self) -> np.ndarray:
        return self.counts / (self.total * self.widths)

    def moments(self) -> tuple[float, float]:
        """Mean and variance from bin centres, with Sheppard's correction."""
        n = self.total
        c = self.centers
        mean = float(np.dot(c, self.counts) / n)
        var = float(np.dot((c - mean) ** 2, self.counts) / (n - 1))
        var -= float(np.dot(self.widths**2, self.counts) / n) / 12
        return mean, var

    def reflected(self) -> "MarginalHistogram":
        """The same data seen at ``theta + pi`` (``X -> -X``)."""
        return MarginalHistogram(
            self.theta + math.pi, -self.bin_edges[::-1], self.counts[::-1], self.overflow
        )

    def save(self, path) -> None:
        with open(path, "w", newline="\n") as fh:
            fh.write(f"# theta_rad: {self.theta!r}\n")
            fh.write(f"# total: {self.total}\n")
            fh.write(f"# overflow: {self.overflow}\n")
            fh.write("bin_lo,bin_hi,count\n")
            for lo, hi, n in zip(self.bin_edges[:-1], self.bin_edges[1:], self.counts):
                fh.write(f"{float(lo)!r},{float(hi)!r},{int(n)}\n")

    @classmethod
    def load(cls, path) -> "MarginalHistogram":
        path = Path(path)
        header = {}
        with open(path) as fh:
            line = fh.readline()
            while line.startswith("#"):
                key, _, value = line[1:].partition(":")
                header[key.strip()] = value.strip()
                line = fh.readline()
            if line.strip() != "bin_lo,bin_hi,count":
                raise DataError(f"{path}: expected column header 'bin_lo,bin_hi,count'")
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
        if data.shape[0] == 0 or data.shape[1] != 3:
            raise DataError(f"{path}: expected three columns")
        if not np.array_equal(data[1:, 0], data[:-1, 1]):
            raise DataError(f"{path}: bins are not contiguous")
        edges = np.append(data[:, 0], data[-1, 1])
        hist = cls(float(header["theta_rad"]), edges, data[:, 2], int(header.get("overflow", 0)))
        if "total" in header and int(header["total"]) != hist.total:
            raise DataError(f"{path}: header total does not match counts")
        return hist


def histogram(samples, theta: float, bins=101, range=None) -> MarginalHistogram:
    """Bin quadrature samples; out-of-range samples go to the overflow tally."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise DataError("cannot histogram an empty sample set")
    if np.ndim(bins) == 0:
        lo, hi = (x.min(), x.max()) if range is None else range
        if hi <= lo:
            lo, hi = lo - 0.5, hi + 0.5
        edges = np.linspace(lo, hi, int(bins) + 1)
    else:
        edges = np.asarray(bins, dtype=float)
        if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
            raise DataError("bin edges must be strictly increasing")
    inside = (x >= edges[0]) & (x <= edges[-1])
    counts, _ = np.histogram(x[inside], edges)
    return MarginalHistogram(theta, edges, counts, int(x.size - inside.sum()))


@dataclass(frozen=True)
class SampledMarginal:
    """Marginal density sampled on a uniform 1-D grid."""

    theta: float
    x: np.ndarray = field(repr=False)
    density: np.ndarray = field(repr=False)

    def integral(self) -> float:
        return float(np.trapezoid(self.density, self.x))

    @property
    def mean(self) -> float:
        return float(np.trapezoid(self.x * self.density, self.x)) / self.integral()

    @property
    def variance(self) -> float:
        m = self.mean
        return float(np.trapezoid((self.x - m) ** 2 * self.density, self.x)) / self.integral()


def radon_project(grid: WignerGrid, theta: float, step: float | None = None) -> SampledMarginal:
    """Integrate ``W`` along lines of constant ``X cos(theta) + P sin(theta)``.

    Values between grid nodes come from bilinear interpolation (zero outside
    the grid).  ``step`` is both the output spacing and the integration step;
    it defaults to the smaller grid spacing and may not exceed two cells.
    """
    spec = grid.spec
    h = min(spec.dx, spec.dp)
    step = h if step is None else float(step)
    if step > 2 * h:
        raise ResolutionError(f"sampling step {step:.3g} exceeds two grid cells ({h:.3g})")
    xc = 0.5 * (spec.x_min + spec.x_max)
    pc = 0.5 * (spec.p_min + spec.p_max)
    radius = 0.5 * math.hypot(spec.x_max - spec.x_min, spec.p_max - spec.p_min)
    half = math.ceil(radius / step)
    # half-integer offsets put the nodes on cell centres at theta = 0
    k = (np.arange(-half, half) + 0.5) * step
    c, s = math.cos(theta), math.sin(theta)
    X, T = np.meshgrid(k, k, indexing="ij")
    px = xc + X * c - T * s
    pp = pc + X * s + T * c
    coords = np.array([(px - spec.x_min) / spec.dx - 0.5, (pp - spec.p_min) / spec.dp - 0.5])
    vals = map_coordinates(grid.values, coords, order=1, mode="constant", cval=0.0)
    density = np.trapezoid(vals, dx=step, axis=1)
    return SampledMarginal(float(theta), (xc * c + pc * s) + k, density)


def ramp_filter_kernel(n: int, spacing: float) -> np.ndarray:
    """Band-limited ramp filter sampled at offsets ``-n+1 .. n-1`` (Ram-Lak)."""
    k = np.arange(-(n - 1), n)
    h = np.zeros(k.size)
    h[k == 0] = 1 / (4 * spacing**2)
    odd = k % 2 == 1
    h[odd] = -1 / (np.pi * k[odd] * spacing) ** 2
    return h


def _fold_phases(histograms):
    """Map every histogram to [0, pi), reflecting those taken in [pi, 2 pi)."""
    folded = []
    for hist in histograms:
        theta = math.fmod(hist.theta, 2 * math.pi)
        if theta < 0:
            theta += 2 * math.pi
        if theta >= math.pi:
            hist = hist.reflected()
            theta -= math.pi
        folded.append(MarginalHistogram(theta, hist.bin_edges, hist.counts, hist.overflow))
    return sorted(folded, key=lambda h: h.theta)


def _angular_weights(thetas: np.ndarray) -> np.ndarray:
    """Trapezoid weights on the circle of period pi."""
    ext = np.concatenate([[thetas[-1] - math.pi], thetas, [thetas[0] + math.pi]])
    return 0.5 * (ext[2:] - ext[:-2])


def inverse_radon(
    histograms, spec: GridSpec | None = None, circle: bool = True, workers: int = 1
) -> WignerGrid:
    """Filtered back-projection of marginal histograms onto a Wigner grid.

    Histograms must share one uniform binning and cover at least eight
    distinct phases; phases in [pi, 2 pi) are folded back by reflection.  The
    ramp filter is cut off at the Nyquist frequency of the binning and no
    apodization is applied.

    With ``circle`` the result is zeroed outside the largest origin-centred
    disk that every projection covers.  Outside it the sparse ridges of a
    finite number of phases do not cancel, and their slowly decaying tails
    would otherwise dominate second moments taken over the grid.
    """
    hists = _fold_phases(histograms)
    thetas = np.array([h.theta for h in hists])
    if np.unique(thetas).size < MIN_FBP_PHASES or np.unique(thetas).size != thetas.size:
        raise DataError(
            f"back-projection needs at least {MIN_FBP_PHASES} distinct phases modulo pi"
        )
    if min(h.total for h in hists) < MIN_FBP_SAMPLES:
        raise DataError(f"each histogram needs at least {MIN_FBP_SAMPLES} samples")
    edges = hists[0].bin_edges
    delta = edges[1] - edges[0]
    if not np.allclose(np.diff(edges), delta, rtol=1e-9, atol=0):
        raise DataError("back-projection needs uniform bins")
    for h in hists[1:]:
        if h.bin_edges.shape != edges.shape or not np.allclose(
            h.bin_edges, edges, rtol=0, atol=1e-9 * delta
        ):
            raise DataError("histograms have inconsistent bin supports")
    if spec is None:
        half = float(np.abs(edges).max())
        spec = GridSpec.square(half, 128)

    X, P = np.meshgrid(spec.x, spec.p, indexing="ij")
    reach = float(np.hypot(X, P).max()) + delta
    centers = 0.5 * (edges[1:] + edges[:-1])
    pad_lo = max(0, math.ceil((centers[0] + reach) / delta))
    pad_hi = max(0, math.ceil((reach - centers[-1]) / delta))
    support = centers[0] + delta * np.arange(-pad_lo, centers.size + pad_hi)
    kernel = ramp_filter_kernel(support.size, delta)
    weights = _angular_weights(thetas)

    def back_project(k):
        hist = hists[k]
        density = np.concatenate([np.zeros(pad_lo), hist.density(), np.zeros(pad_hi)])
        filtered = delta * fftconvolve(density, kernel, mode="same")
        proj = X * math.cos(hist.theta) + P * math.sin(hist.theta)
        return weights[k] * np.interp(proj, support, filtered, left=0.0, right=0.0)

    partial = ordered_map(back_project, range(len(hists)), workers)
    values = np.zeros(X.shape)
    for part in partial:
        values += part
    if circle:
        fov = min(-edges[0], edges[-1])
        values[X * X + P * P > fov * fov] = 0.0
    return WignerGrid.from_spec(spec, values)


@dataclass(frozen=True, eq=False)
class GaussianFit:
    """Method-of-moments estimate of a Gaussian state.

    ``physical`` is False when the estimate violates the uncertainty bound,
    which noisy data is allowed to do.  ``cov_sigma`` holds the standard errors
    of ``(cov_xx, cov_xp, cov_pp)`` when per-phase uncertainties were supplied.
    """

    mean: np.ndarray
    cov: np.ndarray
    physical: bool
    mean_sigma: np.ndarray | None = None
    cov_sigma: np.ndarray | None = None
    residual_rms: float = 0.0

    @property
    def state(self) -> GaussianState:
        if not self.physical:
            raise StateError("fitted covariance violates the uncertainty bound")
        return GaussianState(self.mean, self.cov)


def _distinct_mod_pi(thetas, tol=1e-12) -> int:
    folded = np.sort(np.mod(thetas, math.pi))
    gaps = np.diff(folded)
    n = 1 + int(np.sum(gaps > tol))
    if n > 1 and folded[0] + math.pi - folded[-1] <= tol:
        n -= 1
    return n


def _weighted_lstsq(A, y, sigma):
    if sigma is None:
        beta, *_ = np.linalg.lstsq(A, y, rcond=None)
        return beta, None
    w = 1 / np.asarray(sigma, dtype=float)
    beta, *_ = np.linalg.lstsq(A * w[:, None], y * w, rcond=None)
    cov = np.linalg.inv((A * (w * w)[:, None]).T @ A)
    return beta, cov


def fit_gaussian_moments(
    thetas, means, variances, variance_sigma=None, mean_sigma=None
) -> GaussianFit:
    """Least-squares fit of ``u.cov.u`` and ``u.mean`` to per-phase moments.

    ``u = (cos theta, sin theta)``.  Uncertainties, when given, weight the fit
    and yield standard errors of the fitted entries.
    """
    thetas = np.asarray(thetas, dtype=float)
    if _distinct_mod_pi(thetas) < 3:
        raise FitError("covariance fit needs at least three distinct phases modulo pi")
    c, s = np.cos(thetas), np.sin(thetas)
    A = np.column_stack([c * c, 2 * c * s, s * s])
    y = np.asarray(variances, dtype=float)
    beta, beta_cov = _weighted_lstsq(A, y, variance_sigma)
    cov = np.array([[beta[0], beta[1]], [beta[1], beta[2]]])
    residual = float(np.sqrt(np.mean((A @ beta - y) ** 2)))
    mu, mu_cov = _weighted_lstsq(np.column_stack([c, s]), np.asarray(means, dtype=float), mean_sigma)
    if np.linalg.eigvalsh(cov).min() <= 0:
        raise DegenerateFitError(f"fitted covariance {cov.tolist()} is not positive definite")
    return GaussianFit(
        mean=mu,
        cov=cov,
        physical=bool(np.linalg.det(cov) >= 0.25 - HEISENBERG_TOL),
        mean_sigma=None if mu_cov is None else np.sqrt(np.diag(mu_cov)),
        cov_sigma=None if beta_cov is None else np.sqrt(np.diag(beta_cov)),
        residual_rms=residual,
    )


def fit_gaussian_state(histograms) -> GaussianFit:
    """Gaussian state whose marginals best match the histograms' moments."""
    hists = list(histograms)
    thetas, means, variances, counts = [], [], [], []
    for h in hists:
        m, v = h.moments()
        thetas.append(h.theta)
        means.append(m)
        variances.append(v)
        counts.append(h.total)
    variances = np.array(variances)
    counts = np.array(counts, dtype=float)
    if np.any(counts < 2):
        raise DataError("each histogram needs at least two samples")
    return fit_gaussian_moments(
        thetas,
        means,
        variances,
        variance_sigma=np.abs(variances) * np.sqrt(2 / (counts - 1)),
        mean_sigma=np.sqrt(np.abs(variances) / counts),
    )
