"""Measurement error models for RSSI ranging and anchor self-positioning.

Distance measurements come from a log-distance path loss model whose RSSI
noise power is itself random (uniform between two bounds), and anchor
positions carry a Gaussian error with uniformly distributed power. Both
sources are fused into a single Gaussian error scale sigma_M that the bound
analysis, the weighted estimators and the anomaly detector all consume.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.stats import norm

from .errors import DomainError, UsageError

# Distance floor applied after noisy RSSI inversion: extreme noise draws can
# invert to arbitrarily small ranges, which would break geometry downstream.
DISTANCE_FLOOR_M = 0.01

_LN10 = math.log(10.0)


@dataclass(frozen=True)
class PathLossParams:
    """Log-distance path loss model with uniformly distributed RSSI noise power.

    n_p: path loss exponent; d0: reference distance (m); pr_d0: RSSI at the
    reference distance (dBm); sigma_r_range: (min, max) bounds of the RSSI
    noise standard deviation (dB).
    """

    n_p: float = 3.0
    d0: float = 1.0
    pr_d0: float = -30.0
    sigma_r_range: tuple[float, float] = (0.5, 2.0)

    def __post_init__(self):
        if self.n_p <= 0:
            raise DomainError(f"path loss exponent must be positive, got {self.n_p}")
        if self.d0 <= 0:
            raise DomainError(f"reference distance must be positive, got {self.d0}")
        lo, hi = self.sigma_r_range
        if not (0 <= lo <= hi):
            raise DomainError(f"invalid RSSI noise bounds {self.sigma_r_range}")


@dataclass(frozen=True)
class PositionErrorProfile:
    """Bounds of the per-anchor self-positioning error standard deviation (m)."""

    sigma_p_range: tuple[float, float] = (0.1, 3.0)

    def __post_init__(self):
        lo, hi = self.sigma_p_range
        if not (0 <= lo <= hi):
            raise DomainError(f"invalid position error bounds {self.sigma_p_range}")


def rssi_at_distance(d, params: PathLossParams, noise_std=0.0, rng=None):
    """RSSI (dBm) received at distance ``d`` with Gaussian measurement noise."""
    if d <= 0:
        raise DomainError(f"distance must be positive, got {d}")
    rssi = params.pr_d0 - 10.0 * params.n_p * math.log10(d / params.d0)
    if noise_std > 0:
        if rng is None:
            raise UsageError("rng required when noise_std > 0")
        rssi += rng.normal(0.0, noise_std)
    return rssi


def distance_from_rssi(rssi, params: PathLossParams):
    """Invert the noise-free path loss model; any real RSSI maps to d > 0."""
    return params.d0 * 10.0 ** ((params.pr_d0 - rssi) / (10.0 * params.n_p))


def _distance_scale_draws(n, params: PathLossParams, rng):
    """Multiplicative measured/true distance factors for n independent draws.

    The raw inversion d0*10^((pr_d0-rssi)/(10 n_p)) of a Gaussian RSSI error is
    log-normal and therefore biased high; each draw is rescaled by the mean of
    its log-normal factor (known because sigma_r is drawn here), which makes
    the measurement exactly unbiased while leaving the spread untouched.
    """
    lo, hi = params.sigma_r_range
    sigma_r = rng.uniform(lo, hi, size=n) if hi > lo else np.full(n, float(lo))
    eps = rng.normal(0.0, 1.0, size=n) * sigma_r
    s = sigma_r * _LN10 / (10.0 * params.n_p)
    return np.exp(-eps * _LN10 / (10.0 * params.n_p) - 0.5 * s * s)


def measure_distance(d_true, params: PathLossParams, rng):
    """Measure a distance through the noisy RSSI channel.

    Draws sigma_r uniformly from the configured bounds, perturbs the RSSI and
    inverts the path loss model. The result is empirically unbiased and is
    clamped to a small positive floor.
    """
    if d_true <= 0:
        raise DomainError(f"true distance must be positive, got {d_true}")
    factor = _distance_scale_draws(1, params, rng)[0]
    return max(d_true * factor, DISTANCE_FLOOR_M)


def measure_distances(d_true, params: PathLossParams, rng):
    """Vectorized :func:`measure_distance` for an array of true distances."""
    d_true = np.asarray(d_true, dtype=float)
    if np.any(d_true <= 0):
        raise DomainError("true distances must be positive")
    factors = _distance_scale_draws(d_true.size, params, rng).reshape(d_true.shape)
    return np.maximum(d_true * factors, DISTANCE_FLOOR_M)


def sample_position(p_true, sigma_p, rng):
    """Reported anchor position: truth plus N(0, sigma_p^2/3) noise per axis.

    The per-axis variance sigma_p^2/3 makes E||delta||^2 = sigma_p^2, i.e.
    sigma_p^2 is the total position error power.
    """
    if sigma_p < 0:
        raise DomainError(f"sigma_p must be non-negative, got {sigma_p}")
    p_true = np.asarray(p_true, dtype=float)
    if sigma_p == 0:
        return p_true.copy()
    return p_true + rng.normal(0.0, sigma_p / math.sqrt(3.0), size=3)


def mixture_pdf(x, mu, sigma_range):
    """Density of a zero-mean-style Gaussian whose std is uniform on a range.

    Evaluates f(x) = 1/(b-a) * integral_a^b N(x; mu, s^2) ds by adaptive
    quadrature. A degenerate range (b == a) falls back to the plain Gaussian.
    The density is analytically intractable, so only a numeric value is
    returned; it integrates to 1 over the real line to 1e-4.
    """
    a, b = sigma_range
    if not (0 < a <= b):
        raise DomainError(f"need 0 < sigma_min <= sigma_max, got {sigma_range}")
    x = np.asarray(x, dtype=float)
    if b - a < 1e-12:
        out = norm.pdf(x, loc=mu, scale=a)
        return float(out) if out.ndim == 0 else out

    def _one(xi):
        val, _ = integrate.quad(
            lambda s: math.exp(-0.5 * ((xi - mu) / s) ** 2) / (s * math.sqrt(2 * math.pi)),
            a, b, epsabs=1e-12, epsrel=1e-10,
        )
        return val / (b - a)

    if x.ndim == 0:
        return _one(float(x))
    return np.array([_one(float(xi)) for xi in x])


class ErrorTable:
    """Piecewise-linear lookup of an error scale over an increasing abscissa.

    Lookups are exact at the knots, interpolate linearly between them and
    clamp at the ends. Immutable after construction.
    """

    def __init__(self, x, sigma, mu):
        x = np.asarray(x, dtype=float)
        sigma = np.asarray(sigma, dtype=float)
        mu = np.asarray(mu, dtype=float)
        if x.size == 0:
            raise UsageError("error table needs at least one knot")
        if np.any(np.diff(x) <= 0):
            raise UsageError("error table abscissa must be strictly increasing")
        self.x = x
        self.sigma = sigma
        self.mu = mu

    def sigma_at(self, x):
        return np.interp(x, self.x, self.sigma)

    def mu_at(self, x):
        return np.interp(x, self.x, self.mu)

    @property
    def entries(self):
        return list(zip(self.x.tolist(), self.sigma.tolist(), self.mu.tolist()))


class ModeledErrorTable(ErrorTable):
    """sigma_M and mu_f of the fused distance+position error per coverage radius."""


class DistanceErrorTable(ErrorTable):
    """sigma_d and mu_d of the pure ranging error at a fixed true distance."""


def _fused_scene(coverage, params, profile, n, rng):
    """Anchor draws for fused-error sampling around a target at the origin.

    Anchors sit at uniform distances in (0, coverage] and uniformly random
    directions; their reported positions carry the profile's position error
    and their distances are measured through the RSSI channel. Returns
    (reported positions (n,3), measured distances, drawn sigma_p values).
    """
    d = coverage * (1.0 - rng.random(n))  # uniform on (0, coverage]
    u = rng.normal(size=(n, 3))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    lo, hi = profile.sigma_p_range
    sigma_p = rng.uniform(lo, hi, size=n) if hi > lo else np.full(n, float(lo))
    delta = rng.normal(size=(n, 3)) * (sigma_p / math.sqrt(3.0))[:, None]
    reported = d[:, None] * u + delta
    d_meas = measure_distances(d, params, rng)
    return reported, d_meas, sigma_p


def _fused_error_samples(coverage, params, profile, n, rng):
    """Samples of the fused error d_measured - ||reported anchor position||.

    The position error enters the range error at whatever relative angle the
    draw produces, which is exactly the random-angle combination of the two
    error sources.
    """
    reported, d_meas, _ = _fused_scene(coverage, params, profile, n, rng)
    return d_meas - np.linalg.norm(reported, axis=1)


def build_modeled_error_table(params, profile, coverages, samples_per_point, rng):
    """Monte Carlo table of the fused error scale sigma_M over coverage radius.

    For each coverage the anchor distance is uniform in (0, coverage], the
    position error magnitude is chi distributed from ``sample_position`` and
    enters the range error at a random relative angle. sigma_M is the sample
    standard deviation, mu_f the sample mean (near zero under this model).
    """
    coverages = np.asarray(coverages, dtype=float)
    if coverages.size == 0:
        raise UsageError("coverage list must be non-empty")
    if np.any(np.diff(coverages) <= 0):
        raise UsageError("coverages must be strictly increasing")
    if samples_per_point < 10_000:
        raise UsageError("samples_per_point must be at least 10^4")
    sig, mu = [], []
    for c in coverages:
        eps = _fused_error_samples(float(c), params, profile, int(samples_per_point), rng)
        sig.append(float(np.std(eps)))
        mu.append(float(np.mean(eps)))
    return ModeledErrorTable(coverages, sig, mu)


def build_distance_error_table(params, distances, samples_per_point, rng):
    """Monte Carlo table of the pure ranging error scale over true distance."""
    distances = np.asarray(distances, dtype=float)
    if distances.size == 0:
        raise UsageError("distance list must be non-empty")
    if np.any(np.diff(distances) <= 0):
        raise UsageError("distances must be strictly increasing")
    sig, mu = [], []
    for d in distances:
        d_meas = measure_distances(np.full(int(samples_per_point), float(d)), params, rng)
        err = d_meas - d
        sig.append(float(np.std(err)))
        mu.append(float(np.mean(err)))
    return DistanceErrorTable(distances, sig, mu)


def combined_sigma(dist_table: DistanceErrorTable, d_measured, sigma_p):
    """Per-beacon fused error scale sqrt(sigma_d(d)^2 + sigma_p^2).

    This is the per-anchor sigma the weighted estimators and the anomaly
    detector use; the ranging part comes from the distance-indexed reference
    table, the position part from the anchor's reported error power.
    """
    sd = dist_table.sigma_at(d_measured)
    return np.sqrt(sd * sd + np.square(sigma_p))
