"""Doppler-shift law and mean-velocity extraction.

The shifted resonance frequency at angle theta between atomic motion and
laser propagation is f0 + (f0/c) v cos(theta).  Over a few-GHz window the
slope factor f0/c is constant to ~1e-9 relative, so the weighted
least-squares problem is solved exactly in the linear parameters
(f0, b = f0 v / c) via the normal equations; v = b c / f0 afterwards.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from spotlab.errors import DomainError, InsufficientDataError, RankDeficientError
from spotlab.ybdata import PhysicalConstants


@dataclass(frozen=True)
class DopplerDataset:
    """Angle-resolved shifted-frequency measurements.

    ``theta_deg`` is the angle between the atomic beam and the laser
    propagation; ``sigma_hz`` the per-point measurement uncertainty.
    """

    theta_deg: np.ndarray
    frequency_hz: np.ndarray
    sigma_hz: np.ndarray

    def __post_init__(self) -> None:
        t = np.asarray(self.theta_deg, dtype=float)
        f = np.asarray(self.frequency_hz, dtype=float)
        s = np.asarray(self.sigma_hz, dtype=float)
        if not (len(t) == len(f) == len(s)):
            raise DomainError("dataset columns must have equal length")
        if np.any((t <= 0) | (t >= 180)):
            raise DomainError("angles must lie strictly between 0 and 180 deg")
        if np.any(s <= 0):
            raise DomainError("sigmas must be > 0")
        object.__setattr__(self, "theta_deg", t)
        object.__setattr__(self, "frequency_hz", f)
        object.__setattr__(self, "sigma_hz", s)

    def __len__(self) -> int:
        return len(self.theta_deg)


@dataclass(frozen=True)
class DopplerFitResult:
    """Fitted (v, f0) with covariance in (m/s, Hz) units."""

    v_mean: float
    f0_hz: float
    covariance: np.ndarray  # 2x2, order (v, f0)
    residuals_hz: np.ndarray
    chi2_per_dof: float

    @property
    def v_sigma(self) -> float:
        return math.sqrt(float(self.covariance[0, 0]))

    @property
    def f0_sigma(self) -> float:
        return math.sqrt(float(self.covariance[1, 1]))


def doppler_shift(f0_hz: float, v: float, theta_deg: float, const: PhysicalConstants) -> float:
    """First-order Doppler shift (f0/c) v cos(theta), Hz."""
    if f0_hz <= 0:
        raise DomainError("f0 must be > 0")
    return (f0_hz / const.c) * v * math.cos(math.radians(theta_deg))


def objective_gradient(
    f0_hz: float, b_hz: float, dataset: DopplerDataset
) -> tuple[float, np.ndarray]:
    """Weighted least-squares objective and its analytic gradient in
    (f0, b).  Exposed for the finite-difference consistency check."""
    cos_t = np.cos(np.radians(dataset.theta_deg))
    r = (dataset.frequency_hz - f0_hz - b_hz * cos_t) / dataset.sigma_hz
    value = float(np.sum(r**2))
    g_f0 = float(np.sum(-2.0 * r / dataset.sigma_hz))
    g_b = float(np.sum(-2.0 * r * cos_t / dataset.sigma_hz))
    return value, np.array([g_f0, g_b])


def fit(dataset: DopplerDataset, const: PhysicalConstants) -> DopplerFitResult:
    """Exact weighted linear solve of f_i = f0 + b cos(theta_i).

    The covariance of (f0, b) is the inverse of the normal matrix with
    the stated per-point sigmas (no chi^2 rescaling); it is transformed
    to (v, f0) through the Jacobian of v = b c / f0.
    """
    if len(dataset) < 2:
        raise InsufficientDataError("need at least 2 points to fit")
    cos_t = np.cos(np.radians(dataset.theta_deg))
    if np.ptp(cos_t) < 1e-12:
        raise RankDeficientError("all angles have the same cosine")

    w = 1.0 / dataset.sigma_hz**2
    A = np.stack([np.ones(len(dataset)), cos_t], axis=1)
    normal = A.T @ (A * w[:, None])
    rhs = A.T @ (dataset.frequency_hz * w)
    try:
        f0_b = np.linalg.solve(normal, rhs)
        cov_f0b = np.linalg.inv(normal)
    except np.linalg.LinAlgError as exc:
        raise RankDeficientError(str(exc)) from exc
    f0, b = float(f0_b[0]), float(f0_b[1])

    v = b * const.c / f0
    # v = b c / f0: propagate (f0, b) covariance to (v, f0)
    jac = np.array([[-b * const.c / f0**2, const.c / f0], [1.0, 0.0]])
    cov_vf = jac @ cov_f0b @ jac.T

    model = f0 + b * cos_t
    residuals = dataset.frequency_hz - model
    dof = len(dataset) - 2
    chi2 = float(np.sum((residuals / dataset.sigma_hz) ** 2))
    return DopplerFitResult(
        v_mean=v,
        f0_hz=f0,
        covariance=cov_vf,
        residuals_hz=residuals,
        chi2_per_dof=chi2 / dof if dof > 0 else float("nan"),
    )


def synthesize_dataset(
    v: float,
    f0_hz: float,
    angles_deg,
    sigma_hz: float,
    seed: int,
    const: PhysicalConstants,
) -> DopplerDataset:
    """Shifted-frequency records on the Doppler law plus seeded Gaussian
    noise of width ``sigma_hz`` (0 gives exact model points)."""
    angles = np.asarray(angles_deg, dtype=float)
    if angles.size == 0:
        raise DomainError("need at least one angle")
    rng = np.random.default_rng(seed)
    f = f0_hz + (f0_hz / const.c) * v * np.cos(np.radians(angles))
    if sigma_hz > 0:
        f = f + rng.normal(0.0, sigma_hz, size=angles.size)
    sig = np.full(angles.size, sigma_hz if sigma_hz > 0 else 1.0)
    return DopplerDataset(theta_deg=angles, frequency_hz=f, sigma_hz=sig)


#: rotation angles used on the original bench (acute pair and supplements)
BENCH_ANGLES_DEG = (63.0, 70.0, 75.0, 80.0, 100.0, 105.0, 110.0, 117.0)
