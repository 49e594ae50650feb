"""Two-level laser-atom interaction.

Per-atom Doppler detuning against a chosen line, the saturated-Lorentzian
photon scattering rate, and the power-broadening law.  All functions are
pure and accept scalars or numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from spotlab.beamsim import AtomSample
from spotlab.errors import DomainError
from spotlab.ybdata import PhysicalConstants, TransitionCatalog


@dataclass(frozen=True)
class LaserBeam:
    """One of the four probe beams crossing the atomic beam.

    The beam is a straight line through ``origin`` along ``direction``
    with a Gaussian transverse intensity profile of 1/e^2 radius
    ``waist_radius``, cut off hard at 3 waist radii.
    """

    index: int
    origin: tuple[float, float, float]
    direction: tuple[float, float, float]
    waist_radius: float
    peak_intensity: float

    def __post_init__(self) -> None:
        norm = math.sqrt(sum(d * d for d in self.direction))
        if abs(norm - 1.0) > 1e-9:
            raise DomainError(f"beam {self.index} direction is not unit length")
        if self.waist_radius <= 0:
            raise DomainError("waist_radius must be > 0")
        if self.peak_intensity < 0:
            raise DomainError("peak_intensity must be >= 0")


@dataclass(frozen=True)
class LaserState:
    """Laser tuning shared by all four beams.

    ``detuning_hz`` is the signed offset of the laser frequency from the
    174Yb line.
    """

    detuning_hz: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.detuning_hz):
            raise DomainError("detuning must be finite")


def doppler_detuning(
    atom: AtomSample,
    beam: LaserBeam,
    state: LaserState,
    line_hz: float,
    cat: TransitionCatalog,
    const: PhysicalConstants,
) -> float:
    """Effective detuning seen by one atom in one beam, Hz.

    The laser sits at f_ref + detuning; the atom's line sits at
    ``line_hz``; the first-order Doppler term is (line/c) * (v . beam).
    Positive result = laser blue of the atom's rest-frame resonance.
    """
    if line_hz <= 0:
        raise DomainError("line frequency must be > 0")
    v_along = float(np.dot(atom.velocity, beam.direction))
    return (cat.f_ref_hz + state.detuning_hz - line_hz) - (line_hz / const.c) * v_along


def scattering_rate(delta_eff_hz, s, gamma_fwhm_hz: float):
    """Saturated-Lorentzian photon scattering rate, photons/s.

    R = pi * Gamma * (s/2) / (1 + s + (2 delta / Gamma)^2)

    Even in delta, monotone increasing in s, saturating at pi*Gamma/2.
    """
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise DomainError("saturation parameter must be >= 0")
    delta = np.asarray(delta_eff_hz, dtype=float)
    rate = (math.pi * gamma_fwhm_hz) * (s / 2.0) / (
        1.0 + s + (2.0 * delta / gamma_fwhm_hz) ** 2
    )
    if rate.ndim == 0:
        return float(rate)
    return rate


def saturation_parameter(intensity_w_m2: float, cat: TransitionCatalog) -> float:
    """s = I / I_sat (60 mW/cm^2 -> 1)."""
    if intensity_w_m2 < 0:
        raise DomainError("intensity must be >= 0")
    return intensity_w_m2 / cat.i_sat_w_m2


def power_broadened_fwhm(s: float, cat: TransitionCatalog) -> float:
    """Saturation-broadened linewidth Gamma * sqrt(1 + s), Hz."""
    if s < 0:
        raise DomainError("saturation parameter must be >= 0")
    return cat.gamma_fwhm_hz * math.sqrt(1.0 + s)


def four_beam_array(
    distances_m: tuple[float, float, float, float] = (0.004, 0.010, 0.016, 0.022),
    waist_radius: float = 0.0005,
    peak_intensity: float = 45.0,
) -> tuple[LaserBeam, LaserBeam, LaserBeam, LaserBeam]:
    """Standard four-beam geometry.

    Parallel beams along +/-x in the camera (x-z) plane, stacked at the
    given distances from the oven aperture along z.  Odd-numbered beams
    (1, 3) propagate along -x, even-numbered (2, 4) along +x, so each
    pair is parallel within itself and anti-parallel to the other -- the
    arrangement that makes pair-wise spot alignment meaningful.

    Only the furthest distance (22 mm) is constrained by the original
    bench; the spacing in between is a plausible reconstruction and can
    be overridden per-call or via the config file.
    """
    if len(distances_m) != 4:
        raise DomainError("expected exactly 4 beam distances")
    beams = []
    for i, z in enumerate(distances_m, start=1):
        sign = -1.0 if i % 2 else 1.0
        beams.append(
            LaserBeam(
                index=i,
                origin=(0.0, 0.0, z),
                direction=(sign, 0.0, 0.0),
                waist_radius=waist_radius,
                peak_intensity=peak_intensity,
            )
        )
    return tuple(beams)
