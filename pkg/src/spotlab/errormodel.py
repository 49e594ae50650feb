"""Measurement-uncertainty budget and noise sampler.

Encodes the wavemeter and alignment error budget as data so every module
reports sigmas from one place.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from spotlab.errors import DomainError


@dataclass(frozen=True)
class ErrorBudget:
    """Frequency-measurement error budget, all values in Hz.

    sigma_absolute   wavemeter absolute accuracy (applies to transition
                     frequencies)
    sigma_relative   wavemeter relative accuracy for closely spaced lines
    alignment_slope  systematic shift per degree of laser misalignment
                     (Hz/deg)
    resolution_floor smallest detuning the spot method can resolve
    """

    sigma_absolute: float = 60e6
    sigma_relative: float = 20e6
    alignment_slope: float = 15e6
    resolution_floor: float = 10e6

    def __post_init__(self) -> None:
        vals = (self.sigma_absolute, self.sigma_relative,
                self.alignment_slope, self.resolution_floor)
        if any(v < 0 for v in vals):
            raise DomainError("error budget entries must be >= 0")


def measured(
    true_frequency_hz: float,
    budget: ErrorBudget,
    kind: str = "absolute",
    misalignment_deg: float = 0.0,
    seed: int = 0,
) -> float:
    """Apply the budget to a true frequency: Gaussian noise plus the
    signed systematic alignment offset.

    ``kind`` selects the sigma: "absolute" for transition frequencies,
    "relative" for frequency differences.
    """
    if misalignment_deg < 0:
        raise DomainError("misalignment must be >= 0 (sign is geometric)")
    if kind == "absolute":
        sigma = budget.sigma_absolute
    elif kind == "relative":
        sigma = budget.sigma_relative
    else:
        raise DomainError(f"unknown measurement kind {kind!r}")
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, sigma) if sigma > 0 else 0.0
    return true_frequency_hz + noise + budget.alignment_slope * misalignment_deg


def combine_shift_sigma(
    a_resolved: bool,
    b_resolved: bool,
    budget: ErrorBudget,
    same_line: bool = False,
) -> float:
    """Sigma to quote on an isotope shift between two measured lines.

    Reproduces the reporting convention of the shift table: 30 MHz when
    both lines are resolved, 60 MHz when either sits in a merged cluster,
    0 for a line against itself.
    """
    if same_line:
        return 0.0
    if a_resolved and b_resolved:
        # two sigma classes of the shift table: 30 MHz resolved,
        # 60 MHz once line overlap limits the measurement
        return budget.sigma_absolute / 2
    return budget.sigma_absolute
