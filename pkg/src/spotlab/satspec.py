"""Pump/probe saturation absorption spectroscopy on the atomic beam.

Counter-propagating pump and probe cross the beam perpendicular to the
reference axis.  Both address the transverse velocity component v_t: the
probe sees delta0 - k v_t, the pump delta0 + k v_t, so only near v_t = 0
does the pump's hole burning deplete the class the probe interrogates --
the Lamb dip that marks each line centre on top of the transverse-Doppler
background.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace

import numpy as np

from spotlab.beamsim import OvenConfig, derive_seed, sample_atoms
from spotlab.errors import DomainError, InsufficientDataError
from spotlab.spectro import PeakEstimate, _assign_lines
from spotlab.ybdata import LineCatalog, line_frequency


@dataclass(frozen=True)
class SatConfig:
    """Pump/probe parameters; intensities in W/m^2.

    ``noise_rms`` adds seeded Gaussian detection noise (a.u.) to the
    simulated absorption for realism studies; it defaults to 0 and the
    acceptance checks run noiseless.
    """

    pump_intensity: float = 1270.0   # 127 mW/cm^2
    probe_intensity: float = 20.0    # 2 mW/cm^2
    pump_on: bool = True
    probe_direction: tuple[float, float, float] = (1.0, 0.0, 0.0)
    noise_rms: float = 0.0

    def __post_init__(self) -> None:
        if self.pump_intensity < 0 or self.probe_intensity < 0:
            raise DomainError("intensities must be >= 0")
        if self.noise_rms < 0:
            raise DomainError("noise_rms must be >= 0")


@dataclass
class Spectrum:
    """Probe absorption (a.u.) versus absolute laser frequency."""

    frequency_hz: np.ndarray
    absorption: np.ndarray
    config: SatConfig

    def __post_init__(self) -> None:
        if np.any(self.absorption < 0):
            raise DomainError("absorption must be >= 0")

    def __len__(self) -> int:
        return len(self.frequency_hz)


def simulate_spectrum(
    config: SatConfig,
    oven: OvenConfig,
    catalog: LineCatalog,
    span_hz: tuple[float, float],
    step_hz: float,
    seed: int,
    n_atoms: int = 20_000,
) -> Spectrum:
    """Monte-Carlo probe-absorption spectrum.

    Per atom and line: absorption = L(delta_probe; probe-broadened width)
    * (1 - depletion), depletion = s_pump / (1 + s_pump +
    (2 delta_pump / Gamma)^2).  Frequencies are absolute; the span is
    given as detuning from the 174 line.  Atom sampling is seeded exactly
    like the scan module, so a pump-off background run at the same seed
    shares its atoms with the signal run.
    """
    if step_hz <= 0:
        raise DomainError("step must be > 0")
    lo, hi = span_hz
    if hi < lo:
        raise DomainError("scan range is reversed")
    if lo != hi and step_hz > hi - lo:
        raise DomainError("step larger than scan range")

    trans = catalog.transition
    const = catalog.constants
    atoms = sample_atoms(oven, n_atoms, derive_seed(seed, 0))
    v_t = atoms.velocities @ np.asarray(config.probe_direction)
    transit = 1.0 / atoms.speeds

    s_probe = config.probe_intensity / trans.i_sat_w_m2
    s_pump = config.pump_intensity / trans.i_sat_w_m2 if config.pump_on else 0.0
    gamma = trans.gamma_fwhm_hz
    gamma_probe = gamma * math.sqrt(1.0 + s_probe)

    detunings = (
        np.array([lo])
        if lo == hi
        else lo + step_hz * np.arange(int(round((hi - lo) / step_hz)) + 1)
    )
    iso_total = catalog.isotope_abundances()
    absorption = np.zeros(len(detunings))
    for mass in np.unique(atoms.isotopes):
        sel = atoms.isotopes == mass
        for line in catalog.lines_of(int(mass)):
            f_line = line_frequency(line, trans)
            k = f_line / const.c
            delta0 = (
                trans.f_ref_hz + detunings[:, None] - f_line
            )  # (n_f, 1)
            dv = k * v_t[sel][None, :]  # (1, n_atoms)
            delta_probe = delta0 - dv
            delta_pump = delta0 + dv
            lorentz = 1.0 / (1.0 + (2.0 * delta_probe / gamma_probe) ** 2)
            depletion = s_pump / (1.0 + s_pump + (2.0 * delta_pump / gamma) ** 2)
            branch = line.abundance / iso_total[int(mass)]
            absorption += branch * np.sum(
                lorentz * (1.0 - depletion) * transit[sel][None, :], axis=1
            )

    if config.noise_rms > 0:
        noise_rng = np.random.default_rng(derive_seed(seed, 1))
        absorption = np.clip(
            absorption + noise_rng.normal(0.0, config.noise_rms, absorption.shape),
            0.0, None,
        )

    return Spectrum(
        frequency_hz=trans.f_ref_hz + detunings,
        absorption=absorption,
        config=config,
    )


def run_pump_probe(
    config: SatConfig,
    oven: OvenConfig,
    catalog: LineCatalog,
    span_hz: tuple[float, float],
    step_hz: float,
    seed: int,
    n_atoms: int = 20_000,
) -> tuple[Spectrum, Spectrum]:
    """Signal (pump on) and background (pump blocked) at the same seed."""
    signal = simulate_spectrum(
        replace(config, pump_on=True), oven, catalog, span_hz, step_hz, seed, n_atoms
    )
    background = simulate_spectrum(
        replace(config, pump_on=False), oven, catalog, span_hz, step_hz, seed, n_atoms
    )
    return signal, background


def extract_dips(
    signal: Spectrum,
    background: Spectrum,
    catalog: LineCatalog,
    min_contrast: float = 0.02,
) -> list[PeakEstimate]:
    """Lamb-dip centres from the background - signal difference.

    Dips must rise above ``min_contrast`` of the largest difference;
    centres are parabolic-interpolated; line assignment and cluster
    merging follow the same 60 MHz rule as the scan module.
    """
    if len(signal) != len(background) or np.any(
        signal.frequency_hz != background.frequency_hz
    ):
        raise DomainError("signal and background grids differ")
    if len(signal) < 5:
        raise InsufficientDataError("need at least 5 spectrum points")
    diff = background.absorption - signal.absorption
    top = float(diff.max())
    if top <= 0:
        return []

    from scipy.signal import find_peaks, peak_widths

    idx, props = find_peaks(diff, prominence=min_contrast * top)
    if idx.size == 0:
        return []
    widths, _, _, _ = peak_widths(diff, idx, rel_height=0.5)
    step = float(signal.frequency_hz[1] - signal.frequency_hz[0])
    f_ref = catalog.transition.f_ref_hz

    peaks = []
    for k, i in enumerate(idx):
        # parabolic vertex through the three points around the maximum
        if 0 < i < len(diff) - 1:
            denom = diff[i - 1] - 2 * diff[i] + diff[i + 1]
            shift = 0.5 * (diff[i - 1] - diff[i + 1]) / denom if denom else 0.0
        else:
            shift = 0.0
        center = float(signal.frequency_hz[i] + shift * step)
        peaks.append((center - f_ref, max(float(widths[k]) * step, step), float(diff[i])))
    return _assign_lines(peaks, catalog)


def spectrum_csv(signal: Spectrum, background: Spectrum) -> str:
    """Joint CSV of signal and background absorption."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["f_hz", "absorption", "background"])
    for i in range(len(signal)):
        writer.writerow([
            f"{signal.frequency_hz[i]:.1f}",
            f"{signal.absorption[i]:.9e}",
            f"{background.absorption[i]:.9e}",
        ])
    return buf.getvalue()
