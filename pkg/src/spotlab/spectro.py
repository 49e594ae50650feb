"""Scan orchestration and resonance extraction.

Sweeps the laser detuning, renders one fluorescence frame per step, and
reduces every frame to its alignment metrics.  Doppler-free resonances
are located where the spot pattern turns collinear inside a
fluorescence-bright window; Doppler-shifted resonances are located where
one counter-propagating pair's spots cross the reference axis.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.signal import find_peaks, peak_widths

from spotlab import spotfield
from spotlab.beamsim import OvenConfig, derive_seed, sample_atoms
from spotlab.errormodel import ErrorBudget, combine_shift_sigma
from spotlab.errors import (
    DegeneratePairError,
    DomainError,
    InsufficientDataError,
    MissingReferenceError,
    NumericalError,
)
from spotlab.photonics import LaserBeam, LaserState
from spotlab.spotfield import FrameSpec
from spotlab.ybdata import IsotopeLine, LineCatalog, line_frequency

#: lines within this window of one found centre are assigned together
MERGE_WINDOW_HZ = 60e6


@dataclass(frozen=True)
class ScanSetup:
    """Everything a scan needs besides the detuning axis."""

    catalog: LineCatalog
    oven: OvenConfig
    beams: tuple[LaserBeam, LaserBeam, LaserBeam, LaserBeam]
    frame_spec: FrameSpec = field(default_factory=FrameSpec)
    atoms_per_frame: int = 100_000
    n_threads: int = 1

    @property
    def angle_deg(self) -> float:
        """Angle between the reference axis and the beam-2/4 direction."""
        ax = np.asarray(self.oven.axis)
        d = np.asarray(self.beams[1].direction)
        return math.degrees(math.acos(float(np.clip(np.dot(ax, d), -1, 1))))


@dataclass
class ScanTrace:
    """Alignment metrics versus detuning (Hz relative to the 174 line)."""

    detunings_hz: np.ndarray
    perp_residual_m: np.ndarray
    pair24_offset_m: np.ndarray
    pair13_offset_m: np.ndarray
    total_intensity: np.ndarray
    angle_deg: float
    atoms_per_frame: int
    seed: int

    def __post_init__(self) -> None:
        if len(self.detunings_hz) == 0:
            raise DomainError("empty scan trace")
        if np.any(np.diff(self.detunings_hz) <= 0) and len(self.detunings_hz) > 1:
            raise DomainError("detunings must be strictly increasing")

    def __len__(self) -> int:
        return len(self.detunings_hz)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(
            ["detuning_hz", "perp_residual_m", "pair24_offset_m",
             "pair13_offset_m", "total_intensity"]
        )
        for i in range(len(self)):
            writer.writerow([
                f"{self.detunings_hz[i]:.1f}",
                f"{self.perp_residual_m[i]:.9e}",
                f"{self.pair24_offset_m[i]:.9e}",
                f"{self.pair13_offset_m[i]:.9e}",
                f"{self.total_intensity[i]:.9e}",
            ])
        return buf.getvalue()


@dataclass(frozen=True)
class PeakEstimate:
    """One located resonance.

    ``center_hz`` is absolute; ``assigned_lines`` lists the catalog lines
    this feature covers; ``merged`` marks an unresolved cluster.
    """

    center_hz: float
    width_fwhm_hz: float
    amplitude: float
    assigned_lines: tuple[IsotopeLine, ...]
    merged: bool

    def __post_init__(self) -> None:
        if self.width_fwhm_hz <= 0:
            raise DomainError("width_fwhm must be > 0")
        if self.merged != (len(self.assigned_lines) > 1):
            raise DomainError("merged flag inconsistent with assignment")


@dataclass(frozen=True)
class ShiftRow:
    """One row of the recovered isotope-shift table."""

    line: IsotopeLine
    shift_hz: float
    sigma_hz: float
    merged: bool


def run_scan(
    span_hz: tuple[float, float],
    step_hz: float,
    setup: ScanSetup,
    seed: int,
) -> ScanTrace:
    """Render one frame per detuning step and record alignment metrics.

    Scan points are independent: point ``i`` draws its atoms from the
    child seed (seed, i), so the trace is reproducible and can be
    computed in parallel without changing results.
    """
    lo, hi = span_hz
    if step_hz <= 0:
        raise DomainError("step must be > 0")
    if hi < lo:
        raise DomainError("scan range is reversed")
    if lo == hi:
        detunings = np.array([lo])
    else:
        if step_hz > hi - lo:
            raise DomainError("step larger than scan range")
        detunings = lo + step_hz * np.arange(int(round((hi - lo) / step_hz)) + 1)
        detunings = detunings[detunings <= hi + 1e-6]

    resid = np.empty(len(detunings))
    p24 = np.empty(len(detunings))
    p13 = np.empty(len(detunings))
    total = np.empty(len(detunings))
    for i, det in enumerate(detunings):
        atoms = sample_atoms(setup.oven, setup.atoms_per_frame, derive_seed(seed, i))
        frame = spotfield.render_frame(
            atoms, setup.beams, LaserState(float(det)), setup.catalog,
            setup.frame_spec, n_threads=setup.n_threads,
        )
        cents = spotfield.extract_centroids(frame, setup.beams)
        try:
            result = spotfield.alignment(cents, setup.oven, setup.beams)
            resid[i] = result.perp_residual
            p24[i] = result.pair24_offset
            p13[i] = result.pair13_offset
        except InsufficientDataError:
            # far off resonance one pair can go dark; keep whatever
            # offsets exist, the collinearity metric is undefined
            p24[i], p13[i] = spotfield.pair_offsets(cents, setup.oven)
            resid[i] = float("nan")
        total[i] = frame.total_intensity

    return ScanTrace(
        detunings_hz=detunings,
        perp_residual_m=resid,
        pair24_offset_m=p24,
        pair13_offset_m=p13,
        total_intensity=total,
        angle_deg=setup.angle_deg,
        atoms_per_frame=setup.atoms_per_frame,
        seed=seed,
    )


def _parabolic_vertex(x: np.ndarray, y: np.ndarray, i: int) -> float:
    """Vertex abscissa of the parabola through points i-1, i, i+1."""
    if i <= 0 or i >= len(x) - 1:
        return float(x[i])
    if not np.all(np.isfinite(y[i - 1 : i + 2])):
        return float(x[i])
    denom = y[i - 1] - 2 * y[i] + y[i + 1]
    if denom == 0:
        return float(x[i])
    shift = 0.5 * (y[i - 1] - y[i + 1]) / denom
    return float(x[i] + shift * (x[i + 1] - x[i]))


def _refine_center(
    det: np.ndarray, split: np.ndarray, resid: np.ndarray, lo: int, hi: int, ref: int
) -> float:
    """Sub-step resonance centre inside trace window [lo, hi].

    Primary: linear interpolation of the zero crossing of the pair-split
    signal (it passes through zero linearly at resonance); the crossing
    closest to index ``ref`` wins.  Fallback: parabolic interpolation of
    the squared collinearity residual around its minimum.
    """
    sl = slice(lo, hi + 1)
    s = split[sl]
    x = det[sl]
    finite = np.isfinite(s[:-1]) & np.isfinite(s[1:])
    sign_change = np.flatnonzero(
        finite & (np.signbit(s[:-1]) != np.signbit(s[1:]))
    )
    if sign_change.size:
        j = sign_change[np.argmin(np.abs(sign_change + lo - ref))]
        x0, x1, s0, s1 = x[j], x[j + 1], s[j], s[j + 1]
        if s1 != s0:
            return float(x0 - s0 * (x1 - x0) / (s1 - s0))
    r = np.where(np.isfinite(resid[sl]), resid[sl], np.inf) ** 2
    i_min = int(np.argmin(r))
    return _parabolic_vertex(x, r, i_min)


def refine_alignment_center(trace: ScanTrace) -> float:
    """Sub-step collinearity point of a targeted window, Hz detuning.

    Parabolic interpolation of the squared perp-residual around its
    minimum; meant for narrow scans already centred on one feature
    (survey scans should use :func:`find_doppler_free_resonances`).
    """
    if len(trace) < 3:
        raise InsufficientDataError("need at least 3 scan points")
    r = np.where(
        np.isfinite(trace.perp_residual_m), trace.perp_residual_m, np.inf
    ) ** 2
    i_min = int(np.argmin(r))
    return _parabolic_vertex(trace.detunings_hz, r, i_min)


def find_doppler_free_resonances(
    trace: ScanTrace,
    catalog: LineCatalog,
    min_prominence: float | None = None,
) -> list[PeakEstimate]:
    """Locate spot-alignment resonances in a scan trace.

    Candidate windows are local maxima of total fluorescence (resonances
    light up); within each window the centre is the collinearity point of
    the spot pattern (zero of pair24 - pair13, falling back to the
    perp-residual minimum).  The adaptive prominence threshold is the
    smaller of 3x the 10th intensity percentile (a background estimate,
    keeps sub-percent-abundance lines alive in survey scans) and 5% of
    the trace range (keeps narrow windows from being over-split).  Found
    centres then claim catalog lines: each line goes to its nearest
    centre within 60 MHz, and a centre holding more than one line is
    flagged merged.
    """
    if len(trace) < 5:
        raise InsufficientDataError("need at least 5 scan points")
    intensity = trace.total_intensity
    split = trace.pair24_offset_m - trace.pair13_offset_m
    if min_prominence is None:
        span = float(intensity.max() - intensity.min())
        background = float(np.percentile(intensity, 10))
        min_prominence = max(min(3.0 * background, 0.05 * span), 1e-12 * span)
    idx, props = find_peaks(intensity, prominence=min_prominence)
    if idx.size == 0:
        return []

    widths, _, _, _ = peak_widths(intensity, idx, rel_height=0.5)
    step = float(trace.detunings_hz[1] - trace.detunings_hz[0])

    peaks: list[tuple[float, float, float]] = []
    for k, i in enumerate(idx):
        lo = int(props["left_bases"][k])
        hi = int(props["right_bases"][k])
        center_det = _refine_center(
            trace.detunings_hz, split, trace.perp_residual_m, lo, hi, i
        )
        width = max(float(widths[k]) * step, step)
        peaks.append((center_det, width, float(intensity[i])))

    return _assign_lines(peaks, catalog)


def _assign_lines(
    peaks: list[tuple[float, float, float]], catalog: LineCatalog
) -> list[PeakEstimate]:
    """Each catalog line claims its nearest found centre within 60 MHz."""
    f_ref = catalog.transition.f_ref_hz
    centers = np.array([p[0] for p in peaks])
    assigned: dict[int, list[IsotopeLine]] = {k: [] for k in range(len(peaks))}
    for line in catalog.lines:
        d = np.abs(centers - line.shift_from_174_hz)
        k = int(np.argmin(d))
        if d[k] <= MERGE_WINDOW_HZ:
            assigned[k].append(line)
    out = []
    for k, (center_det, width, amp) in enumerate(peaks):
        lines = tuple(
            sorted(assigned[k], key=lambda l: l.shift_from_174_hz)
        )
        out.append(
            PeakEstimate(
                center_hz=f_ref + center_det,
                width_fwhm_hz=width,
                amplitude=amp,
                assigned_lines=lines,
                merged=len(lines) > 1,
            )
        )
    return out


def find_doppler_shifted_resonance(
    trace: ScanTrace, pair: str, catalog: LineCatalog
) -> PeakEstimate:
    """Detuning at which one beam pair's spots sit on the reference axis.

    ``pair`` is "24" (acute-angle pair, aligns blue of the rest line) or
    "13" (obtuse pair, aligns red).  Only defined for tilted geometry;
    at 90 degrees both pairs align at the rest frequency and the
    measurement is degenerate.
    """
    if pair not in ("24", "13"):
        raise DomainError(f"pair must be '24' or '13', got {pair!r}")
    if abs(trace.angle_deg - 90.0) < 0.5:
        raise DegeneratePairError(
            "pair alignment is degenerate at perpendicular geometry"
        )
    offset = trace.pair24_offset_m if pair == "24" else trace.pair13_offset_m
    ref = int(np.argmax(trace.total_intensity))
    center_det = _refine_center(
        trace.detunings_hz, offset, np.abs(offset), 0, len(trace) - 1, ref
    )

    acute = trace.angle_deg < 90.0
    expect_blue = acute if pair == "24" else not acute
    if expect_blue != (center_det > 0):
        raise NumericalError(
            f"pair {pair} aligned on the wrong side of the rest line "
            f"({center_det / 1e6:+.1f} MHz at {trace.angle_deg:.1f} deg)"
        )

    intensity = trace.total_intensity
    i_max = int(np.argmax(intensity))
    step = float(trace.detunings_hz[1] - trace.detunings_hz[0]) if len(trace) > 1 else 1.0
    if 0 < i_max < len(trace) - 1:
        widths, _, _, _ = peak_widths(intensity, np.array([i_max]), rel_height=0.5)
        width = max(float(widths[0]) * step, step)
    else:
        # brightest point at the window edge: no measurable peak width
        width = max(step, catalog.transition.gamma_fwhm_hz)

    return PeakEstimate(
        center_hz=catalog.transition.f_ref_hz + center_det,
        width_fwhm_hz=width,
        amplitude=float(intensity[i_max]),
        assigned_lines=(),
        merged=False,
    )


def extract_isotope_shifts(
    peaks: Sequence[PeakEstimate],
    catalog: LineCatalog,
    budget: ErrorBudget | None = None,
) -> list[ShiftRow]:
    """Shift table relative to the measured 174 peak centre.

    Every assigned line gets a row (members of a merged peak share its
    centre); sigmas come from the error budget's two reporting classes.
    """
    budget = budget or ErrorBudget()
    ref_peak = next(
        (p for p in peaks if any(l.key == (174, "") for l in p.assigned_lines)),
        None,
    )
    if ref_peak is None:
        raise MissingReferenceError("no peak is assigned to the 174 line")
    rows = []
    for peak in peaks:
        for line in peak.assigned_lines:
            rows.append(
                ShiftRow(
                    line=line,
                    shift_hz=peak.center_hz - ref_peak.center_hz,
                    sigma_hz=combine_shift_sigma(
                        not peak.merged,
                        not ref_peak.merged,
                        budget,
                        same_line=line.key == (174, ""),
                    ),
                    merged=peak.merged,
                )
            )
    rows.sort(key=lambda r: -r.shift_hz)
    return rows


def shift_table_csv(rows: Sequence[ShiftRow], include_reference: bool = False) -> str:
    """Shift table as CSV, shaped like the published table (one row per
    line, reference row dropped unless requested)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        ["isotope", "transition", "shift_mhz", "sigma_mhz", "merged",
         "catalog_shift_mhz"]
    )
    for row in rows:
        if not include_reference and row.line.key == (174, ""):
            continue
        writer.writerow([
            row.line.mass_number,
            row.line.hyperfine_label,
            f"{row.shift_hz / 1e6:.1f}",
            f"{row.sigma_hz / 1e6:.0f}",
            "yes" if row.merged else "no",
            f"{row.line.shift_from_174_hz / 1e6:.1f}",
        ])
    return buf.getvalue()
