"""Fluorescence-spot image synthesis and alignment metrics.

Each atom flies ballistically from the oven aperture; where its trajectory
passes a laser beam it deposits light proportional to the saturated
scattering rate at its Doppler-shifted detuning, weighted by the transit
time through the beam (waist / speed).  The camera is an orthographic
projection onto the plane containing the beams and the reference axis.

The resonance criterion of the whole technique lives here: on resonance
the four spot centroids fall on one straight line (perp_residual minimal,
pair offsets balanced); detuning makes the counter-propagating pairs walk
off in opposite directions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from spotlab.beamsim import AtomEnsemble, OvenConfig
from spotlab.errors import DomainError, InsufficientDataError
from spotlab.photonics import LaserBeam, LaserState
from spotlab.ybdata import LineCatalog, line_frequency

#: beams are cut off (and spot strips bounded) at this many waist radii
BEAM_CUTOFF_WAISTS = 3.0


@dataclass(frozen=True)
class FrameSpec:
    """Camera-plane pixel grid: x along the beams, z along the beam stack."""

    x_min: float = -0.032
    x_max: float = 0.032
    z_min: float = 0.0
    z_max: float = 0.026
    pixel_pitch: float = 1e-4

    def __post_init__(self) -> None:
        if self.x_max <= self.x_min or self.z_max <= self.z_min:
            raise DomainError("frame extents must be non-degenerate")
        if self.pixel_pitch <= 0:
            raise DomainError("pixel_pitch must be > 0")

    @property
    def nx(self) -> int:
        return int(round((self.x_max - self.x_min) / self.pixel_pitch))

    @property
    def nz(self) -> int:
        return int(round((self.z_max - self.z_min) / self.pixel_pitch))


@dataclass
class FluorescenceFrame:
    """Synthesized camera image: pixels[iz, ix] >= 0, arbitrary units."""

    pixels: np.ndarray
    spec: FrameSpec

    @property
    def pixel_pitch(self) -> float:
        return self.spec.pixel_pitch

    @property
    def total_intensity(self) -> float:
        return float(self.pixels.sum())

    def x_centers(self) -> np.ndarray:
        s = self.spec
        return s.x_min + (np.arange(s.nx) + 0.5) * s.pixel_pitch

    def z_centers(self) -> np.ndarray:
        s = self.spec
        return s.z_min + (np.arange(s.nz) + 0.5) * s.pixel_pitch


@dataclass(frozen=True)
class SpotCentroid:
    """Intensity-weighted centroid of one beam's fluorescence strip."""

    beam_index: int
    centroid: tuple[float, float]       # (x, z) in camera-plane metres
    total_intensity: float
    rms_extent: tuple[float, float]


@dataclass(frozen=True)
class AlignmentResult:
    """Collinearity and axis-offset metrics of the four spots.

    perp_residual       RMS distance of centroids from their best-fit line
    line_angle_to_beams angle between that line and the beam direction
    line_angle_to_axis  angle between that line and the reference axis
    pair24_offset       mean signed distance of beams 2&4 centroids from
                        the reference axis (positive on the +x side in
                        the perpendicular default, see _axis_normal)
    pair13_offset       same for beams 1&3
    """

    perp_residual: float
    line_angle_to_beams: float
    line_angle_to_axis: float
    pair24_offset: float
    pair13_offset: float


def _deposit_weights(
    atoms: AtomEnsemble,
    beam: LaserBeam,
    state: LaserState,
    catalog: LineCatalog,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-atom deposit positions (x, z) and intensities for one beam.

    Works in the 2D (y, z) cross-section: the beam is the point
    (origin_y, origin_z) there, and the deposit point is the atom's
    closest approach to the beam line.  Intensity sums the saturated
    scattering rate over every line of the atom's isotope (weights are
    the hyperfine line fractions), times the transit weight waist/|v|.
    """
    const = catalog.constants
    trans = catalog.transition
    d = np.asarray(beam.direction)
    pos = atoms.positions
    vel = atoms.velocities

    # velocity/offset components perpendicular to the beam line
    rel = pos - np.asarray(beam.origin)
    rel_perp = rel - np.outer(rel @ d, d)
    vel_perp = vel - np.outer(vel @ d, d)
    vp2 = np.einsum("ij,ij->i", vel_perp, vel_perp)
    vp2 = np.where(vp2 > 0, vp2, np.inf)
    t_star = -np.einsum("ij,ij->i", rel_perp, vel_perp) / vp2

    closest = rel_perp + vel_perp * t_star[:, None]
    r2 = np.einsum("ij,ij->i", closest, closest)
    live = (t_star > 0) & (r2 <= (BEAM_CUTOFF_WAISTS * beam.waist_radius) ** 2)

    s_local = (beam.peak_intensity / trans.i_sat_w_m2) * np.exp(
        -2.0 * r2 / beam.waist_radius**2
    )
    v_along = vel @ d

    rate = np.zeros(len(atoms))
    iso_total = catalog.isotope_abundances()
    for mass in np.unique(atoms.isotopes):
        sel = atoms.isotopes == mass
        for line in catalog.lines_of(int(mass)):
            f_line = line_frequency(line, trans)
            delta = (trans.f_ref_hz + state.detuning_hz - f_line) - (
                f_line / const.c
            ) * v_along[sel]
            branch = line.abundance / iso_total[int(mass)]
            rate[sel] += branch * (
                (math.pi * trans.gamma_fwhm_hz)
                * (s_local[sel] / 2.0)
                / (1.0 + s_local[sel] + (2.0 * delta / trans.gamma_fwhm_hz) ** 2)
            )

    weight = np.where(live, rate * (beam.waist_radius / atoms.speeds), 0.0)
    at = pos + vel * t_star[:, None]
    return at[:, 0], at[:, 2], weight


def render_frame(
    atoms: AtomEnsemble,
    beams: Sequence[LaserBeam],
    state: LaserState,
    catalog: LineCatalog,
    spec: FrameSpec | None = None,
    n_threads: int = 1,
    shot_noise_seed: int | None = None,
) -> FluorescenceFrame:
    """Accumulate all atoms' deposits from all beams into the pixel grid.

    Deterministic for fixed inputs: with ``n_threads > 1`` the atom set is
    split into fixed contiguous chunks whose frames are summed in chunk
    order, so the result does not depend on scheduling.  Passing
    ``shot_noise_seed`` replaces each pixel by a Poisson draw around it
    (intensities read as photon counts); defaults to off so golden frames
    stay exact.
    """
    if len(atoms) < 1:
        raise DomainError("render_frame needs at least one atom")
    if len(beams) != 4:
        raise DomainError("render_frame expects the four-beam geometry")
    spec = spec or FrameSpec()

    if n_threads > 1 and len(atoms) > n_threads:
        from concurrent.futures import ThreadPoolExecutor

        bounds = np.linspace(0, len(atoms), n_threads + 1, dtype=int)
        chunks = [
            AtomEnsemble(
                atoms.isotopes[a:b], atoms.positions[a:b], atoms.velocities[a:b]
            )
            for a, b in zip(bounds[:-1], bounds[1:])
            if b > a
        ]
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            frames = list(
                pool.map(
                    lambda ch: render_frame(ch, beams, state, catalog, spec), chunks
                )
            )
        total = frames[0].pixels
        for fr in frames[1:]:
            total = total + fr.pixels
        if shot_noise_seed is not None:
            rng = np.random.default_rng(shot_noise_seed)
            total = rng.poisson(total).astype(float)
        return FluorescenceFrame(pixels=total, spec=spec)

    pixels = np.zeros((spec.nz, spec.nx))
    for beam in beams:
        x, z, w = _deposit_weights(atoms, beam, state, catalog)
        ix = np.floor((x - spec.x_min) / spec.pixel_pitch).astype(int)
        iz = np.floor((z - spec.z_min) / spec.pixel_pitch).astype(int)
        ok = (w > 0) & (ix >= 0) & (ix < spec.nx) & (iz >= 0) & (iz < spec.nz)
        flat = np.bincount(
            iz[ok] * spec.nx + ix[ok], weights=w[ok], minlength=spec.nz * spec.nx
        )
        pixels += flat.reshape(spec.nz, spec.nx)
    if shot_noise_seed is not None:
        rng = np.random.default_rng(shot_noise_seed)
        pixels = rng.poisson(pixels).astype(float)
    return FluorescenceFrame(pixels=pixels, spec=spec)


def extract_centroids(
    frame: FluorescenceFrame,
    beams: Sequence[LaserBeam],
    min_fraction: float = 0.01,
) -> list[SpotCentroid | None]:
    """Centroid per beam strip; None where the strip holds under
    ``min_fraction`` of the frame's intensity (missing spot)."""
    total = frame.total_intensity
    xs = frame.x_centers()
    zs = frame.z_centers()
    out: list[SpotCentroid | None] = []
    for beam in beams:
        z_beam = beam.origin[2]
        half = BEAM_CUTOFF_WAISTS * beam.waist_radius
        rows = np.flatnonzero(np.abs(zs - z_beam) <= half)
        if rows.size == 0:
            out.append(None)
            continue
        strip = frame.pixels[rows, :]
        strip_sum = float(strip.sum())
        if total <= 0 or strip_sum <= min_fraction * total:
            out.append(None)
            continue
        wz = strip.sum(axis=1)
        wx = strip.sum(axis=0)
        cx = float(np.dot(wx, xs) / strip_sum)
        cz = float(np.dot(wz, zs[rows]) / strip_sum)
        vx = float(np.dot(wx, (xs - cx) ** 2) / strip_sum)
        vz = float(np.dot(wz, (zs[rows] - cz) ** 2) / strip_sum)
        out.append(
            SpotCentroid(
                beam_index=beam.index,
                centroid=(cx, cz),
                total_intensity=strip_sum,
                rms_extent=(math.sqrt(vx), math.sqrt(vz)),
            )
        )
    return out


def _axis_normal(oven: OvenConfig) -> np.ndarray:
    """In-plane normal to the reference axis.

    Sign convention: for the perpendicular default (axis along +z) the
    normal points along +x, so spots displaced toward the beam-2/4
    propagation side carry positive offsets.
    """
    ax, _, az = oven.axis
    return np.array([az, -ax])


def pair_offsets(
    centroids: Sequence[SpotCentroid | None], oven: OvenConfig
) -> tuple[float, float]:
    """Mean signed distance of each beam pair's centroids from the
    reference axis, (pair 2&4, pair 1&3); nan when a pair is dark."""
    normal = _axis_normal(oven)
    origin = np.asarray(oven.origin)[[0, 2]]

    def mean_offset(indices: tuple[int, int]) -> float:
        offs = [
            float(np.dot(np.asarray(c.centroid) - origin, normal))
            for c in centroids
            if c is not None and c.beam_index in indices
        ]
        return float(np.mean(offs)) if offs else float("nan")

    return mean_offset((2, 4)), mean_offset((1, 3))


def alignment(
    centroids: Sequence[SpotCentroid | None],
    oven: OvenConfig,
    beams: Sequence[LaserBeam],
) -> AlignmentResult:
    """Total-least-squares line through the centroids plus pair offsets.

    Requires at least 3 present centroids for the line fit; pair offsets
    use whatever members of each pair are present (nan if none).
    """
    present = [c for c in centroids if c is not None]
    if len(present) < 3:
        raise InsufficientDataError(
            f"alignment needs >= 3 centroids, got {len(present)}"
        )
    pts = np.array([c.centroid for c in present])
    center = pts.mean(axis=0)
    _, _, vt = np.linalg.svd(pts - center, full_matrices=False)
    direction = vt[0]
    residuals = (pts - center) @ vt[1]
    perp_residual = float(np.sqrt(np.mean(residuals**2)))

    beam_dir = np.asarray(beams[0].direction)[[0, 2]]
    beam_dir = beam_dir / np.linalg.norm(beam_dir)
    axis_dir = np.asarray(oven.axis)[[0, 2]]
    cos_beams = abs(float(np.dot(direction, beam_dir)))
    cos_axis = abs(float(np.dot(direction, axis_dir)))
    angle_beams = math.acos(min(1.0, cos_beams))
    angle_axis = math.acos(min(1.0, cos_axis))

    p24, p13 = pair_offsets(centroids, oven)
    return AlignmentResult(
        perp_residual=perp_residual,
        line_angle_to_beams=angle_beams,
        line_angle_to_axis=angle_axis,
        pair24_offset=p24,
        pair13_offset=p13,
    )


def render_and_align(
    atoms: AtomEnsemble,
    beams: Sequence[LaserBeam],
    state: LaserState,
    catalog: LineCatalog,
    oven: OvenConfig,
    spec: FrameSpec | None = None,
    n_threads: int = 1,
) -> tuple[FluorescenceFrame, list[SpotCentroid | None], AlignmentResult]:
    """Convenience pipeline frame -> centroids -> alignment."""
    frame = render_frame(atoms, beams, state, catalog, spec, n_threads=n_threads)
    cents = extract_centroids(frame, beams)
    return frame, cents, alignment(cents, oven, beams)
