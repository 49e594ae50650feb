"""Monte-Carlo effusive atomic-beam source.

Atoms leave a resistively heated oven tube (2 cm long, 1.5 mm bore).
Speeds follow the flux-weighted Maxwell-Boltzmann distribution
p(v) ~ v^3 exp(-m v^2 / 2 k T); directions follow the tube's ballistic
angular transmission: an atom is kept iff a straight line from a uniform
start point on the entrance disc exits through the far disc.  No wall
re-emission is modeled, so the polar angle never exceeds
atan(2 * bore_radius / tube_length).

Sampling is fully deterministic given (config, n, seed).  For parallel
generation, derive one child seed per worker with :func:`derive_seed`;
results then do not depend on the number of workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Mapping, NamedTuple

import numpy as np

from spotlab.errors import DomainError, NumericalError
from spotlab.ybdata import LineCatalog, PhysicalConstants

#: ratio of the flux-weighted MB mean speed to sqrt(2 k T / m)
_FLUX_MEAN_COEFF = 3.0 * math.sqrt(math.pi) / 4.0


@dataclass(frozen=True)
class OvenConfig:
    """Effusive-source geometry and state.

    ``axis`` is the tube's cylindrical axis (the reference axis of the
    whole experiment) and must be unit length.  ``composition`` maps mass
    number to abundance fraction.
    """

    origin: tuple[float, float, float]
    axis: tuple[float, float, float]
    temperature_k: float
    composition: Mapping[int, float]
    tube_length: float = 0.02
    bore_radius: float = 0.00075

    def __post_init__(self) -> None:
        norm = math.sqrt(sum(a * a for a in self.axis))
        if abs(norm - 1.0) > 1e-9:
            raise DomainError("oven axis must be unit length")
        if self.tube_length <= 0 or self.bore_radius <= 0:
            raise DomainError("tube dimensions must be > 0")
        if self.temperature_k <= 0:
            raise DomainError("temperature must be > 0")
        if not self.composition:
            raise DomainError("composition must not be empty")
        if any(w < 0 for w in self.composition.values()):
            raise DomainError("abundances must be >= 0")

    @property
    def max_polar_angle(self) -> float:
        """Geometric collimation limit of the ballistic tube, rad."""
        return math.atan(2.0 * self.bore_radius / self.tube_length)


@dataclass(frozen=True)
class AtomSample:
    """One atom at the moment it crosses the oven aperture plane."""

    isotope: int
    position: np.ndarray  # (3,) m
    velocity: np.ndarray  # (3,) m/s


@dataclass
class AtomEnsemble:
    """Column-major batch of atom samples (sequence of AtomSample)."""

    isotopes: np.ndarray   # (n,) int
    positions: np.ndarray  # (n, 3) m
    velocities: np.ndarray  # (n, 3) m/s
    speeds: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        self.speeds = np.linalg.norm(self.velocities, axis=1)

    def __len__(self) -> int:
        return len(self.isotopes)

    def __getitem__(self, i: int) -> AtomSample:
        return AtomSample(
            isotope=int(self.isotopes[i]),
            position=self.positions[i],
            velocity=self.velocities[i],
        )

    def __iter__(self) -> Iterator[AtomSample]:
        for i in range(len(self)):
            yield self[i]


class MeanVelocity(NamedTuple):
    mean: float
    sem: float
    n: int


def derive_seed(seed: int, index: int) -> np.random.SeedSequence:
    """Documented seed-splitting rule: child = SeedSequence([seed, index])."""
    return np.random.SeedSequence([seed, index])


def _sample_speeds(rng: np.random.Generator, n: int, m_kg: float,
                   temperature_k: float, k_b: float) -> np.ndarray:
    # flux-weighted MB: v^2 ~ Gamma(shape=2, scale=2kT/m)
    return np.sqrt(rng.gamma(shape=2.0, scale=2.0 * k_b * temperature_k / m_kg, size=n))


def _sample_directions_and_exits(
    rng: np.random.Generator, n: int, oven: OvenConfig
) -> tuple[np.ndarray, np.ndarray]:
    """Rejection-sample tube-transmitted directions and exit points.

    Directions are flux-weighted (~ cos(theta) dOmega) within the
    collimation cone; start points are uniform on the entrance disc; the
    pair is kept iff the ray exits the far disc.  Returned in oven-local
    coordinates (axis = +z, exit plane z = 0).
    """
    a = oven.bore_radius
    length = oven.tube_length
    sin_max = math.sin(oven.max_polar_angle)

    dirs = np.empty((n, 3))
    exits = np.empty((n, 3))
    got = 0
    while got < n:
        k = max(4 * (n - got), 256)
        sin_t = sin_max * np.sqrt(rng.random(k))
        theta = np.arcsin(sin_t)
        phi = 2.0 * math.pi * rng.random(k)
        r = a * np.sqrt(rng.random(k))
        psi = 2.0 * math.pi * rng.random(k)
        x0 = r * np.cos(psi)
        y0 = r * np.sin(psi)
        dx = length * np.tan(theta) * np.cos(phi)
        dy = length * np.tan(theta) * np.sin(phi)
        keep = (x0 + dx) ** 2 + (y0 + dy) ** 2 <= a * a
        kept = int(keep.sum())
        take = min(kept, n - got)
        idx = np.flatnonzero(keep)[:take]
        sl = slice(got, got + take)
        dirs[sl, 0] = np.sin(theta[idx]) * np.cos(phi[idx])
        dirs[sl, 1] = np.sin(theta[idx]) * np.sin(phi[idx])
        dirs[sl, 2] = np.cos(theta[idx])
        exits[sl, 0] = x0[idx] + dx[idx]
        exits[sl, 1] = y0[idx] + dy[idx]
        exits[sl, 2] = 0.0
        got += take
    return dirs, exits


def _oven_basis(oven: OvenConfig) -> np.ndarray:
    """Rotation matrix whose columns map oven-local (x, y, z) to lab."""
    e3 = np.asarray(oven.axis, dtype=float)
    up = np.array([0.0, 1.0, 0.0])
    if abs(np.dot(up, e3)) > 0.99:
        up = np.array([1.0, 0.0, 0.0])
    e1 = np.cross(up, e3)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(e3, e1)
    return np.stack([e1, e2, e3], axis=1)


def sample_atoms(
    oven: OvenConfig, n: int, seed: int | np.random.SeedSequence
) -> AtomEnsemble:
    """Draw ``n`` atoms leaving the oven; deterministic in (oven, n, seed).

    ``seed`` may be an integer or a SeedSequence from :func:`derive_seed`.
    """
    if n < 1:
        raise DomainError("need n >= 1 atoms")
    if isinstance(seed, np.random.SeedSequence):
        rng = np.random.default_rng(seed)
    else:
        rng = np.random.default_rng(derive_seed(int(seed), 0))

    isotopes = np.array(sorted(oven.composition), dtype=int)
    weights = np.array([oven.composition[i] for i in isotopes], dtype=float)
    weights = weights / weights.sum()
    which = rng.choice(len(isotopes), size=n, p=weights)

    const = _constants()
    masses = isotopes.astype(float) * const.amu
    speeds = np.empty(n)
    for j, m_kg in enumerate(masses):
        sel = which == j
        cnt = int(sel.sum())
        if cnt:
            speeds[sel] = _sample_speeds(rng, cnt, m_kg, oven.temperature_k, const.k_b)

    dirs, exits = _sample_directions_and_exits(rng, n, oven)
    basis = _oven_basis(oven)
    positions = exits @ basis.T + np.asarray(oven.origin)
    velocities = (dirs * speeds[:, None]) @ basis.T
    return AtomEnsemble(
        isotopes=isotopes[which], positions=positions, velocities=velocities
    )


_CONSTANTS_CACHE: PhysicalConstants | None = None


def _constants() -> PhysicalConstants:
    global _CONSTANTS_CACHE
    if _CONSTANTS_CACHE is None:
        from spotlab.ybdata import load_catalog

        _CONSTANTS_CACHE = load_catalog().constants
    return _CONSTANTS_CACHE


def analytic_mean_axial_speed(
    temperature_k: float,
    composition: Mapping[int, float],
    const: PhysicalConstants,
) -> float:
    """Abundance-weighted flux-mean speed (3 sqrt(pi)/4) sqrt(2kT/m).

    The tube's angular transmission multiplies this by <cos theta> >
    0.999, which is neglected here; the Monte-Carlo tests carry that
    approximation inside their tolerance.
    """
    if temperature_k <= 0:
        raise DomainError("temperature must be > 0")
    total = sum(composition.values())
    return sum(
        (w / total)
        * _FLUX_MEAN_COEFF
        * math.sqrt(2.0 * const.k_b * temperature_k / (a * const.amu))
        for a, w in composition.items()
    )


def mean_axial_velocity(oven: OvenConfig, n: int, seed: int) -> MeanVelocity:
    """Monte-Carlo mean of velocity . axis with its standard error."""
    atoms = sample_atoms(oven, n, seed)
    v_ax = atoms.velocities @ np.asarray(oven.axis)
    return MeanVelocity(
        mean=float(v_ax.mean()),
        sem=float(v_ax.std(ddof=1) / math.sqrt(n)) if n > 1 else float("inf"),
        n=n,
    )


def temperature_for_velocity(
    v_target: float,
    composition: Mapping[int, float],
    const: PhysicalConstants | None = None,
    tol_k: float = 0.1,
) -> float:
    """Oven temperature whose analytic flux-mean axial speed equals
    ``v_target``, found by bisection to ``tol_k``."""
    if v_target <= 0:
        raise DomainError("target velocity must be > 0")
    const = const or _constants()
    lo, hi = 1e-3, 10.0
    while analytic_mean_axial_speed(hi, composition, const) < v_target:
        hi *= 2.0
        if hi > 1e9:
            raise NumericalError("could not bracket temperature root")
    while hi - lo > tol_k:
        mid = 0.5 * (lo + hi)
        if analytic_mean_axial_speed(mid, composition, const) < v_target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def default_oven(
    catalog: LineCatalog,
    angle_deg: float = 90.0,
    v_mean_target: float = 260.0,
    composition: Mapping[int, float] | None = None,
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0),
) -> OvenConfig:
    """Oven reproducing the measured 260 m/s mean axial velocity.

    ``angle_deg`` is the angle between the reference axis and the
    propagation direction of beams 2 and 4 (+x); the axis stays in the
    camera (x-z) plane, so 90 deg means perpendicular geometry.
    """
    comp = dict(composition) if composition else catalog.isotope_abundances()
    temp = temperature_for_velocity(v_mean_target, comp, catalog.constants)
    alpha = math.radians(angle_deg)
    axis = (math.cos(alpha), 0.0, math.sin(alpha))
    return OvenConfig(
        origin=origin, axis=axis, temperature_k=temp, composition=comp
    )
