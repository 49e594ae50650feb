"""Catalog of physical constants and Yb 398.9 nm line data.

Everything downstream (beam sampling, photon scattering, scan analysis)
reads its numbers from here.  The catalog is loaded once from a bundled
plain-text file and is immutable afterwards, so it can be shared freely
across threads.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Mapping

from spotlab.errors import ConfigError, UnknownLineError

_DATA_RESOURCE = "yb_lines.dat"


@dataclass(frozen=True)
class PhysicalConstants:
    """CODATA constants, SI units."""

    c: float        # speed of light, m/s
    k_b: float      # Boltzmann constant, J/K
    amu: float      # atomic mass unit, kg

    def __post_init__(self) -> None:
        if min(self.c, self.k_b, self.amu) <= 0:
            raise ConfigError("physical constants must be strictly positive")


@dataclass(frozen=True)
class TransitionCatalog:
    """The 174Yb 1S0 <-> 1P1 reference line.

    f_ref is the absolute frequency of the 174Yb component; all isotope
    shifts in the line list are relative to it.
    """

    f_ref_hz: float
    f_ref_sigma_hz: float
    gamma_fwhm_hz: float
    i_sat_w_m2: float
    lambda_nominal_m: float

    def __post_init__(self) -> None:
        if self.f_ref_hz <= 0 or self.gamma_fwhm_hz <= 0 or self.i_sat_w_m2 <= 0:
            raise ConfigError("transition constants must be strictly positive")


@dataclass(frozen=True)
class IsotopeLine:
    """One resolved or unresolved component of the Yb line list.

    ``hyperfine_label`` is empty for the bosonic isotopes.  Lines sharing a
    ``cluster_id`` overlap within the spot method's 60 MHz resolution and
    are reported merged.  ``literature`` carries published shift values
    (MHz, (value, sigma)) for report tables only.
    """

    mass_number: int
    hyperfine_label: str
    shift_from_174_hz: float
    shift_sigma_hz: float
    abundance: float
    cluster_id: str | None
    literature: Mapping[str, tuple[float, float]]

    @property
    def key(self) -> tuple[int, str]:
        return (self.mass_number, self.hyperfine_label)

    @property
    def label(self) -> str:
        if self.hyperfine_label:
            return f"{self.mass_number}Yb {self.hyperfine_label}"
        return f"{self.mass_number}Yb"


class LineCatalog:
    """Immutable bundle of constants, reference transition and line list."""

    def __init__(
        self,
        constants: PhysicalConstants,
        transition: TransitionCatalog,
        lines: tuple[IsotopeLine, ...],
    ):
        self.constants = constants
        self.transition = transition
        self.lines = lines
        self._by_key = {line.key: line for line in lines}
        self._validate()

    def _validate(self) -> None:
        total = sum(line.abundance for line in self.lines)
        if abs(total - 1.0) > 1e-6:
            raise ConfigError(f"line abundances sum to {total!r}, expected 1")
        ref = self.line(174)
        if ref.shift_from_174_hz != 0.0:
            raise ConfigError("174 reference line must have zero shift")
        lam_f = self.transition.lambda_nominal_m * self.transition.f_ref_hz
        if abs(lam_f / self.constants.c - 1.0) > 1e-6:
            raise ConfigError("lambda_nominal * f_ref disagrees with c")
        # Cluster members must form a chain with adjacent gaps < 60 MHz.
        for cid, members in self.clusters().items():
            shifts = sorted(m.shift_from_174_hz for m in members)
            if len(shifts) < 2:
                raise ConfigError(f"cluster {cid} has a single member")
            gaps = [b - a for a, b in zip(shifts, shifts[1:])]
            if max(gaps) >= 60e6:
                raise ConfigError(f"cluster {cid} has a gap >= 60 MHz")

    def line(self, mass_number: int, hyperfine_label: str = "") -> IsotopeLine:
        """Look up one line; raise UnknownLineError if absent."""
        try:
            return self._by_key[(mass_number, hyperfine_label)]
        except KeyError:
            raise UnknownLineError(
                f"no catalog line {mass_number}Yb {hyperfine_label!r}"
            ) from None

    def lines_of(self, mass_number: int) -> tuple[IsotopeLine, ...]:
        found = tuple(l for l in self.lines if l.mass_number == mass_number)
        if not found:
            raise UnknownLineError(f"no catalog lines for mass {mass_number}")
        return found

    def isotope_abundances(self) -> dict[int, float]:
        """Natural abundance per isotope (hyperfine components summed)."""
        out: dict[int, float] = {}
        for line in self.lines:
            out[line.mass_number] = out.get(line.mass_number, 0.0) + line.abundance
        return out

    def clusters(self) -> dict[str, tuple[IsotopeLine, ...]]:
        out: dict[str, list[IsotopeLine]] = {}
        for line in self.lines:
            if line.cluster_id is not None:
                out.setdefault(line.cluster_id, []).append(line)
        return {cid: tuple(ls) for cid, ls in out.items()}

    def isotope_mass_kg(self, mass_number: int) -> float:
        # mass_number * amu is accurate to ~0.1%, far below every
        # tolerance in this package
        return mass_number * self.constants.amu


def line_frequency(iso: IsotopeLine, cat: TransitionCatalog) -> float:
    """Absolute frequency of one line: f_ref + its shift, Hz."""
    return cat.f_ref_hz + iso.shift_from_174_hz


def shift_between(a: IsotopeLine, b: IsotopeLine) -> float:
    """Signed shift a - b, Hz.  Antisymmetric under swapping."""
    return a.shift_from_174_hz - b.shift_from_174_hz


def _parse_scalar(value: str, key: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise ConfigError(f"bad numeric value for {key}: {value!r}") from None


def _parse_line_record(body: str, lineno: int) -> IsotopeLine:
    fields = [f.strip() for f in body.split("|")]
    if len(fields) < 6:
        raise ConfigError(f"line record {lineno}: expected 6 fields")
    mass, hyperfine, shift, sigma, abundance, cluster = fields[:6]
    literature: dict[str, tuple[float, float]] = {}
    for extra in fields[6:]:
        if not extra:
            continue
        ref, _, valsig = extra.partition("=")
        val, _, sig = valsig.partition(",")
        literature[ref.strip()] = (float(val) * 1e6, float(sig) * 1e6)
    return IsotopeLine(
        mass_number=int(mass),
        hyperfine_label=hyperfine,
        # whole-Hz values keep f_ref + shift - f_ref exact in float64
        shift_from_174_hz=float(round(_parse_scalar(shift, "shift") * 1e6)),
        shift_sigma_hz=float(round(_parse_scalar(sigma, "sigma") * 1e6)),
        abundance=_parse_scalar(abundance, "abundance"),
        cluster_id=None if cluster == "-" else cluster,
        literature=literature,
    )


def load_catalog(path: str | Path | None = None) -> LineCatalog:
    """Load the line catalog from ``path`` or the bundled data file."""
    if path is None:
        text = resources.files("spotlab.data").joinpath(_DATA_RESOURCE).read_text()
    else:
        text = Path(path).read_text()

    scalars: dict[str, float] = {}
    lines: list[IsotopeLine] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        key, _, value = stripped.partition("=")
        key = key.strip()
        if key == "line":
            lines.append(_parse_line_record(value, lineno))
        else:
            scalars[key] = _parse_scalar(value.strip(), key)

    required = {
        "c_m_per_s", "k_b_j_per_k", "amu_kg",
        "f_ref_hz", "f_ref_sigma_hz", "gamma_fwhm_hz",
        "i_sat_w_per_m2", "lambda_nominal_m",
    }
    missing = required - scalars.keys()
    if missing:
        raise ConfigError(f"data file missing keys: {sorted(missing)}")

    constants = PhysicalConstants(
        c=scalars["c_m_per_s"], k_b=scalars["k_b_j_per_k"], amu=scalars["amu_kg"]
    )
    transition = TransitionCatalog(
        f_ref_hz=scalars["f_ref_hz"],
        f_ref_sigma_hz=scalars["f_ref_sigma_hz"],
        gamma_fwhm_hz=scalars["gamma_fwhm_hz"],
        i_sat_w_m2=scalars["i_sat_w_per_m2"],
        lambda_nominal_m=scalars["lambda_nominal_m"],
    )
    return LineCatalog(constants, transition, tuple(lines))


def catalog_to_csv(catalog: LineCatalog) -> str:
    """Render the line list as CSV (one row per line)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        ["mass_number", "hyperfine", "shift_mhz", "sigma_mhz",
         "abundance", "cluster", "frequency_thz"]
    )
    for line in catalog.lines:
        writer.writerow([
            line.mass_number,
            line.hyperfine_label,
            f"{line.shift_from_174_hz / 1e6:.1f}",
            f"{line.shift_sigma_hz / 1e6:.0f}",
            f"{line.abundance:.7f}",
            line.cluster_id or "",
            f"{line_frequency(line, catalog.transition) / 1e12:.6f}",
        ])
    return buf.getvalue()


def catalog_to_json(catalog: LineCatalog) -> str:
    """Render the line list as JSON."""
    rows = [
        {
            "mass_number": line.mass_number,
            "hyperfine": line.hyperfine_label,
            "shift_hz": line.shift_from_174_hz,
            "sigma_hz": line.shift_sigma_hz,
            "abundance": line.abundance,
            "cluster": line.cluster_id,
            "frequency_hz": line_frequency(line, catalog.transition),
            "literature_mhz": {
                ref: [v / 1e6, s / 1e6] for ref, (v, s) in line.literature.items()
            },
        }
        for line in catalog.lines
    ]
    return json.dumps({"lines": rows}, indent=2)
