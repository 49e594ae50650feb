"""Plain-text run configuration.

Flat ``key = value`` file with dotted keys; unknown keys are rejected so
typos fail loudly.  Every value is validated by the module that consumes
it when the corresponding object is built.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

from spotlab import beamsim, photonics
from spotlab.errormodel import ErrorBudget
from spotlab.errors import ConfigError
from spotlab.spotfield import FrameSpec
from spotlab.ybdata import LineCatalog

_DEFAULTS: dict[str, float] = {
    "oven.angle_deg": 90.0,
    "oven.target_velocity_m_s": 260.0,
    "oven.temperature_k": 0.0,        # 0 = derive from target velocity
    "oven.tube_length_m": 0.02,
    "oven.bore_radius_m": 0.00075,
    "beams.distance1_m": 0.004,
    "beams.distance2_m": 0.010,
    "beams.distance3_m": 0.016,
    "beams.distance4_m": 0.022,
    "beams.waist_m": 0.0005,
    "beams.intensity_w_m2": 45.0,
    "scan.start_mhz": -800.0,
    "scan.stop_mhz": 2100.0,
    "scan.coarse_step_mhz": 25.0,
    "scan.fine_step_mhz": 5.0,
    "scan.fine_halfwidth_mhz": 75.0,
    "scan.atoms_per_frame": 100_000,
    "frame.x_min_m": -0.032,
    "frame.x_max_m": 0.032,
    "frame.z_min_m": 0.0,
    "frame.z_max_m": 0.026,
    "frame.pixel_pitch_m": 1e-4,
    "satspec.pump_intensity_w_m2": 1270.0,
    "satspec.probe_intensity_w_m2": 20.0,
    "satspec.atoms": 20_000,
    "budget.sigma_absolute_hz": 60e6,
    "budget.sigma_relative_hz": 20e6,
    "budget.alignment_slope_hz_deg": 15e6,
    "budget.resolution_floor_hz": 10e6,
    "seed": 1,
}


@dataclass
class RunConfig:
    """Validated configuration with the source text's hash for provenance."""

    values: dict[str, float]
    config_hash: str
    source: str = "(defaults)"

    def __getitem__(self, key: str) -> float:
        return self.values[key]

    def seed(self) -> int:
        return int(self.values["seed"])

    def oven(self, catalog: LineCatalog, angle_deg: float | None = None) -> beamsim.OvenConfig:
        angle = self.values["oven.angle_deg"] if angle_deg is None else angle_deg
        temp = self.values["oven.temperature_k"]
        comp = catalog.isotope_abundances()
        if temp <= 0:
            temp = beamsim.temperature_for_velocity(
                self.values["oven.target_velocity_m_s"], comp, catalog.constants
            )
        import math

        alpha = math.radians(angle)
        return beamsim.OvenConfig(
            origin=(0.0, 0.0, 0.0),
            axis=(math.cos(alpha), 0.0, math.sin(alpha)),
            temperature_k=temp,
            composition=comp,
            tube_length=self.values["oven.tube_length_m"],
            bore_radius=self.values["oven.bore_radius_m"],
        )

    def beams(self):
        return photonics.four_beam_array(
            distances_m=(
                self.values["beams.distance1_m"],
                self.values["beams.distance2_m"],
                self.values["beams.distance3_m"],
                self.values["beams.distance4_m"],
            ),
            waist_radius=self.values["beams.waist_m"],
            peak_intensity=self.values["beams.intensity_w_m2"],
        )

    def frame_spec(self) -> FrameSpec:
        return FrameSpec(
            x_min=self.values["frame.x_min_m"],
            x_max=self.values["frame.x_max_m"],
            z_min=self.values["frame.z_min_m"],
            z_max=self.values["frame.z_max_m"],
            pixel_pitch=self.values["frame.pixel_pitch_m"],
        )

    def budget(self) -> ErrorBudget:
        return ErrorBudget(
            sigma_absolute=self.values["budget.sigma_absolute_hz"],
            sigma_relative=self.values["budget.sigma_relative_hz"],
            alignment_slope=self.values["budget.alignment_slope_hz_deg"],
            resolution_floor=self.values["budget.resolution_floor_hz"],
        )

    def budget_dict(self) -> dict[str, float]:
        """Budget entries echoed into result files for provenance."""
        return {k: v for k, v in self.values.items() if k.startswith("budget.")}


def load_config(path: str | Path | None = None, overrides: dict[str, float] | None = None) -> RunConfig:
    """Parse a config file (or defaults), rejecting unknown keys."""
    values = dict(_DEFAULTS)
    source = "(defaults)"
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        source = str(path)
        for lineno, raw in enumerate(text.splitlines(), start=1):
            stripped = raw.strip()
            if not stripped or stripped.startswith("#"):
                continue
            key, sep, value = stripped.partition("=")
            key = key.strip()
            if not sep:
                raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
            if key not in _DEFAULTS:
                raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
            try:
                values[key] = float(value.strip())
            except ValueError:
                raise ConfigError(
                    f"{source}:{lineno}: bad numeric value for {key!r}"
                ) from None
    if overrides:
        for key, val in overrides.items():
            if key not in _DEFAULTS:
                raise ConfigError(f"unknown config override {key!r}")
            values[key] = float(val)

    digest_src = "\n".join(f"{k}={values[k]!r}" for k in sorted(values))
    config_hash = hashlib.sha256(digest_src.encode()).hexdigest()[:16]
    return RunConfig(values=values, config_hash=config_hash, source=source)
