"""HTTP JSON service for the interactive virtual lab.

Exposes the live simulation so a human can perform the alignment
measurement through a browser: tune the laser and oven, watch the four
spots, mark resonances, and finally reveal the ground truth for scoring.
The hidden line table never appears in /api/state or /api/frame.

Control writes are serialized through one lock and stamped with a
sequence number; every frame payload carries the sequence number of the
control state it was rendered from, so clients can discard stale frames.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field, replace

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from spotlab import spotfield, ybdata
from spotlab.beamsim import derive_seed, sample_atoms
from spotlab.config import RunConfig, load_config
from spotlab.errors import InsufficientDataError
from spotlab.photonics import LaserState

#: hard bounds on the control values (422 outside)
DETUNING_RANGE_MHZ = (-2000.0, 2000.0)
ANGLE_RANGE_DEG = (40.0, 140.0)
TEMPERATURE_RANGE_K = (150.0, 1200.0)

MAX_GRID = 128
DEFAULT_ATOMS_PER_FRAME = 10_000
ALIGNED_RESIDUAL_M = 5e-5


class ControlRequest(BaseModel):
    detuning_mhz: float | None = None
    angle_deg: float | None = None
    temperature_k: float | None = None


class MarkRequest(BaseModel):
    label: str


@dataclass
class _LabState:
    detuning_mhz: float = 0.0
    angle_deg: float = 90.0
    temperature_k: float = 0.0
    seq: int = 0
    log: list[dict] = field(default_factory=list)


def _downsample(pixels: np.ndarray, max_cells: int = MAX_GRID) -> np.ndarray:
    """Block-sum the pixel grid down to at most max_cells per side."""
    nz, nx = pixels.shape
    fz = -(-nz // max_cells)
    fx = -(-nx // max_cells)
    pad_z = (-nz) % fz
    pad_x = (-nx) % fx
    padded = np.pad(pixels, ((0, pad_z), (0, pad_x)))
    out = padded.reshape(
        padded.shape[0] // fz, fz, padded.shape[1] // fx, fx
    ).sum(axis=(1, 3))
    return out


def create_app(seed: int = 1, config: RunConfig | None = None,
               atoms_per_frame: int = DEFAULT_ATOMS_PER_FRAME) -> FastAPI:
    cfg = config or load_config()
    catalog = ybdata.load_catalog()
    beams = cfg.beams()
    frame_spec = cfg.frame_spec()
    default_oven = cfg.oven(catalog)
    state = _LabState(temperature_k=default_oven.temperature_k)
    lock = threading.Lock()
    frame_cache: dict[tuple, dict] = {}

    app = FastAPI(title="spotlab virtual lab", version="1")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    def _render_payload() -> dict:
        key = (state.detuning_mhz, state.angle_deg, state.temperature_k, seed)
        cached = frame_cache.get(key)
        if cached is not None:
            return {**cached, "seq": state.seq}

        oven = replace(
            cfg.oven(catalog, angle_deg=state.angle_deg),
            temperature_k=state.temperature_k,
        )
        atoms = sample_atoms(oven, atoms_per_frame, derive_seed(seed, 0))
        frame = spotfield.render_frame(
            atoms, beams, LaserState(state.detuning_mhz * 1e6), catalog, frame_spec
        )
        cents = spotfield.extract_centroids(frame, beams)
        try:
            result = spotfield.alignment(cents, oven, beams)
        except InsufficientDataError:
            result = None

        grid = _downsample(frame.pixels)
        top = float(grid.max())
        payload = {
            "grid": (grid / top if top > 0 else grid).round(5).tolist(),
            "grid_extent_m": {
                "x_min": frame_spec.x_min, "x_max": frame_spec.x_max,
                "z_min": frame_spec.z_min, "z_max": frame_spec.z_max,
            },
            "centroids": [
                None if c is None else {
                    "beam_index": c.beam_index,
                    "x_m": c.centroid[0],
                    "z_m": c.centroid[1],
                    "intensity": c.total_intensity,
                }
                for c in cents
            ],
            "alignment": None if result is None else {
                "perp_residual_m": result.perp_residual,
                "line_angle_to_beams_rad": result.line_angle_to_beams,
                "line_angle_to_axis_rad": result.line_angle_to_axis,
                "pair24_offset_m": result.pair24_offset,
                "pair13_offset_m": result.pair13_offset,
                "aligned": bool(result.perp_residual < ALIGNED_RESIDUAL_M),
            },
            "axis_angle_deg": state.angle_deg,
            "total_intensity": frame.total_intensity,
        }
        if len(frame_cache) > 16:
            frame_cache.clear()
        frame_cache[key] = payload
        return {**payload, "seq": state.seq}

    def _state_payload() -> dict:
        return {
            "seq": state.seq,
            "detuning_mhz": state.detuning_mhz,
            "angle_deg": state.angle_deg,
            "temperature_k": state.temperature_k,
            "reference_frequency_thz": catalog.transition.f_ref_hz / 1e12,
            "log": list(state.log),
        }

    @app.get("/api/state")
    def get_state():
        with lock:
            return _state_payload()

    @app.post("/api/control")
    def post_control(req: ControlRequest):
        with lock:
            if req.detuning_mhz is not None:
                lo, hi = DETUNING_RANGE_MHZ
                if not lo <= req.detuning_mhz <= hi:
                    raise HTTPException(422, f"detuning outside [{lo}, {hi}] MHz")
            if req.angle_deg is not None:
                lo, hi = ANGLE_RANGE_DEG
                if not lo <= req.angle_deg <= hi:
                    raise HTTPException(422, f"angle outside [{lo}, {hi}] deg")
            if req.temperature_k is not None:
                lo, hi = TEMPERATURE_RANGE_K
                if not lo <= req.temperature_k <= hi:
                    raise HTTPException(422, f"temperature outside [{lo}, {hi}] K")
            if req.detuning_mhz is not None:
                state.detuning_mhz = req.detuning_mhz
            if req.angle_deg is not None:
                state.angle_deg = req.angle_deg
            if req.temperature_k is not None:
                state.temperature_k = req.temperature_k
            state.seq += 1
            return _state_payload()

    @app.get("/api/frame")
    def get_frame():
        with lock:
            return _render_payload()

    @app.post("/api/mark")
    def post_mark(req: MarkRequest):
        with lock:
            label = req.label.strip()
            if not label:
                raise HTTPException(422, "label must not be empty")
            entry = {
                "label": label,
                "frequency_hz": catalog.transition.f_ref_hz
                + state.detuning_mhz * 1e6,
                "detuning_mhz": state.detuning_mhz,
                "angle_deg": state.angle_deg,
                "timestamp": time.time(),
                "seq": state.seq,
            }
            state.log.append(entry)
            return {"seq": state.seq, "log": list(state.log)}

    @app.get("/api/reveal")
    def get_reveal():
        with lock:
            lines = [
                {
                    "label": line.label,
                    "frequency_hz": ybdata.line_frequency(line, catalog.transition),
                    "shift_mhz": line.shift_from_174_hz / 1e6,
                    "cluster": line.cluster_id,
                }
                for line in catalog.lines
            ]
            freqs = np.array([l["frequency_hz"] for l in lines])
            marks = []
            for entry in state.log:
                errs = np.abs(freqs - entry["frequency_hz"])
                k = int(np.argmin(errs))
                marks.append({
                    "label": entry["label"],
                    "frequency_hz": entry["frequency_hz"],
                    "nearest_line": lines[k]["label"],
                    "error_mhz": float(errs[k] / 1e6),
                    "within_budget": bool(errs[k] <= cfg.budget().sigma_absolute),
                })
            return {
                "seq": state.seq,
                "ground_truth": lines,
                "marks": marks,
                "budget_mhz": cfg.budget().sigma_absolute / 1e6,
            }

    return app
