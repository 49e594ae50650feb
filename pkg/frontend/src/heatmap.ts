/** Canvas heatmap of the fluorescence frame plus overlay geometry. */

import type { FramePayload } from "./api";

/** Intensity (0..1) to an RGB triple: black body-ish blue->yellow ramp. */
export function heatColor(v: number): [number, number, number] {
  const t = Math.min(1, Math.max(0, v));
  const r = Math.round(255 * Math.min(1, 3 * t));
  const g = Math.round(255 * Math.min(1, Math.max(0, 3 * t - 0.9)));
  const b = Math.round(255 * Math.min(1, Math.max(0, 0.4 - 1.2 * t) + Math.max(0, 3 * t - 2.2)));
  return [r, g, b];
}

export interface PlaneRect {
  x_min: number;
  x_max: number;
  z_min: number;
  z_max: number;
}

/** Map a camera-plane point (m) to canvas pixels (z up). */
export function planeToCanvas(
  x: number,
  z: number,
  extent: PlaneRect,
  width: number,
  height: number,
): [number, number] {
  const px = ((x - extent.x_min) / (extent.x_max - extent.x_min)) * width;
  const py = height - ((z - extent.z_min) / (extent.z_max - extent.z_min)) * height;
  return [px, py];
}

/** End points (in plane metres) of the reference-axis guide line. */
export function axisGuide(
  angleDeg: number,
  extent: PlaneRect,
): [[number, number], [number, number]] {
  const a = (angleDeg * Math.PI) / 180;
  const dx = Math.cos(a);
  const dz = Math.sin(a);
  // clip the ray from the origin against the frame rectangle
  let tMax = Infinity;
  if (dz > 1e-12) tMax = Math.min(tMax, (extent.z_max - 0) / dz);
  if (dx > 1e-12) tMax = Math.min(tMax, (extent.x_max - 0) / dx);
  if (dx < -1e-12) tMax = Math.min(tMax, (extent.x_min - 0) / dx);
  return [
    [0, 0],
    [dx * tMax, dz * tMax],
  ];
}

export function drawFrame(
  ctx: CanvasRenderingContext2D,
  frame: FramePayload,
  width: number,
  height: number,
): void {
  const grid = frame.grid;
  const rows = grid.length;
  const cols = rows ? grid[0].length : 0;
  ctx.fillStyle = "#06080f";
  ctx.fillRect(0, 0, width, height);
  if (!rows || !cols) return;

  const cellW = width / cols;
  const cellH = height / rows;
  for (let iz = 0; iz < rows; iz++) {
    for (let ix = 0; ix < cols; ix++) {
      const v = grid[iz][ix];
      if (v <= 0) continue;
      const [r, g, b] = heatColor(Math.sqrt(v)); // sqrt stretch for dim spots
      ctx.fillStyle = `rgb(${r},${g},${b})`;
      // grid row 0 is z_min; canvas y grows downward
      ctx.fillRect(ix * cellW, height - (iz + 1) * cellH, cellW + 0.5, cellH + 0.5);
    }
  }

  const extent = frame.grid_extent_m;
  // reference-axis guide
  const [[x0, z0], [x1, z1]] = axisGuide(frame.axis_angle_deg, extent);
  const [p0x, p0y] = planeToCanvas(x0, z0, extent, width, height);
  const [p1x, p1y] = planeToCanvas(x1, z1, extent, width, height);
  ctx.strokeStyle = frame.alignment?.aligned ? "#3dd68c" : "#8899aa";
  ctx.setLineDash([6, 4]);
  ctx.beginPath();
  ctx.moveTo(p0x, p0y);
  ctx.lineTo(p1x, p1y);
  ctx.stroke();
  ctx.setLineDash([]);

  // centroid markers
  for (const c of frame.centroids) {
    if (!c) continue;
    const [cx, cy] = planeToCanvas(c.x_m, c.z_m, extent, width, height);
    ctx.strokeStyle = "#ff5d5d";
    ctx.beginPath();
    ctx.arc(cx, cy, 6, 0, 2 * Math.PI);
    ctx.stroke();
    ctx.fillStyle = "#ff5d5d";
    ctx.font = "10px sans-serif";
    ctx.fillText(String(c.beam_index), cx + 8, cy - 8);
  }
}
