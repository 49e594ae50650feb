/** Typed client for the spotlab lab-server JSON API. */

export interface StatePayload {
  seq: number;
  detuning_mhz: number;
  angle_deg: number;
  temperature_k: number;
  reference_frequency_thz: number;
  log: MarkEntry[];
}

export interface MarkEntry {
  label: string;
  frequency_hz: number;
  detuning_mhz: number;
  angle_deg: number;
  timestamp: number;
  seq: number;
}

export interface CentroidPayload {
  beam_index: number;
  x_m: number;
  z_m: number;
  intensity: number;
}

export interface AlignmentPayload {
  perp_residual_m: number;
  line_angle_to_beams_rad: number;
  line_angle_to_axis_rad: number;
  pair24_offset_m: number;
  pair13_offset_m: number;
  aligned: boolean;
}

export interface FramePayload {
  seq: number;
  grid: number[][];
  grid_extent_m: { x_min: number; x_max: number; z_min: number; z_max: number };
  centroids: (CentroidPayload | null)[];
  alignment: AlignmentPayload | null;
  axis_angle_deg: number;
  total_intensity: number;
}

export interface ControlRequest {
  detuning_mhz?: number;
  angle_deg?: number;
  temperature_k?: number;
}

export interface RevealLine {
  label: string;
  frequency_hz: number;
  shift_mhz: number;
  cluster: string | null;
}

export interface RevealMark {
  label: string;
  frequency_hz: number;
  nearest_line: string;
  error_mhz: number;
  within_budget: boolean;
}

export interface RevealPayload {
  seq: number;
  ground_truth: RevealLine[];
  marks: RevealMark[];
  budget_mhz: number;
}

/** Transport the view model talks through; swapped for a fake in tests. */
export interface LabTransport {
  getState(): Promise<StatePayload>;
  postControl(req: ControlRequest): Promise<StatePayload>;
  getFrame(): Promise<FramePayload>;
  postMark(label: string): Promise<{ seq: number; log: MarkEntry[] }>;
  getReveal(): Promise<RevealPayload>;
}

export class HttpTransport implements LabTransport {
  constructor(private baseUrl: string = "") {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await fetch(this.baseUrl + path, init);
    if (!resp.ok) {
      const body = await resp.text();
      throw new Error(`${path} -> ${resp.status}: ${body}`);
    }
    return (await resp.json()) as T;
  }

  getState(): Promise<StatePayload> {
    return this.request("/api/state");
  }

  postControl(req: ControlRequest): Promise<StatePayload> {
    return this.request("/api/control", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(req),
    });
  }

  getFrame(): Promise<FramePayload> {
    return this.request("/api/frame");
  }

  postMark(label: string): Promise<{ seq: number; log: MarkEntry[] }> {
    return this.request("/api/mark", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ label }),
    });
  }

  getReveal(): Promise<RevealPayload> {
    return this.request("/api/reveal");
  }
}
