import { describe, expect, it } from "vitest";

import type {
  ControlRequest,
  FramePayload,
  LabTransport,
  MarkEntry,
  RevealPayload,
  StatePayload,
} from "./api";
import { LabViewModel, type Scheduler } from "./model";

/** Manual scheduler: debounced work runs only when flush() is called. */
function manualScheduler(): { schedule: Scheduler; flush: () => void } {
  let queue: (() => void)[] = [];
  return {
    schedule: (fn) => {
      queue.push(fn);
      return () => {
        queue = queue.filter((f) => f !== fn);
      };
    },
    flush: () => {
      const run = queue;
      queue = [];
      run.forEach((fn) => fn());
    },
  };
}

/** Scripted fake of the lab server with controllable frame latency. */
class FakeLab implements LabTransport {
  seq = 0;
  detuning = 0;
  angle = 90;
  temperature = 398;
  log: MarkEntry[] = [];
  controlCalls: ControlRequest[] = [];
  /** queue of deferred frame resolvers, used to inject stale responses */
  pendingFrames: { seq: number; resolve: (f: FramePayload) => void }[] = [];
  deferFrames = false;

  private state(): StatePayload {
    return {
      seq: this.seq,
      detuning_mhz: this.detuning,
      angle_deg: this.angle,
      temperature_k: this.temperature,
      reference_frequency_thz: 751.52665,
      log: [...this.log],
    };
  }

  frameFor(seq: number): FramePayload {
    const aligned = Math.abs(this.detuning) < 3;
    return {
      seq,
      grid: [
        [0, 0.2],
        [1, 0],
      ],
      grid_extent_m: { x_min: -0.032, x_max: 0.032, z_min: 0, z_max: 0.026 },
      centroids: [
        { beam_index: 1, x_m: 0, z_m: 0.004, intensity: 1 },
        { beam_index: 2, x_m: 0, z_m: 0.01, intensity: 1 },
        { beam_index: 3, x_m: 0, z_m: 0.016, intensity: 1 },
        { beam_index: 4, x_m: 0, z_m: 0.022, intensity: 1 },
      ],
      alignment: {
        perp_residual_m: aligned ? 2e-6 : 4e-4,
        line_angle_to_beams_rad: 1.57,
        line_angle_to_axis_rad: 0,
        pair24_offset_m: this.detuning * 1.5e-5,
        pair13_offset_m: -this.detuning * 1.5e-5,
        aligned,
      },
      axis_angle_deg: this.angle,
      total_intensity: 1,
    };
  }

  async getState(): Promise<StatePayload> {
    return this.state();
  }

  async postControl(req: ControlRequest): Promise<StatePayload> {
    this.controlCalls.push(req);
    if (req.detuning_mhz !== undefined) this.detuning = req.detuning_mhz;
    if (req.angle_deg !== undefined) this.angle = req.angle_deg;
    if (req.temperature_k !== undefined) this.temperature = req.temperature_k;
    this.seq += 1;
    return this.state();
  }

  getFrame(): Promise<FramePayload> {
    if (!this.deferFrames) return Promise.resolve(this.frameFor(this.seq));
    return new Promise((resolve) => {
      this.pendingFrames.push({ seq: this.seq, resolve });
    });
  }

  /** resolve the i-th deferred frame with the seq it was requested at */
  releaseFrame(i: number): void {
    const pending = this.pendingFrames[i];
    pending.resolve(this.frameFor(pending.seq));
  }

  async postMark(label: string): Promise<{ seq: number; log: MarkEntry[] }> {
    if (!label.trim()) throw new Error("/api/mark -> 422: label must not be empty");
    this.log.push({
      label,
      frequency_hz: 751.52665e12 + this.detuning * 1e6,
      detuning_mhz: this.detuning,
      angle_deg: this.angle,
      timestamp: 0,
      seq: this.seq,
    });
    return { seq: this.seq, log: [...this.log] };
  }

  async getReveal(): Promise<RevealPayload> {
    // two-line truth table: 174 at 0, 176 at -509 MHz
    const lines = [
      { label: "174Yb", frequency_hz: 751.52665e12, shift_mhz: 0, cluster: null },
      {
        label: "176Yb",
        frequency_hz: 751.52665e12 - 509e6,
        shift_mhz: -509,
        cluster: null,
      },
    ];
    const marks = this.log.map((entry) => {
      const errs = lines.map((l) => Math.abs(l.frequency_hz - entry.frequency_hz));
      const k = errs[0] <= errs[1] ? 0 : 1;
      return {
        label: entry.label,
        frequency_hz: entry.frequency_hz,
        nearest_line: lines[k].label,
        error_mhz: errs[k] / 1e6,
        within_budget: errs[k] <= 60e6,
      };
    });
    return { seq: this.seq, ground_truth: lines, marks, budget_mhz: 60 };
  }
}

function makeModel() {
  const lab = new FakeLab();
  const timer = manualScheduler();
  const model = new LabViewModel(lab, timer.schedule, 0);
  return { lab, timer, model };
}

describe("slider control flow", () => {
  it("debounces slider moves into one control POST", async () => {
    const { lab, timer, model } = makeModel();
    await model.init();
    model.onSliderChange("detuning_mhz", -5);
    model.onSliderChange("detuning_mhz", -12);
    model.onSliderChange("detuning_mhz", -20);
    expect(lab.controlCalls).toHaveLength(0); // nothing sent yet
    timer.flush();
    await Promise.resolve();
    await new Promise((r) => setTimeout(r, 0));
    expect(lab.controlCalls).toEqual([{ detuning_mhz: -20 }]);
    expect(model.ackSeq).toBe(1);
  });

  it("locks controls until the server acknowledges", async () => {
    const { lab, model } = makeModel();
    await model.init();
    const states: boolean[] = [];
    model.subscribe(() => states.push(model.controlLocked));
    model.onSliderChange("angle_deg", 70);
    const flushed = model.flushControl();
    expect(model.controlLocked).toBe(true);
    await flushed;
    expect(model.controlLocked).toBe(false);
    expect(states).toContain(true);
    expect(lab.controlCalls).toEqual([{ angle_deg: 70 }]);
  });

  it("coalesces several fields into one request", async () => {
    const { lab, model } = makeModel();
    await model.init();
    model.onSliderChange("detuning_mhz", 10);
    model.onSliderChange("angle_deg", 80);
    await model.flushControl();
    expect(lab.controlCalls).toEqual([{ detuning_mhz: 10, angle_deg: 80 }]);
  });
});

describe("stale-frame guard", () => {
  it("never draws a frame older than the acknowledged controls", async () => {
    const { lab, model } = makeModel();
    await model.init();
    expect(model.frame?.seq).toBe(0);

    // request a frame, delay its response, change controls meanwhile
    lab.deferFrames = true;
    const slowPoll = model.refreshFrame();

    lab.deferFrames = false;
    model.onSliderChange("detuning_mhz", 100);
    await model.flushControl(); // acks seq 1 and fetches a fresh frame
    expect(model.frame?.seq).toBe(1);
    const fresh = model.frame;

    lab.releaseFrame(0); // the stale seq-0 response finally arrives
    await slowPoll;
    expect(model.frame).toBe(fresh); // stale frame was dropped
    expect(model.staleFramesDropped).toBe(1);
  });

  it("accepts frames at the current sequence number", async () => {
    const { model } = makeModel();
    await model.init();
    await model.refreshFrame();
    expect(model.frame?.seq).toBe(0);
    expect(model.staleFramesDropped).toBe(0);
  });
});

describe("operator session", () => {
  it("slider to resonance turns the aligned indicator on, mark+reveal scores within budget", async () => {
    const { model } = makeModel();
    await model.init();

    // detuned: spots split, not aligned
    model.onSliderChange("detuning_mhz", 40);
    await model.flushControl();
    expect(model.aligned).toBe(false);
    expect(model.frame?.alignment?.pair24_offset_m).toBeGreaterThan(0);
    expect(model.frame?.alignment?.pair13_offset_m).toBeLessThan(0);

    // walk onto resonance: indicator flips
    model.onSliderChange("detuning_mhz", 1);
    await model.flushControl();
    expect(model.aligned).toBe(true);

    await model.mark("174 line");
    expect(model.markLog).toHaveLength(1);

    await model.doReveal();
    const rows = model.scoreRows();
    expect(rows).toHaveLength(1);
    expect(rows[0].ok).toBe(true);
    expect(rows[0].errorMhz).toBeLessThan(60);
  });

  it("marking far off any line yields a red chip", async () => {
    const { model } = makeModel();
    await model.init();
    model.onSliderChange("detuning_mhz", -250); // between 174 and 176
    await model.flushControl();
    await model.mark("guess");
    await model.doReveal();
    expect(model.scoreRows()[0].ok).toBe(false);
  });

  it("surfaces mark validation errors without crashing", async () => {
    const { model } = makeModel();
    await model.init();
    await model.mark("   ");
    expect(model.lastError).toContain("422");
    expect(model.markLog).toHaveLength(0);
  });
});
