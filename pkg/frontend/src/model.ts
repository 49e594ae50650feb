/** View model of the virtual lab.
 *
 * All physics lives on the server; this class owns the client-side
 * bookkeeping the spec cares about: debounced control writes, a lock on
 * the controls until the server acknowledges the new sequence number,
 * and a stale-frame guard so a late frame response can never overwrite
 * a newer one.
 */

import type {
  ControlRequest,
  FramePayload,
  LabTransport,
  RevealPayload,
  StatePayload,
} from "./api";

export type Listener = () => void;
export type Scheduler = (fn: () => void, ms: number) => () => void;

/** setTimeout-based scheduler; tests inject a manual one. */
export const timerScheduler: Scheduler = (fn, ms) => {
  const id = setTimeout(fn, ms);
  return () => clearTimeout(id);
};

export const DEBOUNCE_MS = 150;

export interface ControlsState {
  detuning_mhz: number;
  angle_deg: number;
  temperature_k: number;
}

export class LabViewModel {
  controls: ControlsState = { detuning_mhz: 0, angle_deg: 90, temperature_k: 0 };
  /** last sequence number the server acknowledged for our controls */
  ackSeq = 0;
  /** true while a control write is in flight; the UI locks inputs */
  controlLocked = false;
  frame: FramePayload | null = null;
  reveal: RevealPayload | null = null;
  markLog: StatePayload["log"] = [];
  lastError: string | null = null;

  private pendingControl: ControlRequest = {};
  private cancelDebounce: (() => void) | null = null;
  private listeners: Listener[] = [];
  private framesDropped = 0;

  constructor(
    private transport: LabTransport,
    private schedule: Scheduler = timerScheduler,
    private debounceMs: number = DEBOUNCE_MS,
  ) {}

  subscribe(fn: Listener): void {
    this.listeners.push(fn);
  }

  private notify(): void {
    for (const fn of this.listeners) fn();
  }

  get staleFramesDropped(): number {
    return this.framesDropped;
  }

  async init(): Promise<void> {
    const state = await this.transport.getState();
    this.controls = {
      detuning_mhz: state.detuning_mhz,
      angle_deg: state.angle_deg,
      temperature_k: state.temperature_k,
    };
    this.ackSeq = state.seq;
    this.markLog = state.log;
    this.notify();
    await this.refreshFrame();
  }

  /** Slider/numeric input moved: coalesce changes, then POST once. */
  onSliderChange(field: keyof ControlsState, value: number): void {
    this.pendingControl[field] = value;
    this.controls[field] = value;
    if (this.cancelDebounce) this.cancelDebounce();
    this.cancelDebounce = this.schedule(() => {
      this.cancelDebounce = null;
      void this.flushControl();
    }, this.debounceMs);
    this.notify();
  }

  /** Send the coalesced control write and wait for the acknowledgement. */
  async flushControl(): Promise<void> {
    if (Object.keys(this.pendingControl).length === 0) return;
    const req = this.pendingControl;
    this.pendingControl = {};
    this.controlLocked = true;
    this.notify();
    try {
      const state = await this.transport.postControl(req);
      this.ackSeq = state.seq;
      this.controls = {
        detuning_mhz: state.detuning_mhz,
        angle_deg: state.angle_deg,
        temperature_k: state.temperature_k,
      };
      this.lastError = null;
    } catch (err) {
      this.lastError = String(err);
    } finally {
      this.controlLocked = false;
      this.notify();
    }
    await this.refreshFrame();
  }

  /** Fetch a frame; drop it if it predates the acknowledged controls. */
  async refreshFrame(): Promise<void> {
    const frame = await this.transport.getFrame();
    if (frame.seq < this.ackSeq) {
      this.framesDropped += 1;
      return;
    }
    this.frame = frame;
    this.notify();
  }

  get aligned(): boolean {
    return this.frame?.alignment?.aligned ?? false;
  }

  async mark(label: string): Promise<void> {
    try {
      const result = await this.transport.postMark(label);
      this.markLog = result.log;
      this.lastError = null;
    } catch (err) {
      this.lastError = String(err);
    }
    this.notify();
  }

  async doReveal(): Promise<void> {
    this.reveal = await this.transport.getReveal();
    this.notify();
  }

  /** Rows for the score panel: one chip per mark, green iff in budget. */
  scoreRows(): { label: string; errorMhz: number; ok: boolean }[] {
    if (!this.reveal) return [];
    return this.reveal.marks.map((m) => ({
      label: m.label,
      errorMhz: m.error_mhz,
      ok: m.within_budget,
    }));
  }
}
