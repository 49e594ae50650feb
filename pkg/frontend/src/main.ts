/** DOM wiring: sliders with numeric mirrors, live spot canvas, mark log
 * and reveal panel. All logic lives in LabViewModel; this file only
 * reads the model and forwards events. */

import { HttpTransport } from "./api";
import { drawFrame } from "./heatmap";
import { LabViewModel } from "./model";

const POLL_MS = 500;

const apiBase =
  new URLSearchParams(window.location.search).get("api") ?? "";
const model = new LabViewModel(new HttpTransport(apiBase));

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const canvas = el<HTMLCanvasElement>("spots");
const ctx = canvas.getContext("2d")!;

interface SliderSpec {
  slider: string;
  mirror: string;
  field: "detuning_mhz" | "angle_deg" | "temperature_k";
}

const SLIDERS: SliderSpec[] = [
  { slider: "detuning", mirror: "detuning-num", field: "detuning_mhz" },
  { slider: "angle", mirror: "angle-num", field: "angle_deg" },
  { slider: "temperature", mirror: "temperature-num", field: "temperature_k" },
];

function wireSlider(spec: SliderSpec): void {
  const slider = el<HTMLInputElement>(spec.slider);
  const mirror = el<HTMLInputElement>(spec.mirror);
  const push = (value: number) => model.onSliderChange(spec.field, value);
  slider.addEventListener("input", () => {
    mirror.value = slider.value;
    push(Number(slider.value));
  });
  mirror.addEventListener("change", () => {
    slider.value = mirror.value;
    push(Number(mirror.value));
  });
}

function renderControls(): void {
  for (const spec of SLIDERS) {
    const slider = el<HTMLInputElement>(spec.slider);
    const mirror = el<HTMLInputElement>(spec.mirror);
    slider.disabled = model.controlLocked;
    mirror.disabled = model.controlLocked;
    if (document.activeElement !== slider && document.activeElement !== mirror) {
      slider.value = String(model.controls[spec.field]);
      mirror.value = String(model.controls[spec.field]);
    }
  }
}

function renderReadout(): void {
  const a = model.frame?.alignment ?? null;
  el("aligned-indicator").className = model.aligned ? "chip ok" : "chip";
  el("aligned-indicator").textContent = model.aligned
    ? "ALIGNED"
    : "not aligned";
  el("residual").textContent = a
    ? `${(a.perp_residual_m * 1e6).toFixed(1)} um`
    : "-";
  const arrow = (v: number) => (v > 0 ? "→" : v < 0 ? "←" : "·");
  el("pair24").textContent = a
    ? `${arrow(a.pair24_offset_m)} ${(a.pair24_offset_m * 1e6).toFixed(0)} um`
    : "-";
  el("pair13").textContent = a
    ? `${arrow(a.pair13_offset_m)} ${(a.pair13_offset_m * 1e6).toFixed(0)} um`
    : "-";
}

function renderLog(): void {
  const tbody = el<HTMLTableSectionElement>("log-body");
  tbody.replaceChildren(
    ...model.markLog.map((entry) => {
      const tr = document.createElement("tr");
      const freqThz = entry.frequency_hz / 1e12;
      for (const text of [
        entry.label,
        `${entry.detuning_mhz.toFixed(1)} MHz`,
        `${freqThz.toFixed(6)} THz`,
        `${entry.angle_deg.toFixed(0)} deg`,
      ]) {
        const td = document.createElement("td");
        td.textContent = text;
        tr.appendChild(td);
      }
      return tr;
    }),
  );
}

function renderScore(): void {
  const panel = el("score-panel");
  const rows = model.scoreRows();
  if (!model.reveal) {
    panel.replaceChildren();
    return;
  }
  const budget = document.createElement("p");
  budget.textContent = `budget: ${model.reveal.budget_mhz.toFixed(0)} MHz`;
  const list = document.createElement("div");
  for (const row of rows) {
    const chip = document.createElement("span");
    chip.className = row.ok ? "chip ok" : "chip bad";
    chip.textContent = `${row.label}: ${row.errorMhz.toFixed(1)} MHz`;
    list.appendChild(chip);
  }
  const truth = document.createElement("pre");
  truth.textContent = model.reveal.ground_truth
    .map((l) => `${l.label.padEnd(22)} ${l.shift_mhz.toFixed(1).padStart(8)} MHz`)
    .join("\n");
  panel.replaceChildren(budget, list, truth);
}

function render(): void {
  renderControls();
  renderReadout();
  renderLog();
  renderScore();
  if (model.frame) drawFrame(ctx, model.frame, canvas.width, canvas.height);
}

async function start(): Promise<void> {
  for (const spec of SLIDERS) wireSlider(spec);
  el("mark-btn").addEventListener("click", () => {
    const label = el<HTMLInputElement>("mark-label").value;
    void model.mark(label);
  });
  el("reveal-btn").addEventListener("click", () => void model.doReveal());
  model.subscribe(render);
  await model.init();
  setInterval(() => void model.refreshFrame(), POLL_MS);
}

void start();
