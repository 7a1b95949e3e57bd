/**
 * DOM wiring for the assisted-drawing UI: pointer capture on the canvas,
 * attribution refresh on pen-up, removal suggestions with accept/dismiss,
 * a keep-slack slider, and session/log export.
 */

import { EngineClient } from "./api.js";
import { drawSketch } from "./overlay.js";
import { CanvasSession } from "./session.js";
import type { ModelInfo, ReferenceInfo, Target } from "./types.js";

const ENGINE_URL = (window as unknown as { STROKESCOPE_URL?: string }).STROKESCOPE_URL ?? "http://127.0.0.1:8750";
const CANVAS_SIZE = 48;

const canvas = document.getElementById("draw") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const statusBar = document.getElementById("status")!;
const banner = document.getElementById("banner")!;
const modelSelect = document.getElementById("model") as HTMLSelectElement;
const targetSelect = document.getElementById("target") as HTMLSelectElement;
const deltaSlider = document.getElementById("delta") as HTMLInputElement;
const deltaLabel = document.getElementById("delta-label")!;
const suggestionBox = document.getElementById("suggestions")!;

const client = new EngineClient(ENGINE_URL);
const session = new CanvasSession(CANVAS_SIZE, CANVAS_SIZE);
let models: ModelInfo[] = [];
let references: ReferenceInfo[] = [];
let trace: Array<[number, number]> = [];
let drawing = false;

function redraw(): void {
  const overlay = session.overlay;
  drawSketch(ctx, session.sketch, canvas.width, canvas.height, {
    scores: overlay && overlay.payload.granularity === "stroke" ? overlay.payload.scores : undefined,
    suggestions: session.suggestions,
    stale: overlay?.stale ?? false,
  });
  const n = session.strokeCount();
  const staleNote = overlay?.stale ? " (overlay stale)" : "";
  statusBar.textContent = `${n} stroke${n === 1 ? "" : "s"}${staleNote}`;
  suggestionBox.textContent = session.suggestions.length
    ? `Suggest removing stroke${session.suggestions.length === 1 ? "" : "s"} ${session.suggestions.join(", ")}`
    : "No removal suggestions";
}

function currentTarget(): Target | null {
  const value = targetSelect.value;
  if (!value) return null;
  if (value.startsWith("class:")) return { kind: "class", index: Number(value.slice(6)) };
  if (value.startsWith("ref:")) return { kind: "reference", id: value.slice(4) };
  return null;
}

async function refreshAttribution(): Promise<void> {
  const target = currentTarget();
  const model = modelSelect.value;
  if (!target || !model || session.strokeCount() === 0) return;
  session.model = model;
  session.target = target;
  try {
    const payload = await client.attribute(session.sketch, model, target, "sla");
    session.setAttribution(payload);
    banner.textContent = "";
  } catch (err) {
    if ((err as Error).name === "AbortError") return;
    if (session.overlay) session.overlay.stale = true;
    banner.textContent = `engine unreachable: ${(err as Error).message}`;
  }
  redraw();
}

canvas.addEventListener("pointerdown", (ev) => {
  drawing = true;
  trace = [[ev.offsetX, ev.offsetY]];
  canvas.setPointerCapture(ev.pointerId);
});

canvas.addEventListener("pointermove", (ev) => {
  if (!drawing) return;
  trace.push([ev.offsetX, ev.offsetY]);
  redraw();
  ctx.strokeStyle = "#444";
  ctx.lineWidth = 2.5;
  ctx.beginPath();
  trace.forEach(([x, y], i) => (i === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y)));
  ctx.stroke();
});

canvas.addEventListener("pointerup", () => {
  if (!drawing) return;
  drawing = false;
  session.addStroke(trace, canvas.width, canvas.height);
  trace = [];
  redraw();
  void refreshAttribution(); // refresh on stroke completion, not continuously
});

document.getElementById("refresh")!.addEventListener("click", () => void refreshAttribution());

document.getElementById("accept-all")!.addEventListener("click", () => {
  session.acceptAllSuggestions();
  redraw();
  void refreshAttribution();
});

document.getElementById("dismiss-all")!.addEventListener("click", () => {
  session.dismissAllSuggestions();
  redraw();
});

document.getElementById("undo")!.addEventListener("click", () => {
  session.undo();
  redraw();
});

document.getElementById("redo")!.addEventListener("click", () => {
  session.redo();
  redraw();
});

document.getElementById("clear")!.addEventListener("click", () => {
  session.clear();
  redraw();
});

deltaSlider.addEventListener("input", () => {
  const delta = Number(deltaSlider.value);
  deltaLabel.textContent = delta.toFixed(2);
  session.setDelta(delta);
  redraw();
});

function download(name: string, text: string): void {
  const a = document.createElement("a");
  a.href = URL.createObjectURL(new Blob([text], { type: "application/json" }));
  a.download = name;
  a.click();
}

document.getElementById("export-sketch")!.addEventListener("click", () => {
  download("sketch.json", session.exportSketch());
});

document.getElementById("export-log")!.addEventListener("click", () => {
  download("session-log.json", client.exportLog());
});

async function boot(): Promise<void> {
  if (!(await client.health())) {
    banner.textContent = `engine unreachable at ${ENGINE_URL}; start it with: strokescope serve`;
    redraw();
    return;
  }
  ({ models, references } = await client.models());
  modelSelect.innerHTML = "";
  for (const m of models) {
    const opt = document.createElement("option");
    opt.value = m.id;
    opt.textContent = `${m.id} (${m.kind})`;
    modelSelect.appendChild(opt);
  }
  const rebuildTargets = () => {
    const model = models.find((m) => m.id === modelSelect.value);
    targetSelect.innerHTML = "";
    if (!model) return;
    if (model.kind !== "embedding") {
      for (let c = 0; c < model.n_outputs; c++) {
        const opt = document.createElement("option");
        opt.value = `class:${c}`;
        opt.textContent = `class ${c}`;
        targetSelect.appendChild(opt);
      }
    } else {
      for (const r of references) {
        const opt = document.createElement("option");
        opt.value = `ref:${r.id}`;
        opt.textContent = `gallery: ${r.id}`;
        targetSelect.appendChild(opt);
      }
    }
  };
  modelSelect.addEventListener("change", rebuildTargets);
  rebuildTargets();
  redraw();
}

void boot();
