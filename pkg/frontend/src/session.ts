/**
 * Drawing-session state: the sketch, the last attribution overlay with its
 * staleness flag, pending removal suggestions, and an undo/redo history.
 * All mutations go through methods so every state change is reproducible
 * from user actions plus the request log.
 */

import {
  appendStroke,
  cloneSketch,
  computeSuggestions,
  emptySketch,
  removeStrokes,
  splitStrokes,
} from "./sketch.js";
import type { AttributionPayload, Stroke5Sketch, Target } from "./types.js";

export interface Overlay {
  payload: AttributionPayload;
  stale: boolean;
}

interface Snapshot {
  sketch: Stroke5Sketch;
  overlay: Overlay | null;
  suggestions: number[];
}

export class CanvasSession {
  sketch: Stroke5Sketch;
  target: Target | null = null;
  model: string | null = null;
  delta = 0.3;
  overlay: Overlay | null = null;
  suggestions: number[] = [];
  private undoStack: Snapshot[] = [];
  private redoStack: Snapshot[] = [];

  constructor(canvasW: number, canvasH: number) {
    this.sketch = emptySketch(canvasW, canvasH);
  }

  private snapshot(): Snapshot {
    return {
      sketch: cloneSketch(this.sketch),
      overlay: this.overlay
        ? { payload: JSON.parse(JSON.stringify(this.overlay.payload)), stale: this.overlay.stale }
        : null,
      suggestions: [...this.suggestions],
    };
  }

  private pushHistory(): void {
    this.undoStack.push(this.snapshot());
    this.redoStack = [];
  }

  private restore(snap: Snapshot): void {
    this.sketch = snap.sketch;
    this.overlay = snap.overlay;
    this.suggestions = snap.suggestions;
  }

  strokeCount(): number {
    return splitStrokes(this.sketch).length;
  }

  /** A completed pointer trace becomes the next stroke, in drawing order. */
  addStroke(samples: Array<[number, number]>, displayW: number, displayH: number): void {
    if (samples.length === 0) return;
    this.pushHistory();
    this.sketch = appendStroke(this.sketch, samples, displayW, displayH);
    if (this.overlay) this.overlay.stale = true;
    this.suggestions = [];
  }

  /** Install a fresh attribution result and derive removal suggestions. */
  setAttribution(payload: AttributionPayload): void {
    this.overlay = { payload, stale: false };
    this.suggestions =
      payload.granularity === "stroke" ? computeSuggestions(payload.scores, this.delta) : [];
  }

  /** Recompute suggestions for a new keep slack without a new request. */
  setDelta(delta: number): void {
    this.delta = delta;
    if (this.overlay && !this.overlay.stale && this.overlay.payload.granularity === "stroke") {
      this.suggestions = computeSuggestions(this.overlay.payload.scores, delta);
    }
  }

  /** Apply every pending suggestion; equals the engine's stroke filter output. */
  acceptAllSuggestions(): void {
    if (this.suggestions.length === 0) return;
    this.pushHistory();
    this.sketch = removeStrokes(this.sketch, this.suggestions);
    this.suggestions = [];
    if (this.overlay) this.overlay.stale = true;
  }

  acceptSuggestion(strokeIdx: number): void {
    if (!this.suggestions.includes(strokeIdx)) return;
    this.pushHistory();
    this.sketch = removeStrokes(this.sketch, [strokeIdx]);
    this.suggestions = [];
    if (this.overlay) this.overlay.stale = true;
  }

  /** Dismissing suggestions never touches the sketch. */
  dismissAllSuggestions(): void {
    this.suggestions = [];
  }

  undo(): boolean {
    const snap = this.undoStack.pop();
    if (!snap) return false;
    this.redoStack.push(this.snapshot());
    this.restore(snap);
    return true;
  }

  redo(): boolean {
    const snap = this.redoStack.pop();
    if (!snap) return false;
    this.undoStack.push(this.snapshot());
    this.restore(snap);
    return true;
  }

  clear(): void {
    this.pushHistory();
    this.sketch = emptySketch(this.sketch.canvas[0], this.sketch.canvas[1]);
    this.overlay = null;
    this.suggestions = [];
  }

  exportSketch(): string {
    return JSON.stringify(this.sketch);
  }
}
