/**
 * Pure stroke-5 sketch operations mirrored from the engine: stroke capture,
 * splitting, the keep rule for removal suggestions, and suggestion application.
 * Everything here is side-effect free so the session logic stays replayable.
 */

import type { Stroke5Point, Stroke5Sketch } from "./types.js";

export const PEN_DOWN: [number, number, number] = [1, 0, 0];
export const PEN_UP: [number, number, number] = [0, 1, 0];

export function emptySketch(w: number, h: number): Stroke5Sketch {
  return { canvas: [w, h], points: [] };
}

export function cloneSketch(sketch: Stroke5Sketch): Stroke5Sketch {
  return {
    canvas: [sketch.canvas[0], sketch.canvas[1]],
    points: sketch.points.map((p) => [...p] as Stroke5Point),
  };
}

/**
 * Convert a pointer trace to stroke-5 points: every sample is pen-down and the
 * final sample carries the pen-up. A single-sample tap becomes a two-point dot
 * stroke (down plus a duplicated pen-up) so it still renders and terminates.
 */
export function captureStroke(samples: Array<[number, number]>): Stroke5Point[] {
  if (samples.length === 0) return [];
  if (samples.length === 1) {
    const [x, y] = samples[0];
    return [
      [x, y, ...PEN_DOWN],
      [x, y, ...PEN_UP],
    ];
  }
  return samples.map(([x, y], i) => {
    const pen = i === samples.length - 1 ? PEN_UP : PEN_DOWN;
    return [x, y, ...pen] as Stroke5Point;
  });
}

/** Append a captured stroke, scaling from display coordinates to the canvas. */
export function appendStroke(
  sketch: Stroke5Sketch,
  samples: Array<[number, number]>,
  displayW: number,
  displayH: number,
): Stroke5Sketch {
  const sx = sketch.canvas[0] / displayW;
  const sy = sketch.canvas[1] / displayH;
  const mapped = samples.map(([x, y]) => [x * sx, y * sy] as [number, number]);
  const out = cloneSketch(sketch);
  out.points.push(...captureStroke(mapped));
  return out;
}

/** Indices of each stroke's points; a stroke ends at its pen-up point. */
export function splitStrokes(sketch: Stroke5Sketch): number[][] {
  const strokes: number[][] = [];
  let run: number[] = [];
  for (let i = 0; i < sketch.points.length; i++) {
    const p = sketch.points[i];
    if (p[4] === 1) break; // end marker belongs to no stroke
    run.push(i);
    if (p[3] === 1) {
      strokes.push(run);
      run = [];
    }
  }
  if (run.length > 0) strokes.push(run);
  return strokes;
}

/** The engine's keep-score normalisation: floor negatives, normalise to sum 1. */
export function keepScores(raw: number[]): number[] {
  const floored = raw.map((s) => Math.max(s, 0));
  const total = floored.reduce((a, b) => a + b, 0);
  if (total <= 0) return raw.map(() => 1 / raw.length);
  return floored.map((s) => s / total);
}

/**
 * Strokes flagged for removal: normalised score + delta below 0.5, with the
 * top-scoring stroke always exempt so a drawing can never empty itself.
 */
export function computeSuggestions(rawScores: number[], delta: number): number[] {
  if (rawScores.length === 0) return [];
  const norm = keepScores(rawScores);
  let top = 0;
  for (let i = 1; i < rawScores.length; i++) {
    if (rawScores[i] > rawScores[top]) top = i;
  }
  const out: number[] = [];
  for (let i = 0; i < norm.length; i++) {
    if (i !== top && norm[i] + delta < 0.5) out.push(i);
  }
  return out;
}

/** Drop the given strokes (by index); the end marker, if any, survives. */
export function removeStrokes(sketch: Stroke5Sketch, drop: number[]): Stroke5Sketch {
  const dropSet = new Set(drop);
  const keep: Stroke5Point[] = [];
  splitStrokes(sketch).forEach((members, strokeIdx) => {
    if (!dropSet.has(strokeIdx)) {
      for (const i of members) keep.push([...sketch.points[i]] as Stroke5Point);
    }
  });
  const last = sketch.points[sketch.points.length - 1];
  if (last && last[4] === 1) keep.push([...last] as Stroke5Point);
  return { canvas: [sketch.canvas[0], sketch.canvas[1]], points: keep };
}

export function sketchesEqual(a: Stroke5Sketch, b: Stroke5Sketch): boolean {
  if (a.canvas[0] !== b.canvas[0] || a.canvas[1] !== b.canvas[1]) return false;
  if (a.points.length !== b.points.length) return false;
  return a.points.every((p, i) => p.every((v, j) => v === b.points[i][j]));
}
