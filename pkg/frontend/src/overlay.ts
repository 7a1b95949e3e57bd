/** Canvas drawing helpers: strokes colored on the engine's diverging scale. */

import { splitStrokes } from "./sketch.js";
import type { Stroke5Sketch } from "./types.js";

const NEG: [number, number, number] = [59, 76, 192];
const MID: [number, number, number] = [232, 232, 232];
const POS: [number, number, number] = [180, 4, 38];

/** Same blue-gray-red ramp the engine uses for its SVG overlays. */
export function divergingColor(value: number): string {
  const v = Math.max(-1, Math.min(1, value));
  const [lo, hi] = v < 0 ? [NEG, MID] : [MID, POS];
  const t = v < 0 ? v + 1 : v;
  const c = lo.map((a, i) => Math.round(a + t * (hi[i] - a)));
  return `rgb(${c[0]},${c[1]},${c[2]})`;
}

export function normalizedScores(scores: number[]): number[] {
  const peak = Math.max(...scores.map((s) => Math.abs(s)), 0);
  if (peak === 0) return scores.map(() => 0);
  return scores.map((s) => s / peak);
}

export interface DrawOptions {
  scores?: number[]; // per-stroke raw scores (diverging colors)
  suggestions?: number[]; // stroke indices drawn dashed
  stale?: boolean; // wash out the colors
}

export function drawSketch(
  ctx: CanvasRenderingContext2D,
  sketch: Stroke5Sketch,
  displayW: number,
  displayH: number,
  opts: DrawOptions = {},
): void {
  ctx.clearRect(0, 0, displayW, displayH);
  ctx.fillStyle = "#ffffff";
  ctx.fillRect(0, 0, displayW, displayH);
  const sx = displayW / sketch.canvas[0];
  const sy = displayH / sketch.canvas[1];
  const strokes = splitStrokes(sketch);
  const norm = opts.scores ? normalizedScores(opts.scores) : null;
  const suggested = new Set(opts.suggestions ?? []);

  strokes.forEach((members, idx) => {
    ctx.beginPath();
    members.forEach((pi, k) => {
      const [x, y] = sketch.points[pi];
      if (k === 0) ctx.moveTo(x * sx, y * sy);
      else ctx.lineTo(x * sx, y * sy);
    });
    let color = "#222222";
    if (norm && idx < norm.length) color = divergingColor(norm[idx]);
    if (opts.stale) color = "#9a9a9a";
    ctx.strokeStyle = color;
    ctx.lineWidth = suggested.has(idx) ? 1.5 : 2.5;
    ctx.setLineDash(suggested.has(idx) ? [6, 4] : []);
    ctx.stroke();
    ctx.setLineDash([]);
    if (members.length <= 2) {
      const [x, y] = sketch.points[members[0]];
      ctx.beginPath();
      ctx.arc(x * sx, y * sy, 2.5, 0, 2 * Math.PI);
      ctx.fillStyle = color;
      ctx.fill();
    }
  });
}
