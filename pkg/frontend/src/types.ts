/** Wire types shared with the engine's /v1 JSON API. */

/** One point: x, y and the one-hot pen flags (down, up, end). */
export type Stroke5Point = [number, number, number, number, number];

export interface Stroke5Sketch {
  canvas: [number, number];
  points: Stroke5Point[];
}

export interface JobRequest {
  operation?: string;
  sketch: Stroke5Sketch;
  model?: string;
  params?: Record<string, unknown>;
}

export interface Artifact {
  name: string;
  media_type: string;
  base64: string;
}

export interface JobResponse {
  status: "ok" | "error";
  payload?: Record<string, unknown>;
  artifacts?: Artifact[];
  code?: string;
  message?: string;
}

export interface AttributionPayload {
  granularity: "stroke" | "point";
  scores: number[];
  normalized_scores: number[];
  ranking: number[];
  correlation?: { corr: number | null; reliable: string; n_strokes: number };
}

export interface ModelInfo {
  id: string;
  kind: string;
  input_dims: [number, number];
  n_outputs: number;
}

export interface ReferenceInfo {
  id: string;
  dim: number;
}

/** What the scorer's scalar is computed against. */
export type Target =
  | { kind: "class"; index: number }
  | { kind: "reference"; id: string }
  | { kind: "reference_sketch"; sketch: Stroke5Sketch };
