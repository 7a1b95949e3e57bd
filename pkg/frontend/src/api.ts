/**
 * Client for the engine's /v1 HTTP JSON API. Every request body is recorded in
 * an append-only log so a session can be exported and replayed verbatim; at
 * most one attribution request is in flight and newer ones cancel it.
 */

import type {
  AttributionPayload,
  JobRequest,
  JobResponse,
  ModelInfo,
  ReferenceInfo,
  Stroke5Sketch,
  Target,
} from "./types.js";

export interface LoggedRequest {
  endpoint: string;
  body: JobRequest;
}

export class EngineClient {
  readonly baseUrl: string;
  readonly log: LoggedRequest[] = [];
  private inflight: AbortController | null = null;

  constructor(baseUrl: string) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
  }

  async health(): Promise<boolean> {
    try {
      const res = await fetch(`${this.baseUrl}/health`);
      return res.ok;
    } catch {
      return false;
    }
  }

  async models(): Promise<{ models: ModelInfo[]; references: ReferenceInfo[] }> {
    const res = await fetch(`${this.baseUrl}/v1/models`);
    if (!res.ok) throw new Error(`models listing failed: ${res.status}`);
    return (await res.json()) as { models: ModelInfo[]; references: ReferenceInfo[] };
  }

  private targetParams(target: Target): Record<string, unknown> {
    switch (target.kind) {
      case "class":
        return { kind: "class_logit", class: target.index };
      case "reference":
        return { kind: "cosine_sim", reference_id: target.id };
      case "reference_sketch":
        return { kind: "cosine_sim", reference_sketch: target.sketch };
    }
  }

  private async post(endpoint: string, body: JobRequest, signal?: AbortSignal): Promise<JobResponse> {
    this.log.push({ endpoint, body: JSON.parse(JSON.stringify(body)) as JobRequest });
    const res = await fetch(`${this.baseUrl}${endpoint}`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
      signal,
    });
    const payload = (await res.json()) as JobResponse;
    if (payload.status !== "ok") {
      throw new Error(payload.message ?? `request failed: ${res.status}`);
    }
    return payload;
  }

  /** Attribution with cancellation: a newer call aborts the pending one. */
  async attribute(
    sketch: Stroke5Sketch,
    model: string,
    target: Target,
    mode: "sla" | "psla" = "sla",
  ): Promise<AttributionPayload> {
    this.inflight?.abort();
    const controller = new AbortController();
    this.inflight = controller;
    try {
      const res = await this.post(
        "/v1/attribute",
        {
          operation: "attribute",
          sketch,
          model,
          params: { mode, target: this.targetParams(target) },
        },
        controller.signal,
      );
      return res.payload as unknown as AttributionPayload;
    } finally {
      if (this.inflight === controller) this.inflight = null;
    }
  }

  async filter(
    sketch: Stroke5Sketch,
    model: string,
    target: Target,
    delta: number,
  ): Promise<{ kept: number[]; removed: number[]; sketch: Stroke5Sketch }> {
    const params: Record<string, unknown> = { granularity: "stroke", delta };
    const t = this.targetParams(target);
    if ("reference_id" in t) params.reference_id = t.reference_id;
    if ("reference_sketch" in t) params.reference_sketch = t.reference_sketch;
    const res = await this.post("/v1/filter", { operation: "filter", sketch, model, params });
    return res.payload as unknown as { kept: number[]; removed: number[]; sketch: Stroke5Sketch };
  }

  async render(sketch: Stroke5Sketch, mode: "hard" | "soft" = "hard"): Promise<string> {
    const res = await this.post("/v1/render", { operation: "render", sketch, params: { mode } });
    const art = res.artifacts?.[0];
    if (!art) throw new Error("render returned no artifact");
    return `data:${art.media_type};base64,${art.base64}`;
  }

  /** Re-issue a logged request verbatim (session replay). */
  async replay(entry: LoggedRequest): Promise<JobResponse> {
    const res = await fetch(`${this.baseUrl}${entry.endpoint}`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(entry.body),
    });
    return (await res.json()) as JobResponse;
  }

  exportLog(): string {
    return JSON.stringify(this.log, null, 2);
  }
}
