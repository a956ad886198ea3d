/** Thin typed client for the project service. All persistence flows through
 * these endpoints; the UI keeps no local storage format. */

import { CorrectionSetJson, ContourJson } from "./schema.js";

export interface ImageEntry {
  id: string;
  corrected: boolean;
  is_exemplar: boolean;
}

export interface JobStatus {
  id: string;
  status: "running" | "done" | "failed";
  epoch: number;
  epochs: number;
  error: string | null;
}

export interface MetricsRow {
  id: string;
  iou: number;
  hd: number;
}

export interface Metrics {
  aggregate: { mean_iou: number; mean_hd: number; count: number };
  per_image: MetricsRow[];
}

export class ApiError extends Error {
  constructor(public status: number, public detail: string) {
    super(`HTTP ${status}: ${detail}`);
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private baseUrl: string = "",
    private fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchImpl(this.baseUrl + path, init);
    if (!resp.ok) {
      let detail = resp.statusText;
      try {
        const body = await resp.json();
        if (body && typeof body.detail === "string") detail = body.detail;
      } catch {
        /* non-JSON error body; keep statusText */
      }
      throw new ApiError(resp.status, detail);
    }
    return (await resp.json()) as T;
  }

  listImages(): Promise<ImageEntry[]> {
    return this.request<ImageEntry[]>("/api/images");
  }

  imageUrl(imageId: string): string {
    return `${this.baseUrl}/api/images/${encodeURIComponent(imageId)}`;
  }

  getPrediction(imageId: string): Promise<ContourJson> {
    return this.request<ContourJson>(
      `/api/predictions/${encodeURIComponent(imageId)}`);
  }

  /** Body is the already-canonicalized string so what we send is exactly
   * what we validated and previewed. */
  postCorrections(imageId: string, canonicalBody: string): Promise<unknown> {
    return this.request(`/api/corrections/${encodeURIComponent(imageId)}`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: canonicalBody,
    });
  }

  startFinetune(config?: Record<string, unknown>): Promise<{ job: string }> {
    return this.request<{ job: string }>("/api/finetune", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(config ?? null),
    });
  }

  jobStatus(jobId: string): Promise<JobStatus> {
    return this.request<JobStatus>(`/api/jobs/${encodeURIComponent(jobId)}`);
  }

  metrics(): Promise<Metrics> {
    return this.request<Metrics>("/api/metrics");
  }
}

export type { CorrectionSetJson, ContourJson };
