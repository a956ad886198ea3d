/** Application state machine: gallery, editor session, submit flow, and the
 * fine-tune job monitor. No DOM access — the bootstrap renders from this
 * state, and tests drive it directly. */

import { ApiClient, ApiError, ImageEntry, JobStatus } from "./api.js";
import { ContourJson } from "./schema.js";
import { CorrectionDraft, Point } from "./draft.js";
import { Assignment, correspondSegments } from "./correspond.js";

export interface SubmitResult {
  ok: boolean;
  status?: number;
  message?: string;
}

export class EditorSession {
  readonly draft: CorrectionDraft;
  prediction: Point[] | null = null;
  private inFlight = false;

  constructor(private api: ApiClient, readonly imageId: string) {
    this.draft = new CorrectionDraft(imageId);
  }

  async loadPrediction(): Promise<void> {
    const contour: ContourJson = await this.api.getPrediction(this.imageId);
    this.prediction = contour.vertices.map(([x, y]) => [x, y] as Point);
  }

  /** Correspondence-arc preview over the committed draft segments. */
  preview(): Assignment[] {
    if (!this.prediction || this.draft.segments.length === 0) return [];
    return correspondSegments(this.prediction,
      this.draft.segments.map((s) => s.slice()));
  }

  /** At most one in-flight submit; 400/409 surface verbatim and the draft is
   * left untouched so nothing the annotator drew is lost. */
  async submit(): Promise<SubmitResult> {
    if (!this.draft.canSubmit || this.inFlight) {
      return { ok: false, message: "nothing to submit" };
    }
    this.inFlight = true;
    try {
      await this.api.postCorrections(this.imageId, this.draft.serialize());
      this.draft.clear();
      return { ok: true };
    } catch (e) {
      if (e instanceof ApiError) {
        return { ok: false, status: e.status, message: e.detail };
      }
      return { ok: false, message: String(e) };
    } finally {
      this.inFlight = false;
    }
  }
}

export type Sleep = (ms: number) => Promise<void>;

const realSleep: Sleep = (ms) => new Promise((r) => setTimeout(r, ms));

export class JobMonitor {
  job: JobStatus | null = null;

  constructor(private api: ApiClient, private sleep: Sleep = realSleep) {}

  async start(config?: Record<string, unknown>): Promise<SubmitResult> {
    try {
      const { job } = await this.api.startFinetune(config);
      this.job = { id: job, status: "running", epoch: 0, epochs: 0, error: null };
      return { ok: true };
    } catch (e) {
      if (e instanceof ApiError) {
        return { ok: false, status: e.status, message: e.detail };
      }
      return { ok: false, message: String(e) };
    }
  }

  /** Poll at 1 Hz until the job leaves the running state. */
  async watch(onUpdate?: (job: JobStatus) => void): Promise<JobStatus> {
    if (!this.job) throw new Error("no job started");
    for (;;) {
      const status = await this.api.jobStatus(this.job.id);
      this.job = status;
      onUpdate?.(status);
      if (status.status !== "running") return status;
      await this.sleep(1000);
    }
  }
}

export class App {
  images: ImageEntry[] = [];
  galleryError: string | null = null;
  session: EditorSession | null = null;
  readonly monitor: JobMonitor;

  constructor(readonly api: ApiClient, sleep?: Sleep) {
    this.monitor = new JobMonitor(api, sleep);
  }

  async refreshGallery(): Promise<void> {
    try {
      this.images = await this.api.listImages();
      this.galleryError = null;
    } catch (e) {
      this.galleryError = e instanceof ApiError
        ? e.detail
        : "Cannot reach the project service.";
    }
  }

  async openEditor(imageId: string): Promise<EditorSession> {
    const session = new EditorSession(this.api, imageId);
    await session.loadPrediction();
    this.session = session;
    return session;
  }
}
