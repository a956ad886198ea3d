/** Pure HTML renderers. State in, markup out — the bootstrap code wires the
 * strings into the page and re-renders on state changes, which keeps every
 * view testable without a browser. */

import { ImageEntry, JobStatus, MetricsRow } from "./api.js";
import { CorrectionDraft, Point, ViewTransform, imageToScreen } from "./draft.js";
import { Assignment } from "./correspond.js";

function esc(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function badgeFor(entry: ImageEntry, inJob: boolean): string {
  if (inJob) return "in-job";
  if (entry.corrected) return "corrected";
  return "uncorrected";
}

export function renderGallery(
  images: ImageEntry[],
  opts: { jobRunning?: boolean; error?: string } = {},
): string {
  if (opts.error) {
    return `<div class="banner error">${esc(opts.error)}</div>`;
  }
  if (images.length === 0) {
    return `<p class="hint">No images in this project yet. ` +
      `Generate or import a dataset, then reload.</p>`;
  }
  const cards = images.map((img) => {
    const badge = badgeFor(img, Boolean(opts.jobRunning && img.corrected));
    const star = img.is_exemplar ? `<span class="exemplar">exemplar</span>` : "";
    return `<figure class="card" data-image-id="${esc(img.id)}">` +
      `<img src="/api/images/${esc(img.id)}" alt="${esc(img.id)}">` +
      `<figcaption>${esc(img.id)} <span class="badge ${badge}">${badge}</span>` +
      `${star}</figcaption></figure>`;
  });
  return `<div class="gallery">${cards.join("")}</div>`;
}

function polyline(points: readonly Point[], view: ViewTransform,
                  cls: string, closed: boolean): string {
  const mapped = points.map((p) => imageToScreen(view, p as Point));
  const attr = mapped.map(([x, y]) => `${x},${y}`).join(" ");
  const tag = closed ? "polygon" : "polyline";
  return `<${tag} class="${cls}" points="${attr}" fill="none"></${tag}>`;
}

/** Prediction in red, drafts in green; committed segments solid, the pending
 * stroke dashed. Optional correspondence arcs link re-assigned vertices. */
export function renderEditor(
  imageId: string,
  prediction: Point[] | null,
  draft: CorrectionDraft,
  preview: Assignment[] = [],
): string {
  const view = draft.view;
  const layers: string[] = [];
  if (prediction) {
    layers.push(polyline(prediction, view, "prediction red", true));
    for (const { vertexIndex, target } of preview) {
      const from = imageToScreen(view, prediction[vertexIndex]);
      const to = imageToScreen(view, target);
      layers.push(`<line class="arc" x1="${from[0]}" y1="${from[1]}" ` +
        `x2="${to[0]}" y2="${to[1]}"></line>`);
    }
  }
  for (const seg of draft.segments) {
    layers.push(polyline(seg, view, "correction green", false));
  }
  if (draft.pendingPoints.length > 0) {
    layers.push(polyline(draft.pendingPoints, view, "pending green dashed", false));
  }
  const submit = draft.canSubmit
    ? `<button class="submit">Submit corrections</button>`
    : `<button class="submit" disabled>Submit corrections</button>`;
  return `<div class="editor" data-image-id="${esc(imageId)}">` +
    `<svg class="overlay"><image href="/api/images/${esc(imageId)}"></image>` +
    `${layers.join("")}</svg>` +
    `<div class="controls"><button class="undo">Undo point</button>` +
    `<button class="commit">Finish segment</button>${submit}</div></div>`;
}

export function renderToast(message: string): string {
  return `<div class="toast">${esc(message)}</div>`;
}

export function renderJobPanel(job: JobStatus | null): string {
  if (!job) return `<div class="job idle">No fine-tune job.</div>`;
  if (job.status === "running") {
    return `<div class="job running">Fine-tuning: epoch ${job.epoch}` +
      `/${job.epochs}…</div>`;
  }
  if (job.status === "failed") {
    const excerpt = (job.error ?? "unknown error").split("\n").slice(0, 4).join("\n");
    return `<div class="job failed"><strong>Job failed.</strong>` +
      `<pre>${esc(excerpt)}</pre></div>`;
  }
  return `<div class="job done">Fine-tune complete.</div>`;
}

/** Old prediction dashed, new prediction solid, plus the per-image metric
 * delta when metrics are available. */
export function renderDiff(
  imageId: string,
  before: Point[],
  after: Point[],
  view: ViewTransform,
  delta: { before: MetricsRow; after: MetricsRow } | null,
): string {
  const panel = delta
    ? `<div class="delta">IoU ${delta.before.iou.toFixed(4)} → ` +
      `${delta.after.iou.toFixed(4)}, HD ${delta.before.hd.toFixed(2)} → ` +
      `${delta.after.hd.toFixed(2)}</div>`
    : "";
  return `<div class="diff" data-image-id="${esc(imageId)}">` +
    `<svg class="overlay"><image href="/api/images/${esc(imageId)}"></image>` +
    polyline(before, view, "before dashed", true) +
    polyline(after, view, "after solid", true) +
    `</svg>${panel}</div>`;
}
