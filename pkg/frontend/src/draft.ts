/** Correction drafting state: an in-progress polyline, committed segments,
 * and the view transform. The displayed prediction is never mutated; all
 * committed coordinates are in image pixel space. */

import { CorrectionSetJson, canonicalize } from "./schema.js";

export type Point = [number, number];

export interface ViewTransform {
  scale: number;
  offsetX: number;
  offsetY: number;
}

export const IDENTITY_VIEW: ViewTransform = { scale: 1, offsetX: 0, offsetY: 0 };

export function screenToImage(view: ViewTransform, p: Point): Point {
  return [(p[0] - view.offsetX) / view.scale, (p[1] - view.offsetY) / view.scale];
}

export function imageToScreen(view: ViewTransform, p: Point): Point {
  return [p[0] * view.scale + view.offsetX, p[1] * view.scale + view.offsetY];
}

/** Thin out a freehand stroke to at most one point per `spacing` px of arc
 * length; endpoints always survive. */
export function decimate(points: Point[], spacing = 2.0): Point[] {
  if (points.length <= 2) return points.slice();
  const kept: Point[] = [points[0]];
  let sinceLast = 0;
  for (let i = 1; i < points.length - 1; i++) {
    const prev = points[i - 1];
    const cur = points[i];
    sinceLast += Math.hypot(cur[0] - prev[0], cur[1] - prev[1]);
    if (sinceLast >= spacing) {
      kept.push(cur);
      sinceLast = 0;
    }
  }
  kept.push(points[points.length - 1]);
  return kept;
}

export class CorrectionDraft {
  readonly imageId: string;
  view: ViewTransform = { ...IDENTITY_VIEW };
  private pending: Point[] = [];
  private committed: Point[][] = [];

  constructor(imageId: string) {
    this.imageId = imageId;
  }

  /** Add a point in screen coordinates; stored in image space so pan/zoom
   * never alters what gets submitted. */
  addPoint(screenPoint: Point): void {
    this.pending.push(screenToImage(this.view, screenPoint));
  }

  addImagePoint(p: Point): void {
    this.pending.push([p[0], p[1]]);
  }

  undoPoint(): void {
    this.pending.pop();
  }

  get pendingPoints(): readonly Point[] {
    return this.pending;
  }

  get segments(): readonly Point[][] {
    return this.committed;
  }

  /** Commit the in-progress polyline as a segment (decimated). Rejects
   * sub-2-point strokes instead of committing an invalid segment. */
  commitSegment(): boolean {
    const seg = decimate(this.pending);
    if (seg.length < 2) return false;
    this.committed.push(seg);
    this.pending = [];
    return true;
  }

  discardSegment(index: number): void {
    this.committed.splice(index, 1);
  }

  get canSubmit(): boolean {
    return this.committed.length > 0 && this.committed.every((s) => s.length >= 2);
  }

  toJson(): CorrectionSetJson {
    return {
      image_id: this.imageId,
      segments: this.committed.map((seg) => seg.map((p) => [p[0], p[1]] as Point)),
    };
  }

  /** The exact byte string POSTed to the service. */
  serialize(): string {
    return canonicalize(this.toJson());
  }

  clear(): void {
    this.pending = [];
    this.committed = [];
  }
}
