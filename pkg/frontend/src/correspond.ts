/** Local preview of which predicted vertices a correction will re-assign.
 *
 * Mirrors the backend's correspondence rule exactly: match each segment's
 * endpoints to their nearest predicted vertices, keep the ring arc whose
 * vertices lie closer to the segment (mean nearest distance, shorter arc on
 * ties), pin each arc vertex to its nearest segment point; earlier segments
 * win overlapping vertices. Used only for the overlay — the server recomputes
 * the authoritative assignment during fine-tuning. */

import { Point } from "./draft.js";

export interface Assignment {
  vertexIndex: number;
  target: Point;
}

function dist(a: Point, b: Point): number {
  return Math.hypot(a[0] - b[0], a[1] - b[1]);
}

function nearestIndex(points: Point[], p: Point): number {
  let best = 0;
  let bestD = Infinity;
  for (let i = 0; i < points.length; i++) {
    const d = dist(points[i], p);
    if (d < bestD) {
      bestD = d;
      best = i;
    }
  }
  return best;
}

function arcIndices(a: number, b: number, n: number): number[] {
  const out: number[] = [];
  for (let i = a; ; i = (i + 1) % n) {
    out.push(i);
    if (i === b) break;
  }
  return out;
}

export function correspondSegments(
  prediction: Point[],
  segments: Point[][],
): Assignment[] {
  const n = prediction.length;
  const assigned = new Map<number, Point>();
  for (const seg of segments) {
    const a = nearestIndex(prediction, seg[0]);
    const b = nearestIndex(prediction, seg[seg.length - 1]);
    const candidates = a === b ? [[a]] : [arcIndices(a, b, n), arcIndices(b, a, n)];
    let bestArc: number[] | null = null;
    let bestKey: [number, number] = [Infinity, Infinity];
    for (const arc of candidates) {
      let total = 0;
      for (const idx of arc) {
        let min = Infinity;
        for (const p of seg) min = Math.min(min, dist(prediction[idx], p));
        total += min;
      }
      const key: [number, number] = [total / arc.length, arc.length];
      if (key[0] < bestKey[0] || (key[0] === bestKey[0] && key[1] < bestKey[1])) {
        bestKey = key;
        bestArc = arc;
      }
    }
    for (const idx of bestArc!) {
      if (!assigned.has(idx)) {
        const j = nearestIndex(seg, prediction[idx]);
        assigned.set(idx, seg[j]);
      }
    }
  }
  return [...assigned.entries()]
    .sort(([a], [b]) => a - b)
    .map(([vertexIndex, target]) => ({ vertexIndex, target }));
}
