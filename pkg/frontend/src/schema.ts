/** Correction JSON schema shared with the backend.
 *
 * The service persists corrections in a canonical serialized form (sorted
 * keys, no whitespace, floats always carrying a decimal point). `canonicalize`
 * reproduces that form byte-for-byte so the UI never invents a second format.
 */

export interface ContourJson {
  vertices: [number, number][];
  closed: boolean;
}

export interface CorrectionSetJson {
  image_id: string;
  segments: [number, number][][];
}

export class SchemaError extends Error {}

/** Float formatting matching the backend's serializer: integral values keep
 * a trailing ".0"; everything else uses the shortest round-trip decimal. */
export function formatFloat(x: number): string {
  if (!Number.isFinite(x)) throw new SchemaError(`non-finite coordinate ${x}`);
  if (Number.isInteger(x) && Math.abs(x) < 1e16) {
    return (Object.is(x, -0) ? 0 : x).toFixed(1);
  }
  return String(x);
}

export function validateCorrectionSet(obj: CorrectionSetJson): void {
  if (typeof obj.image_id !== "string" || !Array.isArray(obj.segments)) {
    throw new SchemaError("correction JSON needs image_id and segments");
  }
  for (const seg of obj.segments) {
    if (seg.length < 2) {
      throw new SchemaError("every segment needs at least 2 points");
    }
    for (const p of seg) {
      if (p.length !== 2 || !Number.isFinite(p[0]) || !Number.isFinite(p[1])) {
        throw new SchemaError("points must be finite [x, y] pairs");
      }
    }
  }
}

/** Serialize exactly as the backend does: sorted keys, "," / ":" separators. */
export function canonicalize(obj: CorrectionSetJson): string {
  validateCorrectionSet(obj);
  const segments = obj.segments
    .map((seg) =>
      "[" + seg.map(([x, y]) => `[${formatFloat(x)},${formatFloat(y)}]`).join(",") + "]")
    .join(",");
  return `{"image_id":${JSON.stringify(obj.image_id)},"segments":[${segments}]}`;
}
