/**
 * Server-declared parameter schemas and the form model built from them.
 *
 * The UI never invents parameter structure: every control comes from
 * GET /api/families, and every outgoing value is clamped to the declared
 * range, so requests cannot leave the schema by construction.
 */

export type FieldKind = "float" | "int" | "rgb" | "range";

export interface FieldSchema {
  name: string;
  kind: FieldKind;
  min?: number;
  max?: number;
  step?: number;
  default: number | number[];
}

export interface FamilySchema {
  family: string;
  fields: FieldSchema[];
}

export type ParamValue = number | [number, number] | [number, number, number];
export type Params = Record<string, ParamValue>;

export function defaultParams(schema: FamilySchema): Params {
  const out: Params = {};
  for (const field of schema.fields) {
    out[field.name] = Array.isArray(field.default)
      ? ([...field.default] as ParamValue)
      : field.default;
  }
  return out;
}

function clampNumber(value: number, field: FieldSchema): number {
  let v = value;
  if (!Number.isFinite(v)) v = typeof field.default === "number" ? field.default : 0;
  if (field.min !== undefined) v = Math.max(field.min, v);
  if (field.max !== undefined) v = Math.min(field.max, v);
  if (field.kind === "int") v = Math.round(v);
  return v;
}

/** Force a single field's value into its declared range. */
export function clampValue(value: ParamValue, field: FieldSchema): ParamValue {
  if (field.kind === "rgb") {
    const rgb = (Array.isArray(value) ? value : [0, 0, 0]).slice(0, 3);
    while (rgb.length < 3) rgb.push(0);
    return rgb.map((c) => Math.min(255, Math.max(0, Math.round(Number(c) || 0)))) as [
      number,
      number,
      number,
    ];
  }
  if (field.kind === "range") {
    const pair = (Array.isArray(value) ? value : [0, 0]).slice(0, 2);
    while (pair.length < 2) pair.push(pair[0] ?? 0);
    let lo = clampNumber(Number(pair[0]), field);
    let hi = clampNumber(Number(pair[1]), field);
    if (lo > hi) [lo, hi] = [hi, lo];
    return [lo, hi];
  }
  return clampNumber(Number(value), field);
}

/** Clamp a whole parameter record; unknown keys are dropped. */
export function clampParams(params: Params, schema: FamilySchema): Params {
  const out: Params = {};
  for (const field of schema.fields) {
    const value = params[field.name];
    out[field.name] =
      value === undefined
        ? clampValue(
            Array.isArray(field.default)
              ? ([...field.default] as ParamValue)
              : field.default,
            field,
          )
        : clampValue(value, field);
  }
  return out;
}

export interface Violation {
  field: string;
  reason: string;
}

/** Check a record against the schema (the invariant the UI must uphold). */
export function validateParams(params: Params, schema: FamilySchema): Violation[] {
  const out: Violation[] = [];
  for (const field of schema.fields) {
    const value = params[field.name];
    if (value === undefined) {
      out.push({ field: field.name, reason: "missing" });
      continue;
    }
    if (field.kind === "rgb") {
      const ok =
        Array.isArray(value) &&
        value.length === 3 &&
        value.every((c) => Number.isInteger(c) && c >= 0 && c <= 255);
      if (!ok) out.push({ field: field.name, reason: "expected RGB triple 0..255" });
      continue;
    }
    if (field.kind === "range") {
      const ok =
        Array.isArray(value) &&
        value.length === 2 &&
        value[0] <= value[1] &&
        (field.min === undefined || value[0] >= field.min) &&
        (field.max === undefined || value[1] <= field.max);
      if (!ok) out.push({ field: field.name, reason: "expected [lo, hi] within range" });
      continue;
    }
    const v = value as number;
    if (typeof v !== "number" || !Number.isFinite(v)) {
      out.push({ field: field.name, reason: "expected a number" });
    } else if (field.min !== undefined && v < field.min) {
      out.push({ field: field.name, reason: `below minimum ${field.min}` });
    } else if (field.max !== undefined && v > field.max) {
      out.push({ field: field.name, reason: `above maximum ${field.max}` });
    } else if (field.kind === "int" && !Number.isInteger(v)) {
      out.push({ field: field.name, reason: "expected an integer" });
    }
  }
  const known = new Set(schema.fields.map((f) => f.name));
  for (const key of Object.keys(params)) {
    if (!known.has(key)) out.push({ field: key, reason: "unknown field" });
  }
  return out;
}

/** Identity-leaning values: zero where the range allows it, default otherwise. */
export function identityParams(schema: FamilySchema): Params {
  const out = defaultParams(schema);
  for (const field of schema.fields) {
    if (field.kind === "float" || field.kind === "int") {
      if ((field.min ?? 0) <= 0) out[field.name] = 0;
    }
  }
  return clampParams(out, schema);
}
