/**
 * URL-fragment state: everything needed to reproduce a view.
 *
 * The fragment carries (image_id, family, params, seed); reloading a URL
 * therefore reproduces the identical preview (and hash), which is what
 * makes calibration sessions shareable.
 */

import type { Params } from "./schema.js";

export interface ViewState {
  imageId: string;
  family: string;
  params: Params;
  seed: number;
}

export function encodeFragment(state: ViewState): string {
  const payload = {
    i: state.imageId,
    f: state.family,
    s: state.seed,
    p: state.params,
  };
  return "#" + encodeURIComponent(JSON.stringify(payload));
}

export function decodeFragment(fragment: string): ViewState | null {
  const raw = fragment.startsWith("#") ? fragment.slice(1) : fragment;
  if (!raw) return null;
  try {
    const doc = JSON.parse(decodeURIComponent(raw));
    if (
      typeof doc.i !== "string" ||
      typeof doc.f !== "string" ||
      typeof doc.s !== "number" ||
      typeof doc.p !== "object" ||
      doc.p === null
    ) {
      return null;
    }
    return { imageId: doc.i, family: doc.f, seed: doc.s, params: doc.p };
  } catch {
    return null;
  }
}
