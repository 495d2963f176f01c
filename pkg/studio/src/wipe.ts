/**
 * Wipe-compare math: the divider position decides how much of the
 * augmented preview covers the original. Pure functions here; the DOM
 * binding lives in main.ts.
 */

export function clampPercent(value: number): number {
  return Math.min(100, Math.max(0, value));
}

/** Pointer x within a bounding box -> divider percentage. */
export function positionFromPointer(
  clientX: number,
  rectLeft: number,
  rectWidth: number,
): number {
  if (rectWidth <= 0) return 50;
  return clampPercent(((clientX - rectLeft) / rectWidth) * 100);
}

/** CSS clip-path for the overlay layer at a divider percentage. */
export function overlayClip(percent: number): string {
  return `inset(0 ${clampPercent(100 - percent)}% 0 0)`;
}
