// Coordinate mapping between the displayed canvas and normalized prompt
// space. Prompts travel as fractions of the native frame, so a click on the
// same image feature must produce the same fraction at any zoom level.

export interface DisplayGeometry {
  displayWidth: number;
  displayHeight: number;
  nativeWidth: number;
  nativeHeight: number;
}

export interface NormalizedXY {
  x: number;
  y: number;
}

function clamp01(v: number): number {
  return Math.min(1, Math.max(0, v));
}

/** Display-space click position (CSS pixels relative to the canvas) to a
 * normalized fraction. Independent of zoom: only the ratio to the displayed
 * size matters. */
export function toNormalized(
  clickX: number,
  clickY: number,
  geometry: DisplayGeometry,
): NormalizedXY {
  return {
    x: clamp01(clickX / geometry.displayWidth),
    y: clamp01(clickY / geometry.displayHeight),
  };
}

/** The native pixel a normalized coordinate lands on; mirrors the server's
 * floor(fraction * size) conversion so client-side markers line up with the
 * mask the service returns. */
export function toNativePixel(fraction: number, nativeSize: number): number {
  return Math.min(nativeSize - 1, Math.floor(fraction * nativeSize));
}

/** Center of a native pixel in display space, for drawing markers. */
export function nativePixelToDisplay(
  pixel: number,
  nativeSize: number,
  displaySize: number,
): number {
  return ((pixel + 0.5) / nativeSize) * displaySize;
}

/** Normalized box from a drag gesture, corners sorted so x0 < x1, y0 < y1. */
export function dragToBox(
  start: NormalizedXY,
  end: NormalizedXY,
): { x0: number; y0: number; x1: number; y1: number } {
  return {
    x0: Math.min(start.x, end.x),
    y0: Math.min(start.y, end.y),
    x1: Math.max(start.x, end.x),
    y1: Math.max(start.y, end.y),
  };
}
