/**
 * Affine mapping between latent-plane coordinates and screen pixels.
 *
 * The experiment space is an axis-aligned rectangle in the 2-D latent
 * plane. On screen it is rendered into a fixed-size viewport with the
 * usual inversion: latent y grows upward, pixel y grows downward.
 */

export interface Bounds {
  xMin: number;
  xMax: number;
  yMin: number;
  yMax: number;
}

export interface Point {
  x: number;
  y: number;
}

export interface Pixel {
  px: number;
  py: number;
}

export interface Viewport {
  width: number;
  height: number;
}

/** Service payloads carry bounds as [xMin, xMax, yMin, yMax]. */
export function boundsFromArray(b: number[]): Bounds {
  if (b.length !== 4 || !(b[0] < b[1]) || !(b[2] < b[3])) {
    throw new Error(`degenerate bounds: ${JSON.stringify(b)}`);
  }
  return { xMin: b[0], xMax: b[1], yMin: b[2], yMax: b[3] };
}

export function toScreen(bounds: Bounds, vp: Viewport, pt: Point): Pixel {
  const fx = (pt.x - bounds.xMin) / (bounds.xMax - bounds.xMin);
  const fy = (pt.y - bounds.yMin) / (bounds.yMax - bounds.yMin);
  return { px: fx * vp.width, py: (1 - fy) * vp.height };
}

export function toLatent(bounds: Bounds, vp: Viewport, pixel: Pixel): Point {
  const fx = pixel.px / vp.width;
  const fy = 1 - pixel.py / vp.height;
  return {
    x: bounds.xMin + fx * (bounds.xMax - bounds.xMin),
    y: bounds.yMin + fy * (bounds.yMax - bounds.yMin),
  };
}

/** Clicks outside the rectangle snap to the nearest boundary point. */
export function clampToBounds(bounds: Bounds, pt: Point): Point {
  return {
    x: Math.min(bounds.xMax, Math.max(bounds.xMin, pt.x)),
    y: Math.min(bounds.yMax, Math.max(bounds.yMin, pt.y)),
  };
}

/**
 * Index of the nearest lattice sample; the lattice is bounds-inclusive
 * with `resolution` evenly spaced samples per axis.
 */
export function nearestLatticeIndex(
  bounds: Bounds,
  resolution: number,
  pt: Point,
): { xi: number; yi: number } {
  const clip = (v: number) =>
    Math.min(resolution - 1, Math.max(0, Math.round(v)));
  const xi = clip(
    ((pt.x - bounds.xMin) / (bounds.xMax - bounds.xMin)) * (resolution - 1),
  );
  const yi = clip(
    ((pt.y - bounds.yMin) / (bounds.yMax - bounds.yMin)) * (resolution - 1),
  );
  return { xi, yi };
}

export function latticePoint(
  bounds: Bounds,
  resolution: number,
  xi: number,
  yi: number,
): Point {
  return {
    x: bounds.xMin + (xi * (bounds.xMax - bounds.xMin)) / (resolution - 1),
    y: bounds.yMin + (yi * (bounds.yMax - bounds.yMin)) / (resolution - 1),
  };
}

/** One lattice step per axis, the tolerance unit for click placement. */
export function latticeStep(bounds: Bounds, resolution: number): Point {
  return {
    x: (bounds.xMax - bounds.xMin) / (resolution - 1),
    y: (bounds.yMax - bounds.yMin) / (resolution - 1),
  };
}
