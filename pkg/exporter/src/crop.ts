/**
 * Seeded random resized crop.
 *
 * Draws a target area fraction uniformly from the scale range and an
 * aspect ratio log-uniformly from the ratio range, then rounds to integer
 * pixels. A candidate is accepted only if its *rounded* area fraction
 * still lies in the scale range, so the logged geometry always satisfies
 * the manifest. Falls back to a centered square crop.
 */

import { Prng } from "./prng.js";

export interface CropGeometry {
  x: number;
  y: number;
  width: number;
  height: number;
  areaFraction: number;
}

export interface CropOptions {
  scaleMin: number;
  scaleMax: number;
  ratioMin: number;
  ratioMax: number;
  attempts?: number;
}

const EPS = 1e-9;

function fractionOf(w: number, h: number, imgW: number, imgH: number): number {
  return (w * h) / (imgW * imgH);
}

export function randomResizedCrop(
  imgW: number,
  imgH: number,
  prng: Prng,
  opts: CropOptions,
): CropGeometry {
  const attempts = opts.attempts ?? 10;
  const area = imgW * imgH;
  for (let i = 0; i < attempts; i++) {
    const targetArea = prng.uniform(opts.scaleMin, opts.scaleMax) * area;
    const ratio = Math.exp(prng.uniform(Math.log(opts.ratioMin), Math.log(opts.ratioMax)));
    const w = Math.round(Math.sqrt(targetArea * ratio));
    const h = Math.round(Math.sqrt(targetArea / ratio));
    if (w < 1 || h < 1 || w > imgW || h > imgH) continue;
    const frac = fractionOf(w, h, imgW, imgH);
    if (frac < opts.scaleMin - EPS || frac > opts.scaleMax + EPS) continue;
    const x = prng.int(imgW - w + 1);
    const y = prng.int(imgH - h + 1);
    return { x, y, width: w, height: h, areaFraction: frac };
  }
  // Centered square fallback; try the rounding neighborhood of the
  // range's midpoint until one lands inside it.
  const mid = Math.sqrt(((opts.scaleMin + opts.scaleMax) / 2) * area);
  for (const side of [Math.round(mid), Math.floor(mid), Math.ceil(mid)]) {
    const s = Math.min(Math.max(side, 1), Math.min(imgW, imgH));
    const frac = fractionOf(s, s, imgW, imgH);
    if (frac >= opts.scaleMin - EPS && frac <= opts.scaleMax + EPS) {
      return {
        x: Math.floor((imgW - s) / 2),
        y: Math.floor((imgH - s) / 2),
        width: s,
        height: s,
        areaFraction: frac,
      };
    }
  }
  throw new RangeError(
    `no integer crop of ${imgW}x${imgH} satisfies scale range ` +
      `[${opts.scaleMin}, ${opts.scaleMax}]`,
  );
}
