/**
 * Embedding backbones.
 *
 * A backbone turns an image already resized to its input resolution into
 * a fixed-length feature vector. The built-in grid-statistics backbone is
 * fully deterministic and dependency-free: per-channel mean and standard
 * deviation over a 4x4 spatial grid (96 dimensions). Heavier user-supplied
 * models plug in through the same interface.
 */

import { RgbImage } from "./image.js";

export interface Backbone {
  id: string;
  inputSize: number;
  dim: number;
  embed(img: RgbImage): Float64Array;
}

export class GridStatsBackbone implements Backbone {
  readonly id: string;
  readonly inputSize: number;
  readonly grid: number;
  readonly dim: number;

  constructor(inputSize = 64, grid = 4) {
    this.inputSize = inputSize;
    this.grid = grid;
    this.dim = grid * grid * 3 * 2;
    this.id = `grid-stats-${this.dim}`;
  }

  embed(img: RgbImage): Float64Array {
    if (img.width !== this.inputSize || img.height !== this.inputSize) {
      throw new RangeError(
        `backbone expects ${this.inputSize}x${this.inputSize}, got ${img.width}x${img.height}`,
      );
    }
    const cell = this.inputSize / this.grid;
    const out = new Float64Array(this.dim);
    let k = 0;
    for (let gy = 0; gy < this.grid; gy++) {
      for (let gx = 0; gx < this.grid; gx++) {
        for (let ch = 0; ch < 3; ch++) {
          let sum = 0;
          let sumSq = 0;
          let count = 0;
          const y0 = Math.floor(gy * cell);
          const y1 = Math.floor((gy + 1) * cell);
          const x0 = Math.floor(gx * cell);
          const x1 = Math.floor((gx + 1) * cell);
          for (let y = y0; y < y1; y++) {
            for (let x = x0; x < x1; x++) {
              const v = img.data[(y * img.width + x) * 3 + ch];
              sum += v;
              sumSq += v * v;
              count++;
            }
          }
          const mean = sum / count;
          const variance = Math.max(sumSq / count - mean * mean, 0);
          out[k++] = mean;
          out[k++] = Math.sqrt(variance);
        }
      }
    }
    return out;
  }
}

const REGISTRY: Record<string, () => Backbone> = {
  "grid-stats-96": () => new GridStatsBackbone(64, 4),
};

export function resolveBackbone(id: string): Backbone {
  const factory = REGISTRY[id];
  if (!factory) {
    throw new RangeError(
      `unknown backbone ${JSON.stringify(id)}; available: ${Object.keys(REGISTRY).join(", ")}`,
    );
  }
  return factory();
}
