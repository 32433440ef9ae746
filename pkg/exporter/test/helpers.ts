/** Toy image generation for exporter tests. */

import { mkdirSync, writeFileSync } from "node:fs";
import { join } from "node:path";
import { PNG } from "pngjs";

import { Prng } from "../src/prng.js";

export type PixelFn = (x: number, y: number) => [number, number, number];

export function encodePng(width: number, height: number, pixel: PixelFn): Buffer {
  const png = new PNG({ width, height });
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      const [r, g, b] = pixel(x, y);
      const i = (y * width + x) * 4;
      png.data[i] = r;
      png.data[i + 1] = g;
      png.data[i + 2] = b;
      png.data[i + 3] = 255;
    }
  }
  return PNG.sync.write(png);
}

export function encodePpm(width: number, height: number, pixel: PixelFn): Buffer {
  const header = Buffer.from(`P6\n${width} ${height}\n255\n`, "ascii");
  const body = Buffer.alloc(width * height * 3);
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      const [r, g, b] = pixel(x, y);
      const i = (y * width + x) * 3;
      body[i] = r;
      body[i + 1] = g;
      body[i + 2] = b;
    }
  }
  return Buffer.concat([header, body]);
}

/** Class-dependent textured pixels so embeddings separate by class. */
export function classPixelFn(classIndex: number, imageIndex: number): PixelFn {
  const prng = new Prng(`texture:${classIndex}:${imageIndex}`);
  const baseR = 40 + 60 * classIndex;
  const baseG = 220 - 50 * classIndex;
  const phase = prng.uniform(0, Math.PI);
  return (x, y) => {
    const wave = Math.sin((x + y) / (2 + classIndex) + phase) * 40;
    const noise = prng.uniform(-15, 15);
    return [
      Math.max(0, Math.min(255, Math.round(baseR + wave + noise))),
      Math.max(0, Math.min(255, Math.round(baseG - wave + noise))),
      Math.max(0, Math.min(255, Math.round(128 + 30 * classIndex - wave))),
    ];
  };
}

export interface ToyTreeOptions {
  classes?: number;
  imagesPerClass?: number;
  width?: number;
  height?: number;
  mixPpm?: boolean;
}

export function writeToyTree(root: string, opts: ToyTreeOptions = {}): string {
  const { classes = 3, imagesPerClass = 10, width = 64, height = 64, mixPpm = false } = opts;
  for (let c = 0; c < classes; c++) {
    const dir = join(root, `class_${c}`);
    mkdirSync(dir, { recursive: true });
    for (let i = 0; i < imagesPerClass; i++) {
      const pixel = classPixelFn(c, i);
      if (mixPpm && i % 3 === 0) {
        writeFileSync(join(dir, `img_${String(i).padStart(2, "0")}.ppm`), encodePpm(width, height, pixel));
      } else {
        writeFileSync(join(dir, `img_${String(i).padStart(2, "0")}.png`), encodePng(width, height, pixel));
      }
    }
  }
  return root;
}
