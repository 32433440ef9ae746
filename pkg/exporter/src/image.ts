/**
 * Minimal RGB image handling: PNG and PPM (P6) decoding, crop, bilinear
 * resize. Pixels are float64 in [0, 1], row-major RGB triplets.
 */

import { PNG } from "pngjs";

export interface RgbImage {
  width: number;
  height: number;
  /** length = width * height * 3 */
  data: Float64Array;
}

export class ImageDecodeError extends Error {}

export function decodePng(buffer: Buffer): RgbImage {
  let png: PNG;
  try {
    png = PNG.sync.read(buffer);
  } catch (err) {
    throw new ImageDecodeError(`PNG decode failed: ${(err as Error).message}`);
  }
  const data = new Float64Array(png.width * png.height * 3);
  for (let i = 0; i < png.width * png.height; i++) {
    data[i * 3] = png.data[i * 4] / 255;
    data[i * 3 + 1] = png.data[i * 4 + 1] / 255;
    data[i * 3 + 2] = png.data[i * 4 + 2] / 255;
  }
  return { width: png.width, height: png.height, data };
}

export function decodePpm(buffer: Buffer): RgbImage {
  // P6 whitespace-delimited header: magic, width, height, maxval.
  let pos = 0;
  const token = (): string => {
    while (pos < buffer.length && /\s/.test(String.fromCharCode(buffer[pos]))) pos++;
    if (pos < buffer.length && String.fromCharCode(buffer[pos]) === "#") {
      while (pos < buffer.length && buffer[pos] !== 0x0a) pos++;
      return token();
    }
    const start = pos;
    while (pos < buffer.length && !/\s/.test(String.fromCharCode(buffer[pos]))) pos++;
    return buffer.subarray(start, pos).toString("ascii");
  };
  if (token() !== "P6") throw new ImageDecodeError("not a P6 PPM");
  const width = parseInt(token(), 10);
  const height = parseInt(token(), 10);
  const maxval = parseInt(token(), 10);
  if (!(width > 0 && height > 0 && maxval > 0 && maxval < 65536)) {
    throw new ImageDecodeError("bad PPM header");
  }
  pos++; // single whitespace after maxval
  const n = width * height * 3;
  if (buffer.length - pos < n) throw new ImageDecodeError("truncated PPM payload");
  const data = new Float64Array(n);
  for (let i = 0; i < n; i++) data[i] = buffer[pos + i] / maxval;
  return { width, height, data };
}

export function decodeImage(buffer: Buffer, filename: string): RgbImage {
  if (filename.toLowerCase().endsWith(".png")) return decodePng(buffer);
  if (filename.toLowerCase().endsWith(".ppm")) return decodePpm(buffer);
  throw new ImageDecodeError(`unsupported image type: ${filename}`);
}

export function crop(img: RgbImage, x: number, y: number, w: number, h: number): RgbImage {
  if (x < 0 || y < 0 || w < 1 || h < 1 || x + w > img.width || y + h > img.height) {
    throw new RangeError(`crop ${x},${y},${w}x${h} outside ${img.width}x${img.height}`);
  }
  const data = new Float64Array(w * h * 3);
  for (let row = 0; row < h; row++) {
    const src = ((y + row) * img.width + x) * 3;
    data.set(img.data.subarray(src, src + w * 3), row * w * 3);
  }
  return { width: w, height: h, data };
}

/** Bilinear resize with pixel-center alignment. */
export function resize(img: RgbImage, width: number, height: number): RgbImage {
  if (img.width === width && img.height === height) {
    return { width, height, data: img.data.slice() };
  }
  const data = new Float64Array(width * height * 3);
  const sx = img.width / width;
  const sy = img.height / height;
  for (let oy = 0; oy < height; oy++) {
    const fy = Math.min(Math.max((oy + 0.5) * sy - 0.5, 0), img.height - 1);
    const y0 = Math.floor(fy);
    const y1 = Math.min(y0 + 1, img.height - 1);
    const wy = fy - y0;
    for (let ox = 0; ox < width; ox++) {
      const fx = Math.min(Math.max((ox + 0.5) * sx - 0.5, 0), img.width - 1);
      const x0 = Math.floor(fx);
      const x1 = Math.min(x0 + 1, img.width - 1);
      const wx = fx - x0;
      for (let ch = 0; ch < 3; ch++) {
        const p00 = img.data[(y0 * img.width + x0) * 3 + ch];
        const p01 = img.data[(y0 * img.width + x1) * 3 + ch];
        const p10 = img.data[(y1 * img.width + x0) * 3 + ch];
        const p11 = img.data[(y1 * img.width + x1) * 3 + ch];
        const top = p00 + (p01 - p00) * wx;
        const bottom = p10 + (p11 - p10) * wx;
        data[(oy * width + ox) * 3 + ch] = top + (bottom - top) * wy;
      }
    }
  }
  return { width, height, data };
}
