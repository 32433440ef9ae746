/**
 * Export pipeline: class-per-folder image tree -> GGFS embedding dataset.
 *
 * Per image: the full image, resized to the backbone's input resolution,
 * becomes the totality embedding; M seeded random-resized crops (area
 * fraction within the manifest's scale range, aspect ratio within its
 * ratio range) become the patch embeddings. Classes and images are walked
 * in sorted order and every crop stream is keyed by (seed, relative path,
 * patch index), so two exports with one seed are byte-identical.
 */

import { createHash } from "node:crypto";
import { readdirSync, readFileSync, statSync, writeFileSync } from "node:fs";
import { join } from "node:path";

import { Backbone, resolveBackbone } from "./backbone.js";
import { CropGeometry, randomResizedCrop } from "./crop.js";
import { crop, decodeImage, ImageDecodeError, resize, RgbImage } from "./image.js";
import { encodeGgfs, GgfsDataset, GgfsRecord } from "./ggfs.js";
import { Prng, streamKey } from "./prng.js";

export interface ExportManifest {
  splitDir: string;
  backbone: string;
  patches: number;
  scaleMin: number;
  scaleMax: number;
  ratioMin: number;
  ratioMax: number;
  seed: number;
}

export const MANIFEST_DEFAULTS = {
  backbone: "grid-stats-96",
  patches: 5,
  scaleMin: 0.08,
  scaleMax: 1.0,
  ratioMin: 3 / 4,
  ratioMax: 4 / 3,
  seed: 0,
};

export class ManifestError extends Error {}

export function validateManifest(manifest: ExportManifest): void {
  const { scaleMin, scaleMax, ratioMin, ratioMax, patches } = manifest;
  if (!(scaleMin > 0 && scaleMin <= scaleMax && scaleMax <= 1.0)) {
    throw new ManifestError(`scale range [${scaleMin}, ${scaleMax}] must lie in (0, 1]`);
  }
  if (!(ratioMin > 0 && ratioMin <= ratioMax)) {
    throw new ManifestError(`ratio range [${ratioMin}, ${ratioMax}] invalid`);
  }
  if (!(Number.isInteger(patches) && patches >= 1)) {
    throw new ManifestError(`patches must be an integer >= 1, got ${patches}`);
  }
  if (!Number.isInteger(manifest.seed)) {
    throw new ManifestError(`seed must be an integer, got ${manifest.seed}`);
  }
}

export interface CropLogEntry extends CropGeometry {
  image: string;
  patchIndex: number;
}

export interface ExportResult {
  dataset: GgfsDataset;
  ggfs: Buffer;
  manifestEcho: string;
  cropLog: CropLogEntry[];
  skipped: string[];
}

/** Stable JSON with sorted keys, so the manifest echo is reproducible. */
export function canonicalJson(value: unknown): string {
  const normalize = (v: unknown): unknown => {
    if (Array.isArray(v)) return v.map(normalize);
    if (v !== null && typeof v === "object") {
      return Object.fromEntries(
        Object.keys(v as Record<string, unknown>)
          .sort()
          .map((k) => [k, normalize((v as Record<string, unknown>)[k])]),
      );
    }
    return v;
  };
  return JSON.stringify(normalize(value));
}

function listClassDirs(root: string): string[] {
  const dirs = readdirSync(root)
    .filter((name) => statSync(join(root, name)).isDirectory())
    .sort();
  if (dirs.length === 0) throw new ManifestError(`no class directories under ${root}`);
  return dirs;
}

function listImages(dir: string): string[] {
  return readdirSync(dir)
    .filter((name) => /\.(png|ppm)$/i.test(name))
    .sort();
}

function embedVector(backbone: Backbone, img: RgbImage): Float32Array {
  return Float32Array.from(backbone.embed(resize(img, backbone.inputSize, backbone.inputSize)));
}

export function exportDataset(manifest: ExportManifest, log: (msg: string) => void = () => {}): ExportResult {
  validateManifest(manifest);
  const backbone = resolveBackbone(manifest.backbone);
  const classDirs = listClassDirs(manifest.splitDir);

  const records: GgfsRecord[] = [];
  const cropLog: CropLogEntry[] = [];
  const skipped: string[] = [];
  let recordId = 0;
  classDirs.forEach((className, classIndex) => {
    const dir = join(manifest.splitDir, className);
    const images = listImages(dir);
    if (images.length === 0) {
      throw new ManifestError(`class directory ${dir} contains no images`);
    }
    for (const filename of images) {
      const relPath = `${className}/${filename}`;
      let img: RgbImage;
      try {
        img = decodeImage(readFileSync(join(dir, filename)), filename);
      } catch (err) {
        if (err instanceof ImageDecodeError) {
          log(`skipping unreadable image ${relPath}: ${err.message}`);
          skipped.push(relPath);
          continue;
        }
        throw err;
      }
      const totality = embedVector(backbone, img);
      const patches: Float32Array[] = [];
      for (let p = 0; p < manifest.patches; p++) {
        const prng = new Prng(streamKey(manifest.seed, relPath, p));
        const geom = randomResizedCrop(img.width, img.height, prng, {
          scaleMin: manifest.scaleMin,
          scaleMax: manifest.scaleMax,
          ratioMin: manifest.ratioMin,
          ratioMax: manifest.ratioMax,
        });
        cropLog.push({ image: relPath, patchIndex: p, ...geom });
        patches.push(embedVector(backbone, crop(img, geom.x, geom.y, geom.width, geom.height)));
      }
      records.push({ recordId: recordId++, classIndex, totality, patches });
    }
  });

  const manifestBody = canonicalJson({
    backbone: backbone.id,
    inputSize: backbone.inputSize,
    dim: backbone.dim,
    patches: manifest.patches,
    scaleMin: manifest.scaleMin,
    scaleMax: manifest.scaleMax,
    ratioMin: manifest.ratioMin,
    ratioMax: manifest.ratioMax,
    seed: manifest.seed,
  });
  const manifestHash = createHash("sha256").update(manifestBody).digest("hex");
  const dataset: GgfsDataset = {
    dim: backbone.dim,
    classNames: classDirs,
    provenance: `${backbone.id}#${manifestHash.slice(0, 12)}`,
    records,
  };
  const manifestEcho = canonicalJson({
    manifest: JSON.parse(manifestBody),
    manifestHash,
    classes: classDirs,
    records: records.length,
    skipped,
  });
  return { dataset, ggfs: encodeGgfs(dataset), manifestEcho, cropLog, skipped };
}

export function writeExport(result: ExportResult, outPath: string): void {
  writeFileSync(outPath, result.ggfs);
  writeFileSync(outPath + ".manifest.json", result.manifestEcho + "\n");
  writeFileSync(
    outPath + ".crops.jsonl",
    result.cropLog.map((entry) => canonicalJson(entry)).join("\n") + "\n",
  );
}
