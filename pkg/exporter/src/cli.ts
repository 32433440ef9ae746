#!/usr/bin/env node
/**
 * ggfs-export: embed a class-per-folder image tree into a GGFS dataset.
 *
 *   ggfs-export --dir DATASET_DIR --out FILE.ggfs [--patches 5] [--seed 0]
 *               [--scale-min 0.08] [--scale-max 1.0]
 *               [--ratio-min 0.75] [--ratio-max 1.3333]
 *               [--backbone grid-stats-96]
 *
 * Writes FILE.ggfs plus FILE.ggfs.manifest.json (the manifest echo) and
 * FILE.ggfs.crops.jsonl (per-patch crop geometry). Exit codes mirror the
 * evaluation engine: 0 success, 2 configuration error, 3 data error.
 */

import { ManifestError, MANIFEST_DEFAULTS, exportDataset, writeExport } from "./export.js";
import { ImageDecodeError } from "./image.js";

function parseArgs(argv: string[]): Record<string, string> {
  const out: Record<string, string> = {};
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i];
    if (!key.startsWith("--") || i + 1 >= argv.length) {
      throw new ManifestError(`bad argument ${key}`);
    }
    out[key.slice(2)] = argv[i + 1];
  }
  return out;
}

function main(): number {
  let args: Record<string, string>;
  try {
    args = parseArgs(process.argv.slice(2));
    if (!args.dir || !args.out) throw new ManifestError("--dir and --out are required");
  } catch (err) {
    console.error(`configuration error: ${(err as Error).message}`);
    return 2;
  }

  try {
    const result = exportDataset(
      {
        splitDir: args.dir,
        backbone: args.backbone ?? MANIFEST_DEFAULTS.backbone,
        patches: args.patches ? parseInt(args.patches, 10) : MANIFEST_DEFAULTS.patches,
        scaleMin: args["scale-min"] ? parseFloat(args["scale-min"]) : MANIFEST_DEFAULTS.scaleMin,
        scaleMax: args["scale-max"] ? parseFloat(args["scale-max"]) : MANIFEST_DEFAULTS.scaleMax,
        ratioMin: args["ratio-min"] ? parseFloat(args["ratio-min"]) : MANIFEST_DEFAULTS.ratioMin,
        ratioMax: args["ratio-max"] ? parseFloat(args["ratio-max"]) : MANIFEST_DEFAULTS.ratioMax,
        seed: args.seed ? parseInt(args.seed, 10) : MANIFEST_DEFAULTS.seed,
      },
      (msg) => console.error(msg),
    );
    writeExport(result, args.out);
    console.log(
      JSON.stringify({
        out: args.out,
        records: result.dataset.records.length,
        classes: result.dataset.classNames.length,
        dim: result.dataset.dim,
        provenance: result.dataset.provenance,
        skipped: result.skipped.length,
      }),
    );
    return 0;
  } catch (err) {
    if (err instanceof ManifestError || err instanceof RangeError) {
      console.error(`configuration error: ${(err as Error).message}`);
      return 2;
    }
    if (err instanceof ImageDecodeError || (err as NodeJS.ErrnoException).code === "ENOENT") {
      console.error(`data error: ${(err as Error).message}`);
      return 3;
    }
    throw err;
  }
}

process.exit(main());
