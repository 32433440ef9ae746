import { spawnSync } from "node:child_process";
import { mkdirSync, mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";

import { decodeGgfs } from "../src/ggfs.js";
import { exportDataset, MANIFEST_DEFAULTS, ManifestError, writeExport } from "../src/export.js";
import { writeToyTree } from "./helpers.js";

const PYTHON = process.env.PYTHON ?? "python3";
const TEST_DIR = dirname(fileURLToPath(import.meta.url));
const CLI_PATH = join(TEST_DIR, "..", "dist", "cli.js");

function tempDir(): string {
  return mkdtempSync(join(tmpdir(), "ggfs-exporter-"));
}

function manifestFor(splitDir: string, overrides: Partial<typeof MANIFEST_DEFAULTS> = {}) {
  return { splitDir, ...MANIFEST_DEFAULTS, ...overrides };
}

describe("exportDataset", () => {
  it("exports a 3-class toy tree that passes the engine's validate command", () => {
    const root = writeToyTree(join(tempDir(), "toy"), { mixPpm: true });
    const out = join(tempDir(), "toy.ggfs");
    const result = exportDataset(manifestFor(root, { patches: 5, seed: 11 }));
    writeExport(result, out);

    expect(result.dataset.records.length).toBe(30);
    expect(result.dataset.classNames).toEqual(["class_0", "class_1", "class_2"]);

    const validate = spawnSync(PYTHON, ["-m", "gestalteval", "validate", "--dataset", out], {
      encoding: "utf-8",
    });
    expect(validate.stderr).toBe("");
    expect(validate.status).toBe(0);
    const summary = JSON.parse(validate.stdout);
    expect(summary.valid).toBe(true);
    expect(summary.records).toBe(30);
    expect(summary.classes).toBe(3);
    expect(summary.min_patches).toBe(5);
    expect(summary.max_patches).toBe(5);
  });

  it("is byte-identical across runs with one seed", () => {
    const root = writeToyTree(join(tempDir(), "toy"));
    const a = exportDataset(manifestFor(root, { seed: 7 }));
    const b = exportDataset(manifestFor(root, { seed: 7 }));
    expect(a.ggfs.equals(b.ggfs)).toBe(true);
    expect(a.manifestEcho).toBe(b.manifestEcho);
    const c = exportDataset(manifestFor(root, { seed: 8 }));
    expect(a.ggfs.equals(c.ggfs)).toBe(false);
  });

  it("degenerate full-image crop reproduces the totality embedding", () => {
    const root = writeToyTree(join(tempDir(), "toy"), { classes: 2, imagesPerClass: 3 });
    const result = exportDataset(
      manifestFor(root, { patches: 1, scaleMin: 1.0, scaleMax: 1.0, ratioMin: 1.0, ratioMax: 1.0 }),
    );
    for (const rec of result.dataset.records) {
      expect(rec.patches.length).toBe(1);
      expect(Array.from(rec.patches[0])).toEqual(Array.from(rec.totality));
    }
    for (const entry of result.cropLog) {
      expect(entry.areaFraction).toBe(1.0);
    }
  });

  it("keeps every crop's area fraction within the manifest scale range", () => {
    const root = writeToyTree(join(tempDir(), "toy"), { width: 48, height: 80 });
    const manifest = manifestFor(root, { patches: 8, scaleMin: 0.08, scaleMax: 1.0, seed: 3 });
    const result = exportDataset(manifest);
    expect(result.cropLog.length).toBe(30 * 8);
    for (const entry of result.cropLog) {
      expect(entry.areaFraction).toBeGreaterThanOrEqual(manifest.scaleMin - 1e-9);
      expect(entry.areaFraction).toBeLessThanOrEqual(manifest.scaleMax + 1e-9);
      expect(entry.x).toBeGreaterThanOrEqual(0);
      expect(entry.y).toBeGreaterThanOrEqual(0);
      expect(entry.x + entry.width).toBeLessThanOrEqual(48);
      expect(entry.y + entry.height).toBeLessThanOrEqual(80);
    }
  });

  it("round-trips through its own decoder", () => {
    const root = writeToyTree(join(tempDir(), "toy"), { classes: 2, imagesPerClass: 2 });
    const result = exportDataset(manifestFor(root, { patches: 2 }));
    const back = decodeGgfs(result.ggfs);
    expect(back.dim).toBe(96);
    expect(back.classNames).toEqual(result.dataset.classNames);
    expect(back.provenance).toBe(result.dataset.provenance);
    expect(back.records.length).toBe(result.dataset.records.length);
    expect(Array.from(back.records[3].totality)).toEqual(
      Array.from(result.dataset.records[3].totality),
    );
  });

  it("names the backbone and manifest hash in the provenance", () => {
    const root = writeToyTree(join(tempDir(), "toy"), { classes: 2, imagesPerClass: 2 });
    const result = exportDataset(manifestFor(root));
    expect(result.dataset.provenance).toMatch(/^grid-stats-96#[0-9a-f]{12}$/);
  });

  it("skips unreadable images with a log entry", () => {
    const root = writeToyTree(join(tempDir(), "toy"), { classes: 2, imagesPerClass: 3 });
    writeFileSync(join(root, "class_0", "img_99.png"), Buffer.from("not a png"));
    const logs: string[] = [];
    const result = exportDataset(manifestFor(root), (msg) => logs.push(msg));
    expect(result.dataset.records.length).toBe(6);
    expect(result.skipped).toEqual(["class_0/img_99.png"]);
    expect(logs.some((m) => m.includes("img_99.png"))).toBe(true);
  });

  it("treats an empty class directory as fatal", () => {
    const root = writeToyTree(join(tempDir(), "toy"), { classes: 2, imagesPerClass: 2 });
    mkdirSync(join(root, "class_zz"), { recursive: true });
    expect(() => exportDataset(manifestFor(root))).toThrow(/no images/);
  });

  it("rejects bad manifests", () => {
    const root = writeToyTree(join(tempDir(), "toy"), { classes: 2, imagesPerClass: 2 });
    expect(() => exportDataset(manifestFor(root, { scaleMin: 0.0 }))).toThrow(ManifestError);
    expect(() => exportDataset(manifestFor(root, { scaleMax: 1.5 }))).toThrow(ManifestError);
    expect(() => exportDataset(manifestFor(root, { patches: 0 }))).toThrow(ManifestError);
  });
});

describe("CLI", () => {
  it("exports via the command line and reports a summary", () => {
    const root = writeToyTree(join(tempDir(), "toy"), { classes: 2, imagesPerClass: 3 });
    const out = join(tempDir(), "cli.ggfs");
    const run = spawnSync(
      "node",
      [CLI_PATH, "--dir", root, "--out", out, "--patches", "4", "--seed", "2"],
      { encoding: "utf-8" },
    );
    expect(run.status).toBe(0);
    const summary = JSON.parse(run.stdout);
    expect(summary.records).toBe(6);
    expect(summary.dim).toBe(96);
    expect(readFileSync(out).subarray(0, 4).toString("ascii")).toBe("GGFS");
    expect(JSON.parse(readFileSync(out + ".manifest.json", "utf-8")).manifest.patches).toBe(4);
  });

  it("exits 2 on bad flags and 3 on a missing directory", () => {
    expect(spawnSync("node", [CLI_PATH, "--out"], { encoding: "utf-8" }).status).toBe(2);
    const missing = spawnSync(
      "node",
      [CLI_PATH, "--dir", "/nonexistent-tree", "--out", join(tempDir(), "x.ggfs")],
      { encoding: "utf-8" },
    );
    expect(missing.status).toBe(3);
  });
});
