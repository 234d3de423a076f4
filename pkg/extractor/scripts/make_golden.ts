/** Regenerate the committed golden contract files under golden/.
 *
 * Five pattern feature maps and three pattern masks come straight from
 * the closed-form definitions in src/golden.ts; two more feature maps
 * are produced by the real extract pipeline on a synthetic frame. The
 * index records shapes, patterns, and payload hashes for all ten.
 */

import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";
import { PNG } from "pngjs";

import { runExtract } from "../src/extract";
import { readFmap, writeFmap } from "../src/fmap";
import {
  GOLDEN_FMAP_PATTERNS,
  GOLDEN_MASK_DEFS,
  sha256Hex,
  synthesizeFloats,
  synthesizeLabels,
} from "../src/golden";
import { stableJson } from "../src/manifest";
import { writeMsk1 } from "../src/msk1";

const FMAP_HEADER = 20;
const MSK1_HEADER = 16;

function payloadSha(file: string, headerBytes: number): string {
  const raw = fs.readFileSync(file);
  return sha256Hex(raw.subarray(headerBytes));
}

/** Deterministic little test frame: two gradients and a bright block. */
function writeTestFrame(file: string, width: number, height: number): void {
  const png = new PNG({ width, height });
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      const i = (y * width + x) * 4;
      const inBlock = y >= height / 4 && y < height / 2 && x >= width / 3 && x < (2 * width) / 3;
      png.data[i] = inBlock ? 240 : Math.floor((255 * x) / Math.max(width - 1, 1));
      png.data[i + 1] = inBlock ? 40 : Math.floor((255 * y) / Math.max(height - 1, 1));
      png.data[i + 2] = inBlock ? 40 : 128;
      png.data[i + 3] = 255;
    }
  }
  fs.writeFileSync(file, PNG.sync.write(png));
}

function main(): void {
  const goldenDir = path.join(__dirname, "..", "..", "golden");
  fs.mkdirSync(goldenDir, { recursive: true });
  const index: Record<string, unknown>[] = [];

  for (const def of GOLDEN_FMAP_PATTERNS) {
    const [c, h, w] = def.shape;
    const data = synthesizeFloats(def.pattern!, c * h * w);
    const file = path.join(goldenDir, def.file);
    writeFmap({ channels: c, height: h, width: w, data }, file);
    index.push({ ...def, payload_sha256: payloadSha(file, FMAP_HEADER) });
  }

  // pipeline-produced feature maps on a deterministic synthetic frame
  const work = fs.mkdtempSync(path.join(os.tmpdir(), "golden-"));
  const framesDir = path.join(work, "clip");
  fs.mkdirSync(framesDir);
  writeTestFrame(path.join(framesDir, "frame_0001.png"), 96, 64);

  const pipeline: { file: string; model: string; layer: number; timestep: number }[] = [
    { file: "g06_adm_pipeline.fmap", model: "adm", layer: 3, timestep: 100 },
    { file: "g07_dino_pipeline.fmap", model: "dino", layer: 12, timestep: 0 },
  ];
  for (const job of pipeline) {
    const out = path.join(work, `out_${job.model}`);
    runExtract(
      { model: job.model, layers: [job.layer], timesteps: [job.timestep], seed: 11, prompt: "" },
      framesDir,
      out
    );
    const produced = path.join(
      out,
      "feats",
      "clip",
      `frame_0001_L${job.layer}_T${job.timestep}.fmap`
    );
    const dest = path.join(goldenDir, job.file);
    fs.copyFileSync(produced, dest);
    const fm = readFmap(dest);
    index.push({
      file: job.file,
      kind: "fmap",
      shape: [fm.channels, fm.height, fm.width],
      pattern: null,
      source: "extract",
      model: job.model,
      layer: job.layer,
      timestep: job.timestep,
      payload_sha256: payloadSha(dest, FMAP_HEADER),
    });
  }
  fs.rmSync(work, { recursive: true, force: true });

  for (const def of GOLDEN_MASK_DEFS) {
    const [h, w] = def.shape;
    const labels = synthesizeLabels(def.pattern, h * w, def.objs);
    const file = path.join(goldenDir, def.file);
    writeMsk1({ objs: def.objs, height: h, width: w, labels }, file);
    index.push({ ...def, payload_sha256: payloadSha(file, MSK1_HEADER) });
  }

  index.sort((a, b) => String(a.file).localeCompare(String(b.file)));
  fs.writeFileSync(path.join(goldenDir, "index.json"), stableJson(index));
  process.stdout.write(`wrote ${index.length} golden files to ${goldenDir}\n`);
}

main();
