/** Shared test fixtures: deterministic PNG frames and scratch dirs. */

import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";
import { PNG } from "pngjs";

export function scratchDir(tag: string): string {
  return fs.mkdtempSync(path.join(os.tmpdir(), `xtr-${tag}-`));
}

/** Deterministic frame: gradients plus a bright block whose position
 * shifts with the variant, so different variants give different pixels. */
export function writeFramePng(
  file: string,
  width: number,
  height: number,
  variant: number
): void {
  const png = new PNG({ width, height });
  const bx = (variant * 7) % Math.max(width - 8, 1);
  const by = (variant * 5) % Math.max(height - 8, 1);
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      const i = (y * width + x) * 4;
      const inBlock = x >= bx && x < bx + 8 && y >= by && y < by + 8;
      png.data[i] = inBlock ? 250 : Math.floor((255 * x) / Math.max(width - 1, 1));
      png.data[i + 1] = inBlock ? 30 : Math.floor((255 * y) / Math.max(height - 1, 1));
      png.data[i + 2] = inBlock ? 30 : (17 * variant) % 256;
      png.data[i + 3] = 255;
    }
  }
  fs.writeFileSync(file, PNG.sync.write(png));
}

export function makeFramesDir(tag: string, frames: number, width = 96, height = 64): string {
  const dir = path.join(scratchDir(tag), "clip");
  fs.mkdirSync(dir, { recursive: true });
  for (let i = 1; i <= frames; i++) {
    writeFramePng(path.join(dir, `frame_${String(i).padStart(4, "0")}.png`), width, height, i);
  }
  return dir;
}

export function listFilesRecursive(root: string): string[] {
  const out: string[] = [];
  const walk = (dir: string): void => {
    for (const entry of fs.readdirSync(dir, { withFileTypes: true })) {
      const p = path.join(dir, entry.name);
      if (entry.isDirectory()) walk(p);
      else out.push(p);
    }
  };
  walk(root);
  return out.sort();
}
