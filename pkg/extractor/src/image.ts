/** Frame loading and resizing.
 *
 * Frames arrive as PNG files; we decode to planar RGB float32 scaled to
 * [-1, 1] (3 planes, row-major), the input space every backbone here
 * consumes. Resizing is separable bilinear with half-pixel centers.
 */

import * as fs from "node:fs";
import { PNG } from "pngjs";
import { FormatError } from "./errors";

export interface PlanarImage {
  channels: number;
  height: number;
  width: number;
  /** channel-major then row-major, values in [-1, 1] */
  data: Float32Array;
}

export function readFramePng(path: string): PlanarImage {
  let png: PNG;
  try {
    png = PNG.sync.read(fs.readFileSync(path));
  } catch (err) {
    throw new FormatError(`${path}: not a readable PNG (${(err as Error).message})`);
  }
  const { width, height, data } = png;
  const out = new Float32Array(3 * height * width);
  const plane = height * width;
  for (let i = 0; i < plane; i++) {
    out[i] = (data[4 * i] / 255) * 2 - 1;
    out[plane + i] = (data[4 * i + 1] / 255) * 2 - 1;
    out[2 * plane + i] = (data[4 * i + 2] / 255) * 2 - 1;
  }
  return { channels: 3, height, width, data: out };
}

/** Separable bilinear resample with half-pixel-aligned sample centers. */
export function resizeBilinear(img: PlanarImage, outH: number, outW: number): PlanarImage {
  if (outH === img.height && outW === img.width) {
    return { ...img, data: img.data.slice() };
  }
  const { channels, height, width } = img;
  const out = new Float32Array(channels * outH * outW);
  const scaleY = height / outH;
  const scaleX = width / outW;
  for (let c = 0; c < channels; c++) {
    const src = c * height * width;
    const dst = c * outH * outW;
    for (let y = 0; y < outH; y++) {
      const sy = Math.min(Math.max((y + 0.5) * scaleY - 0.5, 0), height - 1);
      const y0 = Math.floor(sy);
      const y1 = Math.min(y0 + 1, height - 1);
      const fy = sy - y0;
      for (let x = 0; x < outW; x++) {
        const sx = Math.min(Math.max((x + 0.5) * scaleX - 0.5, 0), width - 1);
        const x0 = Math.floor(sx);
        const x1 = Math.min(x0 + 1, width - 1);
        const fx = sx - x0;
        const top = img.data[src + y0 * width + x0] * (1 - fx) + img.data[src + y0 * width + x1] * fx;
        const bot = img.data[src + y1 * width + x0] * (1 - fx) + img.data[src + y1 * width + x1] * fx;
        out[dst + y * outW + x] = top * (1 - fy) + bot * fy;
      }
    }
  }
  return { channels, height: outH, width: outW, data: out };
}
