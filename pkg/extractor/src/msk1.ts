/** MSK1 binary mask files: hard per-pixel object labels.
 *
 * Layout (little-endian): 4-byte magic "MSK1", u16 version, u8 dtype
 * (0 = uint8), u8 object count, u32 H, u32 W, then H*W uint8 labels
 * (0 = background, 1..objs = object ids). 16-byte header total.
 */

import * as fs from "node:fs";
import { FormatError, ValidationError } from "./errors";

export const MSK1_MAGIC = "MSK1";
export const MSK1_VERSION = 1;
const HEADER_BYTES = 16;

export interface Msk1 {
  objs: number;
  height: number;
  width: number;
  /** length height * width, row-major labels in 0..objs */
  labels: Uint8Array;
}

export function encodeMsk1(mask: Msk1): Buffer {
  if (!Number.isInteger(mask.objs) || mask.objs < 0 || mask.objs > 255) {
    throw new ValidationError(`objs must be in 0..255, got ${mask.objs}`);
  }
  for (const [name, v] of [
    ["height", mask.height],
    ["width", mask.width],
  ] as const) {
    if (!Number.isInteger(v) || v < 1) {
      throw new ValidationError(`${name} must be a positive integer, got ${v}`);
    }
  }
  const count = mask.height * mask.width;
  if (mask.labels.length !== count) {
    throw new ValidationError(`payload has ${mask.labels.length} labels, shape needs ${count}`);
  }
  for (let i = 0; i < count; i++) {
    if (mask.labels[i] > mask.objs) {
      throw new ValidationError(
        `label ${mask.labels[i]} at ${i} exceeds declared object count ${mask.objs}`
      );
    }
  }
  const buf = Buffer.alloc(HEADER_BYTES + count);
  buf.write(MSK1_MAGIC, 0, "ascii");
  buf.writeUInt16LE(MSK1_VERSION, 4);
  buf.writeUInt8(0, 6); // dtype: uint8 labels
  buf.writeUInt8(mask.objs, 7);
  buf.writeUInt32LE(mask.height, 8);
  buf.writeUInt32LE(mask.width, 12);
  Buffer.from(mask.labels.buffer, mask.labels.byteOffset, count).copy(buf, HEADER_BYTES);
  return buf;
}

export function writeMsk1(mask: Msk1, path: string): void {
  fs.writeFileSync(path, encodeMsk1(mask));
}

export function readMsk1(path: string): Msk1 {
  const raw = fs.readFileSync(path);
  if (raw.length < HEADER_BYTES) {
    throw new FormatError(`${path}: file shorter than MSK1 header`);
  }
  const magic = raw.toString("ascii", 0, 4);
  if (magic !== MSK1_MAGIC) {
    throw new FormatError(`${path}: bad magic ${JSON.stringify(magic)}`);
  }
  const version = raw.readUInt16LE(4);
  if (version !== MSK1_VERSION) {
    throw new FormatError(`${path}: unsupported MSK1 version ${version}`);
  }
  const dtype = raw.readUInt8(6);
  if (dtype !== 0) {
    throw new FormatError(`${path}: unsupported dtype code ${dtype}`);
  }
  const objs = raw.readUInt8(7);
  const height = raw.readUInt32LE(8);
  const width = raw.readUInt32LE(12);
  const count = height * width;
  if (raw.length - HEADER_BYTES !== count) {
    throw new FormatError(
      `${path}: payload length mismatch, expected ${count} bytes, got ${raw.length - HEADER_BYTES}`
    );
  }
  const labels = new Uint8Array(raw.buffer, raw.byteOffset + HEADER_BYTES, count).slice();
  for (let i = 0; i < count; i++) {
    if (labels[i] > objs) {
      throw new ValidationError(`${path}: label ${labels[i]} exceeds header objs=${objs}`);
    }
  }
  return { objs, height, width, labels };
}
