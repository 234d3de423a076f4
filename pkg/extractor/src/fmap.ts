/** FMAP binary tensor files: dense per-frame feature maps.
 *
 * Layout (little-endian): 4-byte magic "FMAP", u16 version, u8 dtype
 * (0 = float32), u8 reserved, u32 C, u32 H, u32 W, then C*H*W float32
 * values, channel-major then row-major. 20-byte header total. This is
 * the exact layout the downstream propagation engine reads, so writes
 * must stay bit-faithful to the Float32Array payload.
 */

import * as fs from "node:fs";
import { FormatError, ValidationError } from "./errors";

export const FMAP_MAGIC = "FMAP";
export const FMAP_VERSION = 1;
export const FMAP_DTYPE_F32 = 0;
const HEADER_BYTES = 20;

export interface Fmap {
  channels: number;
  height: number;
  width: number;
  /** length channels * height * width, channel-major then row-major */
  data: Float32Array;
}

function checkShape(channels: number, height: number, width: number): void {
  for (const [name, v] of [
    ["channels", channels],
    ["height", height],
    ["width", width],
  ] as const) {
    if (!Number.isInteger(v) || v < 1) {
      throw new ValidationError(`${name} must be a positive integer, got ${v}`);
    }
  }
}

export function encodeFmap(fmap: Fmap): Buffer {
  checkShape(fmap.channels, fmap.height, fmap.width);
  const count = fmap.channels * fmap.height * fmap.width;
  if (fmap.data.length !== count) {
    throw new ValidationError(
      `payload has ${fmap.data.length} values, shape needs ${count}`
    );
  }
  for (let i = 0; i < count; i++) {
    if (!Number.isFinite(fmap.data[i])) {
      throw new ValidationError(`payload value at ${i} is not finite`);
    }
  }
  const buf = Buffer.alloc(HEADER_BYTES + count * 4);
  buf.write(FMAP_MAGIC, 0, "ascii");
  buf.writeUInt16LE(FMAP_VERSION, 4);
  buf.writeUInt8(FMAP_DTYPE_F32, 6);
  buf.writeUInt8(0, 7);
  buf.writeUInt32LE(fmap.channels, 8);
  buf.writeUInt32LE(fmap.height, 12);
  buf.writeUInt32LE(fmap.width, 16);
  for (let i = 0; i < count; i++) {
    buf.writeFloatLE(fmap.data[i], HEADER_BYTES + i * 4);
  }
  return buf;
}

export function writeFmap(fmap: Fmap, path: string): void {
  fs.writeFileSync(path, encodeFmap(fmap));
}

export function readFmap(path: string): Fmap {
  const raw = fs.readFileSync(path);
  if (raw.length < HEADER_BYTES) {
    throw new FormatError(`${path}: file shorter than FMAP header (${raw.length} bytes)`);
  }
  const magic = raw.toString("ascii", 0, 4);
  if (magic !== FMAP_MAGIC) {
    throw new FormatError(`${path}: bad magic ${JSON.stringify(magic)}`);
  }
  const version = raw.readUInt16LE(4);
  if (version !== FMAP_VERSION) {
    throw new FormatError(`${path}: unsupported FMAP version ${version}`);
  }
  const dtype = raw.readUInt8(6);
  if (dtype !== FMAP_DTYPE_F32) {
    throw new FormatError(`${path}: unsupported dtype code ${dtype}`);
  }
  const channels = raw.readUInt32LE(8);
  const height = raw.readUInt32LE(12);
  const width = raw.readUInt32LE(16);
  if (channels < 1 || height < 1 || width < 1) {
    throw new FormatError(
      `${path}: header dims must be >= 1, got C=${channels} H=${height} W=${width}`
    );
  }
  const count = channels * height * width;
  if (raw.length - HEADER_BYTES !== count * 4) {
    throw new FormatError(
      `${path}: payload length mismatch, header says ${count * 4} bytes, ` +
        `file has ${raw.length - HEADER_BYTES}`
    );
  }
  const data = new Float32Array(count);
  for (let i = 0; i < count; i++) {
    data[i] = raw.readFloatLE(HEADER_BYTES + i * 4);
    if (!Number.isFinite(data[i])) {
      throw new ValidationError(`${path}: payload contains NaN or Inf`);
    }
  }
  return { channels, height, width, data };
}
