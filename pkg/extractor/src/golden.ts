/** Golden cross-language contract files.
 *
 * Ten committed files exercise the FMAP/MSK1 formats across the
 * package boundary: the downstream engine's readers must reproduce
 * every payload bit-for-bit. Seven are feature maps (five synthesized
 * from closed-form patterns both sides can recompute independently, two
 * produced by the real extract pipeline), three are masks. index.json
 * records each file's shape, its pattern when it has one, and a sha256
 * of the raw payload bytes so even the pipeline-produced files are
 * pinned bit-exactly.
 */

import { createHash } from "node:crypto";

export type Pattern =
  | { kind: "affine_mod"; scale: number; mul: number; add: number; mod: number; offset: number }
  | { kind: "values_cycle"; values: string[] }
  | { kind: "label_mod"; mul: number; add: number };

export interface GoldenFmapDef {
  file: string;
  kind: "fmap";
  shape: [number, number, number];
  pattern: Pattern | null;
  source: "pattern" | "extract";
}

export interface GoldenMaskDef {
  file: string;
  kind: "msk1";
  shape: [number, number];
  objs: number;
  pattern: Pattern;
  source: "pattern";
}

export type GoldenDef = GoldenFmapDef | GoldenMaskDef;

export const GOLDEN_FMAP_PATTERNS: GoldenFmapDef[] = [
  {
    file: "g01_min.fmap",
    kind: "fmap",
    shape: [1, 1, 1],
    pattern: { kind: "values_cycle", values: ["0.0"] },
    source: "pattern",
  },
  {
    file: "g02_half_ramp.fmap",
    kind: "fmap",
    shape: [2, 3, 4],
    pattern: { kind: "affine_mod", scale: 0.5, mul: 1, add: 0, mod: 24, offset: -3.25 },
    source: "pattern",
  },
  {
    file: "g03_signed_edges.fmap",
    kind: "fmap",
    shape: [1, 2, 3],
    pattern: {
      kind: "values_cycle",
      values: [
        "0.0",
        "-0.0",
        "3.4028234663852886e38",
        "1.1754943508222875e-38",
        "1.401298464324817e-45",
        "-1.5",
      ],
    },
    source: "pattern",
  },
  {
    file: "g04_dyadic_mix.fmap",
    kind: "fmap",
    shape: [3, 4, 5],
    pattern: { kind: "affine_mod", scale: 0.125, mul: 3, add: 1, mod: 16, offset: -1 },
    source: "pattern",
  },
  {
    file: "g05_engine_grid.fmap",
    kind: "fmap",
    shape: [16, 6, 6],
    pattern: { kind: "affine_mod", scale: 0.0625, mul: 7, add: 2, mod: 64, offset: -2 },
    source: "pattern",
  },
];

export const GOLDEN_MASK_DEFS: GoldenMaskDef[] = [
  {
    file: "g08_tiny_mask.msk1",
    kind: "msk1",
    shape: [1, 1],
    objs: 1,
    pattern: { kind: "label_mod", mul: 0, add: 0 },
    source: "pattern",
  },
  {
    file: "g09_cycle_mask.msk1",
    kind: "msk1",
    shape: [6, 7],
    objs: 2,
    pattern: { kind: "label_mod", mul: 1, add: 0 },
    source: "pattern",
  },
  {
    file: "g10_stripe_mask.msk1",
    kind: "msk1",
    shape: [24, 30],
    objs: 3,
    pattern: { kind: "label_mod", mul: 11, add: 5 },
    source: "pattern",
  },
];

export function synthesizeFloats(pattern: Pattern, count: number): Float32Array {
  const out = new Float32Array(count);
  if (pattern.kind === "affine_mod") {
    for (let i = 0; i < count; i++) {
      out[i] = pattern.scale * ((i * pattern.mul + pattern.add) % pattern.mod) + pattern.offset;
    }
    return out;
  }
  if (pattern.kind === "values_cycle") {
    const vals = pattern.values.map(Number);
    for (let i = 0; i < count; i++) out[i] = vals[i % vals.length];
    return out;
  }
  throw new Error(`pattern ${pattern.kind} does not synthesize floats`);
}

export function synthesizeLabels(pattern: Pattern, count: number, objs: number): Uint8Array {
  if (pattern.kind !== "label_mod") {
    throw new Error(`pattern ${pattern.kind} does not synthesize labels`);
  }
  const out = new Uint8Array(count);
  for (let i = 0; i < count; i++) {
    out[i] = (i * pattern.mul + pattern.add) % (objs + 1);
  }
  return out;
}

export function sha256Hex(bytes: Uint8Array): string {
  return createHash("sha256").update(bytes).digest("hex");
}
