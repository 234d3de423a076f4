/** Dataset manifest emission.
 *
 * The manifest is a JSON document the downstream engine loads: a
 * "videos" list, each with 1-based ordered frames carrying feature
 * files keyed "L<layer>_T<timestep>" plus an optional mask path, all
 * relative to the manifest's directory. Serialization sorts keys so a
 * rerun of the same extraction is byte-identical.
 */

import * as fs from "node:fs";
import * as path from "node:path";

export interface FrameDoc {
  index: number;
  features: Record<string, string>;
  mask?: string;
  image?: string;
}

export interface VideoDoc {
  name: string;
  meta?: Record<string, unknown>;
  frames: FrameDoc[];
}

export interface ManifestDoc {
  videos: VideoDoc[];
}

export function featureKey(layer: number, timestep: number): string {
  return `L${layer}_T${timestep}`;
}

function sortedJson(value: unknown, indent: string, level: number): string {
  const pad = indent.repeat(level + 1);
  const close = indent.repeat(level);
  if (Array.isArray(value)) {
    if (value.length === 0) return "[]";
    const items = value.map((v) => pad + sortedJson(v, indent, level + 1));
    return "[\n" + items.join(",\n") + "\n" + close + "]";
  }
  if (value !== null && typeof value === "object") {
    const keys = Object.keys(value as Record<string, unknown>).sort();
    if (keys.length === 0) return "{}";
    const items = keys.map(
      (k) =>
        pad +
        JSON.stringify(k) +
        ": " +
        sortedJson((value as Record<string, unknown>)[k], indent, level + 1)
    );
    return "{\n" + items.join(",\n") + "\n" + close + "}";
  }
  return JSON.stringify(value);
}

/** Deterministic JSON: object keys sorted, two-space indent. */
export function stableJson(value: unknown): string {
  return sortedJson(value, "  ", 0) + "\n";
}

export function saveManifest(doc: ManifestDoc, manifestPath: string): void {
  fs.mkdirSync(path.dirname(manifestPath), { recursive: true });
  fs.writeFileSync(manifestPath, stableJson(doc));
}
