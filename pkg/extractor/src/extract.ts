/** Extraction runs: frames directory in, FMAP tree plus manifest out.
 *
 * One FMAP per (frame, layer, timestep). Noise for the forward-noising
 * step is drawn once per (video, timestep) and shared by every frame of
 * the video, so temporal coherence between frames is not destroyed by
 * independent draws; the run seed picks the draw. Masks are optional
 * passthroughs: when a masks directory is given, masks matching frame
 * basenames are copied into the output tree and recorded, and the first
 * frame must have one (the engine seeds propagation with it).
 */

import * as fs from "node:fs";
import * as path from "node:path";
import { ValidationError } from "./errors";
import { writeFmap } from "./fmap";
import { PlanarImage, readFramePng } from "./image";
import { FrameDoc, ManifestDoc, VideoDoc, featureKey, saveManifest } from "./manifest";
import { ModelSpec, getModel, layerFeatures } from "./models";
import { readMsk1 } from "./msk1";
import { drawNoise, noiseImage } from "./noising";
import { makeRng } from "./rng";
import { Schedule, TOTAL_STEPS, makeSchedule } from "./schedule";

export interface ExtractionSpec {
  model: string;
  layers: number[];
  timesteps: number[];
  seed: number;
  prompt: string;
}

export interface ExtractResult {
  manifestPath: string;
  fmapCount: number;
}

function validateSpec(spec: ExtractionSpec, model: ModelSpec): void {
  if (spec.layers.length === 0) {
    throw new ValidationError("at least one layer is required");
  }
  for (const layer of spec.layers) {
    model.layerShape(layer); // throws on non-extractable layers
  }
  if (spec.timesteps.length === 0) {
    throw new ValidationError("at least one timestep is required");
  }
  for (const t of spec.timesteps) {
    if (!Number.isInteger(t) || t < 0 || t >= TOTAL_STEPS) {
      throw new ValidationError(`timestep must be an integer in [0, ${TOTAL_STEPS}), got ${t}`);
    }
    if (model.scheduleKind === null && t !== 0) {
      throw new ValidationError(
        `${model.id} features are timestep-free; only --timesteps 0 is valid`
      );
    }
  }
  if (spec.prompt !== "" && !model.acceptsPrompt) {
    throw new ValidationError(`${model.id} does not take a text prompt`);
  }
  if (!Number.isInteger(spec.seed)) {
    throw new ValidationError(`seed must be an integer, got ${spec.seed}`);
  }
}

function listFrames(framesDir: string): string[] {
  let entries: string[];
  try {
    entries = fs.readdirSync(framesDir);
  } catch (err) {
    throw new ValidationError(`cannot read frames directory ${framesDir}: ${(err as Error).message}`);
  }
  const frames = entries.filter((n) => n.toLowerCase().endsWith(".png")).sort();
  if (frames.length === 0) {
    throw new ValidationError(`no .png frames found in ${framesDir}`);
  }
  return frames;
}

function findMask(masksDir: string, frameName: string): string | null {
  const stem = frameName.replace(/\.png$/i, "");
  for (const ext of [".msk1", ".png"]) {
    const candidate = path.join(masksDir, stem + ext);
    if (fs.existsSync(candidate)) return candidate;
  }
  return null;
}

export function runExtract(
  spec: ExtractionSpec,
  framesDir: string,
  outDir: string,
  masksDir?: string
): ExtractResult {
  const model = getModel(spec.model);
  validateSpec(spec, model);
  const layers = [...spec.layers].sort((a, b) => a - b);
  const timesteps = [...spec.timesteps].sort((a, b) => a - b);
  const schedule: Schedule | null =
    model.scheduleKind === null ? null : makeSchedule(model.scheduleKind);

  const videoName = path.basename(path.resolve(framesDir));
  const frameNames = listFrames(framesDir);
  const featDir = path.join(outDir, "feats", videoName);
  const gtDir = path.join(outDir, "gt", videoName);
  fs.mkdirSync(featDir, { recursive: true });

  // decode and encode every frame up front; all frames must agree on size
  const encoded: PlanarImage[] = [];
  let imageSize: [number, number] | null = null;
  for (const name of frameNames) {
    const img = readFramePng(path.join(framesDir, name));
    if (imageSize === null) {
      imageSize = [img.height, img.width];
    } else if (img.height !== imageSize[0] || img.width !== imageSize[1]) {
      throw new ValidationError(
        `${name}: frame size ${img.height}x${img.width} differs from first frame ` +
          `${imageSize[0]}x${imageSize[1]}`
      );
    }
    encoded.push(model.encode(img));
  }
  const spaceLen = encoded[0].data.length;

  // one noise draw per (video, timestep), shared across frames
  const noiseByStep = new Map<number, Float64Array>();
  if (schedule !== null) {
    for (const t of timesteps) {
      const rng = makeRng(spec.seed, `noise:${videoName}:T${t}`);
      noiseByStep.set(t, drawNoise(rng, spaceLen));
    }
  }

  let fmapCount = 0;
  let objectCount: number | null = null;
  const frames: FrameDoc[] = [];
  for (let i = 0; i < frameNames.length; i++) {
    const index = i + 1;
    const features: Record<string, string> = {};
    for (const t of timesteps) {
      const tensor =
        schedule === null
          ? encoded[i]
          : {
              ...encoded[i],
              data: noiseImage(encoded[i].data, t, schedule, noiseByStep.get(t)!),
            };
      for (const layer of layers) {
        const fm = layerFeatures(model, layer, tensor, spec.prompt);
        // manifest paths stay POSIX-style regardless of host separator
        const rel = path.posix.join(
          "feats",
          videoName,
          `frame_${String(index).padStart(4, "0")}_${featureKey(layer, t)}.fmap`
        );
        writeFmap(fm, path.join(outDir, rel));
        features[featureKey(layer, t)] = rel;
        fmapCount++;
      }
    }
    const frame: FrameDoc = { index, features };
    if (masksDir !== undefined) {
      const src = findMask(masksDir, frameNames[i]);
      if (src === null && index === 1) {
        throw new ValidationError(
          `masks directory given but frame 1 (${frameNames[0]}) has no mask in ${masksDir}`
        );
      }
      if (src !== null) {
        fs.mkdirSync(gtDir, { recursive: true });
        const rel = path.posix.join(
          "gt",
          videoName,
          `frame_${String(index).padStart(4, "0")}${path.extname(src)}`
        );
        fs.copyFileSync(src, path.join(outDir, rel));
        frame.mask = rel;
        if (objectCount === null && src.endsWith(".msk1")) {
          objectCount = readMsk1(src).objs;
        }
      }
    }
    frames.push(frame);
  }

  const firstShape = model.layerShape(layers[0]);
  const [gh, gw] = model.gridOf(layers[0], encoded[0].height, encoded[0].width);
  const meta: Record<string, unknown> = {
    model: model.id,
    layers,
    timesteps,
    seed: spec.seed,
    stride: firstShape.imageStride,
    grid: [gh, gw],
    image_size: imageSize,
  };
  if (schedule !== null) meta.total_timesteps = schedule.totalSteps;
  if (model.acceptsPrompt) meta.prompt = spec.prompt;
  if (objectCount !== null) meta.objects = objectCount;

  const video: VideoDoc = { name: videoName, meta, frames };
  const doc: ManifestDoc = { videos: [video] };
  const manifestPath = path.join(outDir, "manifest.json");
  saveManifest(doc, manifestPath);
  return { manifestPath, fmapCount };
}
