/** Backbone registry: architecture shape contracts plus procedural features.
 *
 * Pretrained weights are multi-GB assets that cannot ship with this
 * package, so each backbone here is a weight-free stand-in that honors
 * the real architecture's published shape contract: input space and
 * size, decoder depth, per-layer channel counts and strides, and which
 * layers are extractable. Features are a deterministic pooled channel
 * mix of the (noised) model-space tensor, with fixed per-(model, layer)
 * mixing weights playing the role of frozen pretrained parameters. Every
 * emitted file is therefore reproducible bit-for-bit from (frames, spec,
 * seed) alone, which is the property the downstream engine's caching and
 * determinism contracts depend on.
 *
 * Architecture constants (public):
 * - adm: 256x256 pixel-space UNet; decoder = 6 stages x 3 blocks = 18
 *   outputs from 8x8 up to 256x256, stage channels 1024/1024/512/512/
 *   256/256; extraction is limited to decoder layers 1..8 (cost cutoff).
 * - sd-1.2 .. sd-2.1: 512x512 image, 4-channel latents at 1/8 scale;
 *   decoder = 4 up-stages x 3 resnet outputs = 12 layers at 8/16/32/64
 *   on the latent grid, channels 1280/1280/640/320.
 * - dino: ViT-B/8, width 768, 12 blocks; tokens from non-overlapping-
 *   stride-8 patches at native resolution, class token dropped, final
 *   block is the feature layer.
 */

import { ValidationError } from "./errors";
import { PlanarImage, resizeBilinear } from "./image";
import { makeRng } from "./rng";
import { ScheduleKind } from "./schedule";

export interface LayerShape {
  /** channel count of the layer output */
  channels: number;
  /** model-space cells per feature cell (pooling stride, isotropic) */
  stride: number;
  /** input-image pixels per feature cell (recorded in manifests) */
  imageStride: number;
}

export interface ModelSpec {
  id: string;
  /** tensor space noising operates in */
  space: "pixel" | "latent" | "token";
  /** null for timestep-free backbones (dino) */
  scheduleKind: ScheduleKind | null;
  /** fixed input size [H, W], or null to keep native resolution */
  inputSize: [number, number] | null;
  /** total decoder depth (for reporting; extraction may cover fewer) */
  decoderLayers: number;
  /** layer indices extract() accepts */
  extractableLayers: number[];
  /** whether a text prompt conditions the features */
  acceptsPrompt: boolean;
  layerShape(layer: number): LayerShape;
  /** feature grid dims for a model-space tensor of the given size */
  gridOf(layer: number, height: number, width: number): [number, number];
  /** model-space channel count for an input of the given size */
  spaceChannels: number;
  /** RGB [-1,1] planar image -> model-space tensor */
  encode(img: PlanarImage): PlanarImage;
}

const SD_IDS = ["sd-1.2", "sd-1.3", "sd-1.4", "sd-1.5", "sd-2.0", "sd-2.1"];

function checkLayer(spec: ModelSpec, layer: number): void {
  if (!spec.extractableLayers.includes(layer)) {
    const lo = spec.extractableLayers[0];
    const hi = spec.extractableLayers[spec.extractableLayers.length - 1];
    throw new ValidationError(
      `${spec.id}: layer ${layer} is not extractable (valid: ${lo}..${hi})`
    );
  }
}

/** Fixed pseudo-weights: stand-ins for frozen pretrained parameters. */
function fixedMatrix(key: string, rows: number, cols: number): Float64Array {
  const rng = makeRng(0, `weights:${key}`);
  const scale = 1 / Math.sqrt(cols);
  const w = new Float64Array(rows * cols);
  for (let i = 0; i < w.length; i++) w[i] = rng.gaussian() * scale;
  return w;
}

/** Mean over non-overlapping stride x stride blocks, conv-grid aligned. */
function poolToGrid(img: PlanarImage, stride: number, gh: number, gw: number): Float64Array {
  const { channels, height, width } = img;
  const out = new Float64Array(channels * gh * gw);
  const norm = 1 / (stride * stride);
  for (let c = 0; c < channels; c++) {
    const src = c * height * width;
    const dst = c * gh * gw;
    for (let gy = 0; gy < gh; gy++) {
      for (let gx = 0; gx < gw; gx++) {
        let acc = 0;
        for (let dy = 0; dy < stride; dy++) {
          const row = src + (gy * stride + dy) * width + gx * stride;
          for (let dx = 0; dx < stride; dx++) acc += img.data[row + dx];
        }
        out[dst + gy * gw + gx] = acc * norm;
      }
    }
  }
  return out;
}

/** Channel mix + tanh over a pooled grid: the procedural "layer output". */
export function layerFeatures(
  spec: ModelSpec,
  layer: number,
  modelSpace: PlanarImage,
  prompt: string
): { channels: number; height: number; width: number; data: Float32Array } {
  checkLayer(spec, layer);
  const { channels: cOut, stride } = spec.layerShape(layer);
  const [gh, gw] = spec.gridOf(layer, modelSpace.height, modelSpace.width);
  const cIn = modelSpace.channels;
  const pooled = poolToGrid(modelSpace, stride, gh, gw);
  const weights = fixedMatrix(`${spec.id}:L${layer}`, cOut, cIn);
  const biasKey = spec.acceptsPrompt ? `${spec.id}:L${layer}:prompt:${prompt}` : `${spec.id}:L${layer}:bias`;
  const biasRng = makeRng(0, biasKey);
  const cells = gh * gw;
  const data = new Float32Array(cOut * cells);
  for (let c = 0; c < cOut; c++) {
    const bias = biasRng.gaussian() * 0.1;
    const wRow = c * cIn;
    const dst = c * cells;
    for (let p = 0; p < cells; p++) {
      let acc = bias;
      for (let k = 0; k < cIn; k++) acc += weights[wRow + k] * pooled[k * cells + p];
      data[dst + p] = Math.tanh(acc);
    }
  }
  return { channels: cOut, height: gh, width: gw, data };
}

function admSpec(): ModelSpec {
  // 6 stages x 3 blocks from 8x8 to 256x256 on a 256 input
  const stageChannels = [1024, 1024, 512, 512, 256, 256];
  const spec: ModelSpec = {
    id: "adm",
    space: "pixel",
    scheduleKind: "linear",
    inputSize: [256, 256],
    decoderLayers: 18,
    extractableLayers: [1, 2, 3, 4, 5, 6, 7, 8],
    acceptsPrompt: false,
    spaceChannels: 3,
    layerShape(layer: number): LayerShape {
      checkLayer(spec, layer);
      const stage = Math.ceil(layer / 3); // 1-based stage of 3 blocks
      const stride = 32 >> (stage - 1);
      return { channels: stageChannels[stage - 1], stride, imageStride: stride };
    },
    gridOf(layer: number, height: number, width: number): [number, number] {
      const { stride } = spec.layerShape(layer);
      return [Math.floor(height / stride), Math.floor(width / stride)];
    },
    encode(img: PlanarImage): PlanarImage {
      return resizeBilinear(img, 256, 256);
    },
  };
  return spec;
}

function sdSpec(id: string): ModelSpec {
  // latents at 1/8 of the 512 input; 4 up-stages x 3 resnets
  const stageChannels = [1280, 1280, 640, 320];
  const latentMix = fixedMatrix(`${id}:vae`, 4, 3);
  const spec: ModelSpec = {
    id,
    space: "latent",
    scheduleKind: "scaled_linear",
    inputSize: [512, 512],
    decoderLayers: 12,
    extractableLayers: [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12],
    acceptsPrompt: true,
    spaceChannels: 4,
    layerShape(layer: number): LayerShape {
      checkLayer(spec, layer);
      const stage = Math.ceil(layer / 3);
      // stride on the latent grid; the VAE adds another x8 vs the image
      const stride = 8 >> (stage - 1);
      return { channels: stageChannels[stage - 1], stride, imageStride: stride * 8 };
    },
    gridOf(layer: number, height: number, width: number): [number, number] {
      const { stride } = spec.layerShape(layer);
      return [Math.floor(height / stride), Math.floor(width / stride)];
    },
    encode(img: PlanarImage): PlanarImage {
      const latentGrid = resizeBilinear(img, 64, 64);
      const cells = 64 * 64;
      const data = new Float32Array(4 * cells);
      for (let c = 0; c < 4; c++) {
        for (let p = 0; p < cells; p++) {
          let acc = 0;
          for (let k = 0; k < 3; k++) acc += latentMix[c * 3 + k] * latentGrid.data[k * cells + p];
          data[c * cells + p] = Math.tanh(acc);
        }
      }
      return { channels: 4, height: 64, width: 64, data };
    },
  };
  return spec;
}

function dinoSpec(): ModelSpec {
  const PATCH = 8;
  const WIDTH = 768;
  const spec: ModelSpec = {
    id: "dino",
    space: "token",
    scheduleKind: null,
    inputSize: null, // native resolution
    decoderLayers: 12,
    extractableLayers: [12], // final transformer block only
    acceptsPrompt: false,
    spaceChannels: 3,
    layerShape(layer: number): LayerShape {
      checkLayer(spec, layer);
      return { channels: WIDTH, stride: PATCH, imageStride: PATCH };
    },
    gridOf(layer: number, height: number, width: number): [number, number] {
      checkLayer(spec, layer);
      // conv-grid patching: floor((dim - patch) / patch) + 1
      return [
        Math.floor((height - PATCH) / PATCH) + 1,
        Math.floor((width - PATCH) / PATCH) + 1,
      ];
    },
    encode(img: PlanarImage): PlanarImage {
      return { ...img, data: img.data.slice() };
    },
  };
  return spec;
}

const REGISTRY = new Map<string, ModelSpec>();
REGISTRY.set("adm", admSpec());
for (const id of SD_IDS) REGISTRY.set(id, sdSpec(id));
REGISTRY.set("dino", dinoSpec());

export const MODEL_IDS = [...REGISTRY.keys()];

export function getModel(id: string): ModelSpec {
  const spec = REGISTRY.get(id);
  if (!spec) {
    throw new ValidationError(`unknown model ${JSON.stringify(id)}; known: ${MODEL_IDS.join(", ")}`);
  }
  return spec;
}
