/** Forward noising: blend a clean tensor with gaussian noise at a timestep.
 *
 * noised = sqrt(alphaBar(t)) * x0 + sqrt(1 - alphaBar(t)) * eps
 *
 * At t = 0 the schedule guarantees alphaBar = 1 exactly, so the input
 * comes back unchanged (scale 1, noise weight 0). The noise tensor is a
 * caller-supplied draw so one draw can be shared across all frames of a
 * video; use drawNoise for a seeded draw of the right length.
 */

import { ValidationError } from "./errors";
import { Rng, gaussianVector } from "./rng";
import { Schedule } from "./schedule";

export function drawNoise(rng: Rng, length: number): Float64Array {
  return gaussianVector(rng, length);
}

export function noiseImage(
  x0: Float32Array,
  t: number,
  schedule: Schedule,
  eps: Float64Array
): Float32Array {
  if (eps.length !== x0.length) {
    throw new ValidationError(
      `noise length ${eps.length} does not match input length ${x0.length}`
    );
  }
  const alphaBar = schedule.alphaBar(t); // validates t in [0, totalSteps)
  if (alphaBar === 1) {
    return x0.slice();
  }
  const signal = Math.sqrt(alphaBar);
  const noise = Math.sqrt(1 - alphaBar);
  const out = new Float32Array(x0.length);
  for (let i = 0; i < x0.length; i++) {
    out[i] = signal * x0[i] + noise * eps[i];
  }
  return out;
}
