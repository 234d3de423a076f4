/** Forward-noising schedules: per-step variances and their running product.
 *
 * alphaBar(t) is the product of (1 - beta_s) over steps s < t, so
 * alphaBar(0) is the empty product and equals 1 exactly: noising at
 * t = 0 is the identity by construction, not by numerical luck.
 */

import { ValidationError } from "./errors";

export const TOTAL_STEPS = 1000;

export type ScheduleKind = "linear" | "scaled_linear";

export interface Schedule {
  kind: ScheduleKind;
  totalSteps: number;
  /** Per-step variance beta_t, t in [0, totalSteps). */
  beta(t: number): number;
  /** Cumulative signal fraction; alphaBar(0) === 1 exactly. */
  alphaBar(t: number): number;
}

const LINEAR_BETA_START = 1e-4;
const LINEAR_BETA_END = 0.02;
const SCALED_BETA_START = 0.00085;
const SCALED_BETA_END = 0.012;

function buildBetas(kind: ScheduleKind, totalSteps: number): Float64Array {
  const betas = new Float64Array(totalSteps);
  for (let t = 0; t < totalSteps; t++) {
    const frac = totalSteps === 1 ? 0 : t / (totalSteps - 1);
    if (kind === "linear") {
      betas[t] = LINEAR_BETA_START + frac * (LINEAR_BETA_END - LINEAR_BETA_START);
    } else {
      const root =
        Math.sqrt(SCALED_BETA_START) +
        frac * (Math.sqrt(SCALED_BETA_END) - Math.sqrt(SCALED_BETA_START));
      betas[t] = root * root;
    }
  }
  return betas;
}

export function makeSchedule(kind: ScheduleKind, totalSteps: number = TOTAL_STEPS): Schedule {
  if (!Number.isInteger(totalSteps) || totalSteps < 1) {
    throw new ValidationError(`totalSteps must be a positive integer, got ${totalSteps}`);
  }
  const betas = buildBetas(kind, totalSteps);
  // alphaBars[t] = product of (1 - beta_s) for s < t; index 0 is exactly 1.
  const alphaBars = new Float64Array(totalSteps + 1);
  alphaBars[0] = 1;
  for (let t = 0; t < totalSteps; t++) {
    alphaBars[t + 1] = alphaBars[t] * (1 - betas[t]);
  }
  const checkRange = (t: number, what: string): void => {
    if (!Number.isInteger(t) || t < 0 || t >= totalSteps) {
      throw new ValidationError(`${what} must be an integer in [0, ${totalSteps}), got ${t}`);
    }
  };
  return {
    kind,
    totalSteps,
    beta(t: number): number {
      checkRange(t, "timestep");
      return betas[t];
    },
    alphaBar(t: number): number {
      checkRange(t, "timestep");
      return alphaBars[t];
    },
  };
}
