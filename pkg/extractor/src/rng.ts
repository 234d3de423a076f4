/** Seeded randomness: uniform streams (seedrandom) plus gaussian draws.
 *
 * Streams are keyed by strings so substreams ("video 3, timestep 200")
 * are independent of draw order elsewhere, which keeps extraction
 * deterministic no matter how frames are batched.
 */

import seedrandom from "seedrandom";

export interface Rng {
  /** Uniform double in [0, 1). */
  uniform(): number;
  /** Standard normal via Box-Muller. */
  gaussian(): number;
}

class SeededRng implements Rng {
  private src: seedrandom.PRNG;
  private spare: number | null = null;

  constructor(key: string) {
    this.src = seedrandom(key);
  }

  uniform(): number {
    return this.src();
  }

  gaussian(): number {
    if (this.spare !== null) {
      const v = this.spare;
      this.spare = null;
      return v;
    }
    // 1 - uniform() lies in (0, 1], so the log is finite.
    const u = 1 - this.src();
    const v = this.src();
    const r = Math.sqrt(-2 * Math.log(u));
    const theta = 2 * Math.PI * v;
    this.spare = r * Math.sin(theta);
    return r * Math.cos(theta);
  }
}

/** Independent stream for a (seed, label) pair. */
export function makeRng(seed: number, label: string): Rng {
  return new SeededRng(`${seed}:${label}`);
}

/** n independent standard normals as float64. */
export function gaussianVector(rng: Rng, n: number): Float64Array {
  const out = new Float64Array(n);
  for (let i = 0; i < n; i++) out[i] = rng.gaussian();
  return out;
}
