#!/usr/bin/env node
/** Command line entry point.
 *
 * extract --model adm --layers 1,2 --timesteps 0,50 \
 *         --frames-dir video/ --out features/ --seed 7 [--prompt TEXT]
 *         [--masks-dir masks/]
 */

import { parseArgs } from "node:util";
import { FormatError, ValidationError } from "./errors";
import { runExtract } from "./extract";
import { MODEL_IDS } from "./models";

function intList(raw: string, flag: string): number[] {
  const parts = raw.split(",").map((s) => s.trim()).filter((s) => s.length > 0);
  if (parts.length === 0) {
    throw new ValidationError(`${flag} needs at least one integer`);
  }
  return parts.map((s) => {
    const v = Number(s);
    if (!Number.isInteger(v)) {
      throw new ValidationError(`${flag}: ${JSON.stringify(s)} is not an integer`);
    }
    return v;
  });
}

const USAGE = `usage: fmap-extract extract --model <id> --layers N[,N...] --timesteps N[,N...]
                    --frames-dir DIR --out DIR --seed N [--prompt TEXT] [--masks-dir DIR]

models: ${MODEL_IDS.join(", ")}`;

export function main(argv: string[]): number {
  try {
    if (argv[0] !== "extract") {
      process.stderr.write(USAGE + "\n");
      return 2;
    }
    const { values } = parseArgs({
      args: argv.slice(1),
      options: {
        model: { type: "string" },
        layers: { type: "string" },
        timesteps: { type: "string" },
        "frames-dir": { type: "string" },
        out: { type: "string" },
        seed: { type: "string" },
        prompt: { type: "string", default: "" },
        "masks-dir": { type: "string" },
      },
    });
    for (const req of ["model", "layers", "timesteps", "frames-dir", "out", "seed"] as const) {
      if (values[req] === undefined) {
        throw new ValidationError(`--${req} is required`);
      }
    }
    const seed = Number(values.seed);
    const result = runExtract(
      {
        model: values.model!,
        layers: intList(values.layers!, "--layers"),
        timesteps: intList(values.timesteps!, "--timesteps"),
        seed,
        prompt: values.prompt!,
      },
      values["frames-dir"]!,
      values.out!,
      values["masks-dir"]
    );
    process.stdout.write(`wrote ${result.fmapCount} feature maps, ${result.manifestPath}\n`);
    return 0;
  } catch (err) {
    if (err instanceof ValidationError || err instanceof FormatError) {
      process.stderr.write(`error: ${err.message}\n`);
      return 2;
    }
    throw err;
  }
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)));
}
