#!/usr/bin/env node
import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import { extractSidecars } from "./extract";
import { DEFAULT_MIN_CONFIDENCE } from "./types";

export function main(argv: string[]): number {
  let exitCode = 0;
  yargs(argv)
    .command(
      "extract",
      "emit face sidecar JSON for a directory of images",
      (y) =>
        y
          .option("in", { type: "string", demandOption: true, describe: "input image directory" })
          .option("out", { type: "string", demandOption: true, describe: "sidecar output directory" })
          .option("min-confidence", { type: "number", default: DEFAULT_MIN_CONFIDENCE })
          .option("backend", { type: "string", default: "heuristic" }),
      (args) => {
        try {
          const summary = extractSidecars({
            inputDir: args.in,
            outputDir: args.out,
            backend: args.backend,
            minConfidence: args["min-confidence"],
          });
          console.log(JSON.stringify(summary));
        } catch (err) {
          console.error(`error: ${err instanceof Error ? err.message : String(err)}`);
          exitCode = 1;
        }
      },
    )
    .demandCommand(1)
    .strict()
    .parseSync();
  return exitCode;
}

if (require.main === module) {
  process.exit(main(hideBin(process.argv)));
}
