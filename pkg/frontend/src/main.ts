import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import { renderFigure } from "./render.js";

const argv = yargs(hideBin(process.argv))
  .command("render", "draw a study CSV as a log-log SVG chart")
  .option("in", {
    type: "string",
    array: true,
    demandOption: true,
    describe: "study CSV path (repeatable)",
  })
  .option("kind", {
    choices: ["error-vs-n", "time-vs-error"] as const,
    demandOption: true,
  })
  .option("out", { type: "string", demandOption: true, describe: "output .svg path" })
  .strict()
  .parseSync();

try {
  const chart = renderFigure({ inputs: argv.in, kind: argv.kind, out: argv.out });
  for (const d of chart.diagnostics) {
    const refit = d.refitSlope === null ? "n/a" : d.refitSlope.toFixed(3);
    const summary = d.summarySlope === null ? "n/a" : d.summarySlope.toFixed(3);
    console.log(`${d.label}: refit slope ${refit} (producer summary ${summary})`);
  }
  console.log(`wrote ${argv.out}`);
} catch (err) {
  console.error(String(err instanceof Error ? err.message : err));
  process.exit(1);
}
