/**
 * End-to-end: drive the solver CLI for a small study, render both chart
 * kinds from the produced CSV, and check the re-fitted slopes against
 * the CSV's own summary rows.
 */

import { execFileSync } from "node:child_process";
import { existsSync, mkdtempSync, readFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { dirname, join, resolve } from "node:path";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";

import { parseStudy } from "../src/csv.js";
import { renderFigure } from "../src/render.js";

const REPO_ROOT = resolve(dirname(fileURLToPath(import.meta.url)), "..", "..");

describe("solver CSV to chart pipeline", () => {
  const work = mkdtempSync(join(tmpdir(), "cubsde-plots-"));
  const csvPath = join(work, "study.csv");

  it("renders both kinds from a freshly generated study", () => {
    execFileSync(
      "python3",
      [
        "-m", "cubsde", "convergence",
        "--problem", "logistic-benchmark", "--dim", "1",
        "--n-list", "4,8,16,32", "--extrapolate",
        "--out", csvPath,
      ],
      { cwd: REPO_ROOT, stdio: "pipe", timeout: 300_000 },
    );
    const study = parseStudy(readFileSync(csvPath, "utf8"), csvPath);
    expect(study.summaries.length).toBe(2);

    const errChart = renderFigure({
      inputs: [csvPath],
      kind: "error-vs-n",
      out: join(work, "error.svg"),
    });
    expect(existsSync(join(work, "error.svg"))).toBe(true);
    // refit must agree with the solver's summary row to two decimals
    for (const d of errChart.diagnostics) {
      expect(d.summarySlope).not.toBeNull();
      expect(d.refitSlope).not.toBeNull();
      expect(Math.abs(d.refitSlope! - d.summarySlope!)).toBeLessThan(0.005);
    }

    const timeChart = renderFigure({
      inputs: [csvPath],
      kind: "time-vs-error",
      out: join(work, "time.svg"),
    });
    expect(existsSync(join(work, "time.svg"))).toBe(true);
    expect(timeChart.diagnostics.length).toBe(2);
    const svg = readFileSync(join(work, "time.svg"), "utf8");
    expect(svg).toContain("wall seconds");
  });

  it("rejects unsupported output extensions", () => {
    expect(() =>
      renderFigure({ inputs: [csvPath], kind: "error-vs-n", out: join(work, "x.png") }),
    ).toThrowError(/supported: .svg/);
  });
});
