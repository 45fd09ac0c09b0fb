/** Chart assembly from study files: series extraction per kind and scheme. */

import { basename } from "node:path";
import { readFileSync, writeFileSync } from "node:fs";

import { ChartResult, Series, renderChart } from "./chart.js";
import { Study, parseStudy } from "./csv.js";

export type ChartKind = "error-vs-n" | "time-vs-error";

export interface FigureSpec {
  inputs: string[];
  kind: ChartKind;
  out: string;
}

function seriesLabel(study: Study, scheme: string, multiFile: boolean): string {
  if (!multiFile) return scheme;
  return `${basename(study.source).replace(/\.csv$/, "")}:${scheme}`;
}

export function buildSeries(studies: Study[], kind: ChartKind): Series[] {
  const multiFile = studies.length > 1;
  const out: Series[] = [];
  for (const study of studies) {
    const schemes = [...new Set(study.rows.map((r) => r.scheme))];
    for (const scheme of schemes) {
      const rows = study.rows.filter((r) => r.scheme === scheme);
      if (rows.some((r) => r.absError === null)) {
        throw new Error(
          `${study.source}: scheme "${scheme}" has rows without abs_error ` +
            "(no exact solution recorded); cannot draw an error chart",
        );
      }
      const summary = study.summaries.find((s) => s.scheme === scheme);
      const points: Array<[number, number]> = rows.map((r) =>
        kind === "error-vs-n"
          ? [r.n, r.absError as number]
          : [r.absError as number, r.wallSeconds],
      );
      out.push({
        label: seriesLabel(study, scheme, multiFile),
        points: points.filter(([x, y]) => x > 0 && y > 0),
        summarySlope: summary?.errorSlope ?? null,
      });
    }
  }
  return out;
}

export function renderFigure(spec: FigureSpec): ChartResult {
  if (!spec.out.endsWith(".svg")) {
    throw new Error(`unsupported output extension for "${spec.out}"; supported: .svg`);
  }
  const studies = spec.inputs.map((path) => parseStudy(readFileSync(path, "utf8"), path));
  const series = buildSeries(studies, spec.kind);
  const chart =
    spec.kind === "error-vs-n"
      ? renderChart({
          title: "Absolute error against step count",
          xLabel: "steps n",
          yLabel: "absolute error",
          series,
        })
      : renderChart({
          title: "Solve time against absolute error",
          xLabel: "absolute error",
          yLabel: "wall seconds",
          series,
        });
  writeFileSync(spec.out, chart.svg, "utf8");
  return chart;
}
