/** Minimal log-log SVG chart: points, connecting lines, fitted slope guides. */

import { fitLogLogSlope } from "./slope.js";

export interface Series {
  label: string;
  /** (x, y) pairs, both strictly positive */
  points: Array<[number, number]>;
  /** slope reported by the producing tool, for cross-checking */
  summarySlope: number | null;
}

export interface ChartSpec {
  title: string;
  xLabel: string;
  yLabel: string;
  series: Series[];
}

export interface SeriesDiagnostics {
  label: string;
  refitSlope: number | null;
  summarySlope: number | null;
}

export interface ChartResult {
  svg: string;
  diagnostics: SeriesDiagnostics[];
}

const WIDTH = 760;
const HEIGHT = 500;
const MARGIN = { left: 90, right: 30, top: 50, bottom: 65 };
const PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

function fmt(v: number): string {
  if (v >= 1 && v < 10000) return String(Math.round(v * 1000) / 1000);
  return v.toExponential(0).replace("e", "e");
}

class LogScale {
  readonly lo: number;
  readonly hi: number;
  constructor(values: number[], private pixLo: number, private pixHi: number) {
    const lo = Math.min(...values);
    const hi = Math.max(...values);
    // pad 8% in log space so markers stay inside the frame
    const pad = 0.08 * Math.max(Math.log10(hi) - Math.log10(lo), 0.3);
    this.lo = Math.log10(lo) - pad;
    this.hi = Math.log10(hi) + pad;
  }
  pix(v: number): number {
    const t = (Math.log10(v) - this.lo) / (this.hi - this.lo);
    return this.pixLo + t * (this.pixHi - this.pixLo);
  }
  decades(): number[] {
    const out: number[] = [];
    for (let e = Math.ceil(this.lo); e <= Math.floor(this.hi); e++) out.push(10 ** e);
    return out;
  }
}

export function renderChart(spec: ChartSpec): ChartResult {
  for (const s of spec.series) {
    if (s.points.length === 0) {
      throw new Error(`series "${s.label}" has no plottable points`);
    }
    for (const [x, y] of s.points) {
      if (!(x > 0) || !(y > 0)) {
        throw new Error(`series "${s.label}" has a non-positive point (${x}, ${y})`);
      }
    }
  }
  const xs = spec.series.flatMap((s) => s.points.map((p) => p[0]));
  const ys = spec.series.flatMap((s) => s.points.map((p) => p[1]));
  const sx = new LogScale(xs, MARGIN.left, WIDTH - MARGIN.right);
  const sy = new LogScale(ys, HEIGHT - MARGIN.bottom, MARGIN.top);

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" viewBox="0 0 ${WIDTH} ${HEIGHT}" font-family="Helvetica, Arial, sans-serif">`,
  );
  parts.push(`<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>`);
  parts.push(
    `<text x="${WIDTH / 2}" y="24" text-anchor="middle" font-size="16">${spec.title}</text>`,
  );

  const plotBottom = HEIGHT - MARGIN.bottom;
  for (const tick of sx.decades()) {
    const px = sx.pix(tick);
    parts.push(
      `<line x1="${px.toFixed(1)}" y1="${MARGIN.top}" x2="${px.toFixed(1)}" y2="${plotBottom}" stroke="#dddddd"/>`,
      `<text x="${px.toFixed(1)}" y="${plotBottom + 20}" text-anchor="middle" font-size="11">${fmt(tick)}</text>`,
    );
  }
  for (const tick of sy.decades()) {
    const py = sy.pix(tick);
    parts.push(
      `<line x1="${MARGIN.left}" y1="${py.toFixed(1)}" x2="${WIDTH - MARGIN.right}" y2="${py.toFixed(1)}" stroke="#dddddd"/>`,
      `<text x="${MARGIN.left - 8}" y="${(py + 4).toFixed(1)}" text-anchor="end" font-size="11">${fmt(tick)}</text>`,
    );
  }
  parts.push(
    `<rect x="${MARGIN.left}" y="${MARGIN.top}" width="${WIDTH - MARGIN.left - MARGIN.right}" height="${plotBottom - MARGIN.top}" fill="none" stroke="#333333"/>`,
    `<text x="${(MARGIN.left + WIDTH - MARGIN.right) / 2}" y="${HEIGHT - 18}" text-anchor="middle" font-size="13">${spec.xLabel} (log)</text>`,
    `<text x="22" y="${(MARGIN.top + plotBottom) / 2}" text-anchor="middle" font-size="13" transform="rotate(-90 22 ${(MARGIN.top + plotBottom) / 2})">${spec.yLabel} (log)</text>`,
  );

  const diagnostics: SeriesDiagnostics[] = [];
  spec.series.forEach((series, idx) => {
    const color = PALETTE[idx % PALETTE.length];
    const sorted = [...series.points].sort((a, b) => a[0] - b[0]);
    const refit = fitLogLogSlope(
      sorted.map((p) => p[0]),
      sorted.map((p) => p[1]),
    );
    diagnostics.push({ label: series.label, refitSlope: refit, summarySlope: series.summarySlope });

    const poly = sorted
      .map(([x, y]) => `${sx.pix(x).toFixed(1)},${sy.pix(y).toFixed(1)}`)
      .join(" ");
    parts.push(`<polyline points="${poly}" fill="none" stroke="${color}" stroke-width="1.5"/>`);
    for (const [x, y] of sorted) {
      parts.push(
        `<circle cx="${sx.pix(x).toFixed(1)}" cy="${sy.pix(y).toFixed(1)}" r="4" fill="${color}"/>`,
      );
    }
    // dashed least-squares guide line across the data range
    if (refit !== null && sorted.length >= 2) {
      const x0 = sorted[0][0];
      const x1 = sorted[sorted.length - 1][0];
      const my =
        sorted.reduce((s, p) => s + Math.log(p[1]), 0) / sorted.length;
      const mx = sorted.reduce((s, p) => s + Math.log(p[0]), 0) / sorted.length;
      const yAt = (x: number) => Math.exp(my + refit * (Math.log(x) - mx));
      parts.push(
        `<line x1="${sx.pix(x0).toFixed(1)}" y1="${sy.pix(yAt(x0)).toFixed(1)}" x2="${sx.pix(x1).toFixed(1)}" y2="${sy.pix(yAt(x1)).toFixed(1)}" stroke="${color}" stroke-dasharray="6 4" stroke-width="1"/>`,
      );
    }
    const legendY = MARGIN.top + 18 + idx * 20;
    const slopeTxt = refit === null ? "slope n/a" : `slope ${refit.toFixed(2)}`;
    parts.push(
      `<rect x="${WIDTH - MARGIN.right - 215}" y="${legendY - 11}" width="12" height="12" fill="${color}"/>`,
      `<text x="${WIDTH - MARGIN.right - 198}" y="${legendY}" font-size="12">${series.label} (${slopeTxt})</text>`,
    );
  });

  parts.push("</svg>");
  return { svg: parts.join("\n"), diagnostics };
}
