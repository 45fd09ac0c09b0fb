/**
 * Reader for the solver's versioned study CSVs.
 *
 * Layout: a version comment line, a header row, one data row per
 * (step count, scheme) and one trailing summary row per scheme whose
 * `n` column holds the literal "slope".
 */

export const EXPECTED_VERSION = "# cubature-bsde v1";

export interface StudyRow {
  n: number;
  gamma: number;
  scheme: string;
  u0Estimate: number;
  absError: number | null;
  totalNodes: number;
  wallSeconds: number;
}

export interface SlopeSummary {
  scheme: string;
  /** fitted log(error) vs log(n) slope exported by the solver */
  errorSlope: number | null;
  /** fitted log(nodes) vs log(1/error) exponent exported by the solver */
  nodeSlope: number | null;
}

export interface Study {
  rows: StudyRow[];
  summaries: SlopeSummary[];
  source: string;
}

const HEADER = "n,gamma,scheme,u0_estimate,abs_error,total_nodes,wall_seconds";

function optional(field: string): number | null {
  return field === "" ? null : Number(field);
}

export function parseStudy(text: string, source = "<memory>"): Study {
  const lines = text.trim().split(/\r?\n/);
  if (lines.length === 0 || lines[0].trim() !== EXPECTED_VERSION) {
    throw new Error(
      `${source}: unsupported schema "${lines[0] ?? ""}"; expected "${EXPECTED_VERSION}"`,
    );
  }
  if (lines.length < 2 || lines[1].trim() !== HEADER) {
    throw new Error(`${source}: malformed header row; expected "${HEADER}"`);
  }
  const rows: StudyRow[] = [];
  const summaries: SlopeSummary[] = [];
  for (const line of lines.slice(2)) {
    if (line.trim() === "") continue;
    const parts = line.split(",");
    if (parts.length !== 7) {
      throw new Error(`${source}: row with ${parts.length} fields: "${line}"`);
    }
    if (parts[0] === "slope") {
      summaries.push({
        scheme: parts[2],
        errorSlope: optional(parts[4]),
        nodeSlope: optional(parts[5]),
      });
      continue;
    }
    const row: StudyRow = {
      n: Number(parts[0]),
      gamma: Number(parts[1]),
      scheme: parts[2],
      u0Estimate: Number(parts[3]),
      absError: optional(parts[4]),
      totalNodes: Number(parts[5]),
      wallSeconds: Number(parts[6]),
    };
    if (!Number.isFinite(row.n) || !Number.isFinite(row.u0Estimate)) {
      throw new Error(`${source}: non-numeric data row: "${line}"`);
    }
    rows.push(row);
  }
  if (rows.length === 0) {
    throw new Error(`${source}: no data rows (refusing to draw an empty chart)`);
  }
  return { rows, summaries, source };
}
