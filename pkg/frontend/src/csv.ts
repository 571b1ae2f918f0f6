import { readFileSync } from "node:fs";

export const EXPECTED_HEADER = "iteration_or_reflection,log10_l2_error,wall_seconds";

export interface Point {
  x: number;
  y: number;
}

export interface Series {
  label: string;
  points: Point[];
}

/** Parse one convergence CSV: cost index and log10 error, wall time ignored. */
export function parseSeriesCsv(text: string, label: string): Series {
  const lines = text.split(/\r?\n/).filter((line) => line.length > 0);
  if (lines.length === 0 || lines[0].trim() !== EXPECTED_HEADER) {
    throw new Error(`expected header "${EXPECTED_HEADER}", got "${lines[0] ?? ""}"`);
  }
  const points: Point[] = [];
  for (let i = 1; i < lines.length; i++) {
    const cells = lines[i].split(",");
    if (cells.length !== 3) {
      throw new Error(`row ${i}: expected 3 columns, got ${cells.length}`);
    }
    const x = Number(cells[0]);
    const y = Number(cells[1]);
    if (!Number.isFinite(x) || !Number.isFinite(y)) {
      throw new Error(`row ${i}: non-numeric cost or error in "${lines[i]}"`);
    }
    points.push({ x, y });
  }
  if (points.length === 0) {
    throw new Error("CSV has a header but no data rows");
  }
  return { label, points };
}

export function readSeries(path: string, label: string): Series {
  return parseSeriesCsv(readFileSync(path, "utf-8"), label);
}
