import { readFileSync } from "node:fs";
import { dirname, resolve } from "node:path";

export interface SeriesSpec {
  path: string;
  label: string;
}

export interface PlotSpec {
  series: SeriesSpec[];
  title?: string;
  output: string;
  yRange?: [number, number];
}

/** Load a JSON plot spec; relative paths are resolved against its directory. */
export function loadSpec(path: string): PlotSpec {
  const raw = JSON.parse(readFileSync(path, "utf-8"));
  if (!Array.isArray(raw.series) || raw.series.length === 0) {
    throw new Error("spec needs a non-empty series list");
  }
  const base = dirname(resolve(path));
  const series: SeriesSpec[] = raw.series.map((entry: unknown, i: number) => {
    const e = entry as Partial<SeriesSpec>;
    if (typeof e.path !== "string" || typeof e.label !== "string") {
      throw new Error(`series[${i}] needs string "path" and "label"`);
    }
    return { path: resolve(base, e.path), label: e.label };
  });
  if (typeof raw.output !== "string") {
    throw new Error('spec needs an "output" image path');
  }
  let yRange: [number, number] | undefined;
  if (raw.yRange !== undefined) {
    if (!Array.isArray(raw.yRange) || raw.yRange.length !== 2) {
      throw new Error("yRange must be [lo, hi]");
    }
    yRange = [Number(raw.yRange[0]), Number(raw.yRange[1])];
  }
  return {
    series,
    title: typeof raw.title === "string" ? raw.title : undefined,
    output: resolve(base, raw.output),
    yRange,
  };
}
