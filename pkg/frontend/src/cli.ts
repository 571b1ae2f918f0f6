#!/usr/bin/env node
import { writeFileSync } from "node:fs";
import { basename } from "node:path";
import { parseArgs } from "node:util";
import { renderChart } from "./chart.js";
import { readSeries, Series } from "./csv.js";
import { loadSpec, PlotSpec } from "./spec.js";

const USAGE = `usage: multiscat-plots render --spec <spec.json> [--output <file.svg>]
       multiscat-plots render <csv> [<csv> ...] --output <file.svg>
                              [--labels "a,b,.."] [--title <t>] [--y-range "lo,hi"]`;

function specFromArgs(positionals: string[], values: Record<string, unknown>): PlotSpec {
  if (values.spec !== undefined) {
    const spec = loadSpec(values.spec as string);
    if (values.output !== undefined) spec.output = values.output as string;
    return spec;
  }
  if (positionals.length === 0) {
    throw new Error(`no CSVs given\n${USAGE}`);
  }
  if (values.output === undefined) {
    throw new Error("--output is required when passing CSVs directly");
  }
  const labels =
    values.labels !== undefined
      ? (values.labels as string).split(",").map((s) => s.trim())
      : positionals.map((p) => basename(p).replace(/\.csv$/, ""));
  if (labels.length !== positionals.length) {
    throw new Error(`${labels.length} labels for ${positionals.length} CSVs`);
  }
  let yRange: [number, number] | undefined;
  if (values["y-range"] !== undefined) {
    const parts = (values["y-range"] as string).split(",").map(Number);
    if (parts.length !== 2 || parts.some((v) => !Number.isFinite(v))) {
      throw new Error('--y-range must be "lo,hi"');
    }
    yRange = [parts[0], parts[1]];
  }
  return {
    series: positionals.map((p, i) => ({ path: p, label: labels[i] })),
    title: values.title as string | undefined,
    output: values.output as string,
    yRange,
  };
}

export function render(spec: PlotSpec): void {
  const series: Series[] = spec.series.map((s) => readSeries(s.path, s.label));
  const svg = renderChart(series, { title: spec.title, yRange: spec.yRange });
  writeFileSync(spec.output, svg);
}

export function main(argv: string[]): number {
  if (argv[0] !== "render") {
    console.error(`unknown command "${argv[0] ?? ""}"\n${USAGE}`);
    return 1;
  }
  try {
    const { values, positionals } = parseArgs({
      args: argv.slice(1),
      options: {
        spec: { type: "string" },
        output: { type: "string" },
        labels: { type: "string" },
        title: { type: "string" },
        "y-range": { type: "string" },
      },
      allowPositionals: true,
    });
    const spec = specFromArgs(positionals, values);
    render(spec);
    console.log(spec.output);
    return 0;
  } catch (err) {
    console.error(`multiscat-plots: ${err instanceof Error ? err.message : err}`);
    return 1;
  }
}

if (process.argv[1] && basename(process.argv[1]).startsWith("cli.")) {
  process.exit(main(process.argv.slice(2)));
}
