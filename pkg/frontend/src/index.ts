export { parseSeriesCsv, readSeries, EXPECTED_HEADER } from "./csv.js";
export type { Point, Series } from "./csv.js";
export { renderChart, ticks } from "./chart.js";
export type { ChartOptions } from "./chart.js";
export { loadSpec } from "./spec.js";
export type { PlotSpec, SeriesSpec } from "./spec.js";
export { render, main } from "./cli.js";
