import { Series } from "./csv.js";

export interface ChartOptions {
  title?: string;
  yRange?: [number, number];
}

const WIDTH = 860;
const HEIGHT = 520;
const MARGIN = { top: 48, right: 28, bottom: 56, left: 68 };
const PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

const X_LABEL = "iterations / reflections";
const Y_LABEL = "log10 relative L2 error";

/** Round-number tick positions covering [lo, hi] with a 1-2-5 step. */
export function ticks(lo: number, hi: number, count = 6): number[] {
  const span = hi - lo;
  const raw = span / Math.max(count, 1);
  const mag = Math.pow(10, Math.floor(Math.log10(raw)));
  const err = raw / mag;
  const step = mag * (err >= Math.sqrt(50) ? 10 : err >= Math.sqrt(10) ? 5 : err >= Math.sqrt(2) ? 2 : 1);
  const out: number[] = [];
  for (let v = Math.ceil(lo / step) * step; v <= hi + step * 1e-9; v += step) {
    out.push(v);
  }
  return out;
}

function tickLabel(value: number, step: number): string {
  const decimals = Math.max(0, -Math.floor(Math.log10(step) + 1e-9));
  const s = value.toFixed(decimals);
  return s === "-0" ? "0" : s;
}

function coord(v: number): string {
  const s = v.toFixed(2);
  return s === "-0.00" ? "0.00" : s;
}

function escapeXml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function extent(values: number[]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  if (lo === hi) {
    lo -= 1;
    hi += 1;
  }
  return [lo, hi];
}

/**
 * Render convergence series as a standalone SVG line chart.
 *
 * Output is a pure function of the inputs: fixed canvas, palette, tick
 * layout and number formatting, so identical series give identical bytes.
 */
export function renderChart(series: Series[], opts: ChartOptions = {}): string {
  if (series.length === 0) {
    throw new Error("at least one series is required");
  }
  const xs = series.flatMap((s) => s.points.map((p) => p.x));
  const ys = series.flatMap((s) => s.points.map((p) => p.y));
  const [xLo, xHi] = extent(xs);
  let [yLo, yHi] = opts.yRange ?? extent(ys);
  if (!opts.yRange) {
    const pad = 0.05 * (yHi - yLo);
    yLo -= pad;
    yHi += pad;
  }

  const plotW = WIDTH - MARGIN.left - MARGIN.right;
  const plotH = HEIGHT - MARGIN.top - MARGIN.bottom;
  const px = (x: number) => MARGIN.left + ((x - xLo) / (xHi - xLo)) * plotW;
  const py = (y: number) => MARGIN.top + ((yHi - y) / (yHi - yLo)) * plotH;

  const xTicks = ticks(xLo, xHi);
  const yTicks = ticks(yLo, yHi);
  const xStep = xTicks.length > 1 ? xTicks[1] - xTicks[0] : 1;
  const yStep = yTicks.length > 1 ? yTicks[1] - yTicks[0] : 1;

  const parts: string[] = [];
  parts.push(`<?xml version="1.0" encoding="UTF-8"?>`);
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" ` +
      `viewBox="0 0 ${WIDTH} ${HEIGHT}" font-family="sans-serif">`,
  );
  parts.push(`<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>`);
  if (opts.title) {
    parts.push(
      `<text x="${coord(WIDTH / 2)}" y="28" text-anchor="middle" font-size="18">` +
        `${escapeXml(opts.title)}</text>`,
    );
  }

  // gridlines and tick labels
  for (const t of yTicks) {
    const y = coord(py(t));
    parts.push(
      `<line x1="${MARGIN.left}" y1="${y}" x2="${WIDTH - MARGIN.right}" y2="${y}" ` +
        `stroke="#dddddd" stroke-width="1"/>`,
    );
    parts.push(
      `<text x="${MARGIN.left - 8}" y="${y}" text-anchor="end" dominant-baseline="middle" ` +
        `font-size="12">${tickLabel(t, yStep)}</text>`,
    );
  }
  for (const t of xTicks) {
    const x = coord(px(t));
    parts.push(
      `<line x1="${x}" y1="${MARGIN.top}" x2="${x}" y2="${HEIGHT - MARGIN.bottom}" ` +
        `stroke="#dddddd" stroke-width="1"/>`,
    );
    parts.push(
      `<text x="${x}" y="${HEIGHT - MARGIN.bottom + 18}" text-anchor="middle" ` +
        `font-size="12">${tickLabel(t, xStep)}</text>`,
    );
  }

  // frame and axis labels
  parts.push(
    `<rect x="${MARGIN.left}" y="${MARGIN.top}" width="${plotW}" height="${plotH}" ` +
      `fill="none" stroke="#333333" stroke-width="1"/>`,
  );
  parts.push(
    `<text x="${coord(MARGIN.left + plotW / 2)}" y="${HEIGHT - 12}" text-anchor="middle" ` +
      `font-size="14">${X_LABEL}</text>`,
  );
  parts.push(
    `<text x="18" y="${coord(MARGIN.top + plotH / 2)}" text-anchor="middle" font-size="14" ` +
      `transform="rotate(-90 18 ${coord(MARGIN.top + plotH / 2)})">${Y_LABEL}</text>`,
  );

  parts.push(`<clipPath id="plot-area"><rect x="${MARGIN.left}" y="${MARGIN.top}" ` +
    `width="${plotW}" height="${plotH}"/></clipPath>`);
  series.forEach((s, i) => {
    const color = PALETTE[i % PALETTE.length];
    const pts = s.points.map((p) => `${coord(px(p.x))},${coord(py(p.y))}`).join(" ");
    parts.push(
      `<polyline points="${pts}" fill="none" stroke="${color}" stroke-width="2" ` +
        `clip-path="url(#plot-area)"/>`,
    );
  });

  // legend, top-right inside the frame
  const legendX = WIDTH - MARGIN.right - 230;
  series.forEach((s, i) => {
    const rowY = MARGIN.top + 14 + 20 * i;
    const color = PALETTE[i % PALETTE.length];
    parts.push(
      `<line x1="${legendX}" y1="${rowY}" x2="${legendX + 26}" y2="${rowY}" ` +
        `stroke="${color}" stroke-width="2"/>`,
    );
    parts.push(
      `<text x="${legendX + 32}" y="${rowY}" dominant-baseline="middle" font-size="13" ` +
        `class="legend-label">${escapeXml(s.label)}</text>`,
    );
  });

  parts.push(`</svg>`);
  return parts.join("\n") + "\n";
}
