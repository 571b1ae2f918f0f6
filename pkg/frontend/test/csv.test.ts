import { readFileSync } from "node:fs";
import { join } from "node:path";
import { describe, expect, it } from "vitest";
import { EXPECTED_HEADER, parseSeriesCsv, readSeries } from "../src/csv.js";

const FIXTURES = join(__dirname, "fixtures");

describe("parseSeriesCsv", () => {
  it("reads a real convergence CSV", () => {
    const text = readFileSync(join(FIXTURES, "circles_desk_neumann.csv"), "utf-8");
    const s = parseSeriesCsv(text, "neumann");
    expect(s.label).toBe("neumann");
    expect(s.points.length).toBe(80);
    expect(s.points[0]).toEqual({ x: 0, y: -0.29264105056015355 });
    expect(s.points[79].x).toBe(79);
    expect(s.points[79].y).toBeCloseTo(-12.042949758743482, 12);
  });

  it("rejects a foreign header", () => {
    expect(() => parseSeriesCsv("a,b,c\n1,2,3\n", "x")).toThrow(/expected header/);
  });

  it("rejects rows with the wrong column count", () => {
    expect(() => parseSeriesCsv(`${EXPECTED_HEADER}\n1,2\n`, "x")).toThrow(/3 columns/);
  });

  it("rejects non-numeric cells", () => {
    expect(() => parseSeriesCsv(`${EXPECTED_HEADER}\n1,oops,3\n`, "x")).toThrow(/non-numeric/);
  });

  it("rejects a header-only file", () => {
    expect(() => parseSeriesCsv(`${EXPECTED_HEADER}\n`, "x")).toThrow(/no data rows/);
  });
});

describe("readSeries", () => {
  it("propagates missing-file errors", () => {
    expect(() => readSeries(join(FIXTURES, "nope.csv"), "x")).toThrow(/ENOENT/);
  });
});
