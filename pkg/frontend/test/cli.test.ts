import { mkdtempSync, readFileSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";
import { main } from "../src/cli.js";

const FIXTURES = join(__dirname, "fixtures");
const SPEC = join(FIXTURES, "circles_desk.json");
const LABELS = ["Neumann sum", "Pade extrapolation", "ORTHODIR (binomial)", "ORTHODIR (stable)"];

let dir: string;
let errors: string[];

beforeEach(() => {
  dir = mkdtempSync(join(tmpdir(), "plots-"));
  errors = [];
  vi.spyOn(console, "log").mockImplementation(() => {});
  vi.spyOn(console, "error").mockImplementation((...args: unknown[]) => {
    errors.push(args.join(" "));
  });
});

afterEach(() => {
  rmSync(dir, { recursive: true, force: true });
  vi.restoreAllMocks();
});

describe("render --spec", () => {
  it("renders the four-method desk bundle with a complete legend", () => {
    const out = join(dir, "desk.svg");
    expect(main(["render", "--spec", SPEC, "--output", out])).toBe(0);
    const svg = readFileSync(out, "utf-8");
    expect(svg.startsWith(`<?xml version="1.0"`)).toBe(true);
    expect(svg.match(/class="legend-label"/g)?.length).toBe(4);
    for (const label of LABELS) {
      expect(svg).toContain(`>${label}</text>`);
    }
  });

  it("writes byte-identical output on a second run", () => {
    const a = join(dir, "a.svg");
    const b = join(dir, "b.svg");
    expect(main(["render", "--spec", SPEC, "--output", a])).toBe(0);
    expect(main(["render", "--spec", SPEC, "--output", b])).toBe(0);
    expect(readFileSync(a).equals(readFileSync(b))).toBe(true);
  });

  it("fails with a message when a CSV is missing", () => {
    const spec = join(dir, "broken.json");
    writeFileSync(
      spec,
      JSON.stringify({ series: [{ path: "gone.csv", label: "x" }], output: "o.svg" }),
    );
    expect(main(["render", "--spec", spec])).toBe(1);
    expect(errors.join("\n")).toMatch(/gone\.csv/);
  });

  it("rejects a spec without series", () => {
    const spec = join(dir, "empty.json");
    writeFileSync(spec, JSON.stringify({ series: [], output: "o.svg" }));
    expect(main(["render", "--spec", spec])).toBe(1);
    expect(errors.join("\n")).toMatch(/non-empty series/);
  });
});

describe("render with positional CSVs", () => {
  it("uses --labels for the legend", () => {
    const out = join(dir, "two.svg");
    const code = main([
      "render",
      join(FIXTURES, "circles_desk_neumann.csv"),
      join(FIXTURES, "circles_desk_krylov_stable.csv"),
      "--labels", "plain sum,accelerated",
      "--title", "two methods",
      "--output", out,
    ]);
    expect(code).toBe(0);
    const svg = readFileSync(out, "utf-8");
    expect(svg).toContain(">plain sum</text>");
    expect(svg).toContain(">accelerated</text>");
    expect(svg).toContain(">two methods</text>");
  });

  it("falls back to file-name labels", () => {
    const out = join(dir, "one.svg");
    expect(
      main(["render", join(FIXTURES, "circles_desk_pade.csv"), "--output", out]),
    ).toBe(0);
    expect(readFileSync(out, "utf-8")).toContain(">circles_desk_pade</text>");
  });

  it("rejects a label-count mismatch", () => {
    expect(
      main([
        "render",
        join(FIXTURES, "circles_desk_pade.csv"),
        "--labels", "a,b",
        "--output", join(dir, "x.svg"),
      ]),
    ).toBe(1);
    expect(errors.join("\n")).toMatch(/2 labels for 1 CSVs/);
  });

  it("requires --output", () => {
    expect(main(["render", join(FIXTURES, "circles_desk_pade.csv")])).toBe(1);
    expect(errors.join("\n")).toMatch(/--output/);
  });
});

describe("argument errors", () => {
  it("rejects an unknown command", () => {
    expect(main(["plot"])).toBe(1);
    expect(errors.join("\n")).toMatch(/unknown command/);
  });

  it("rejects a bad y-range", () => {
    expect(
      main([
        "render",
        join(FIXTURES, "circles_desk_pade.csv"),
        "--y-range", "abc",
        "--output", join(dir, "x.svg"),
      ]),
    ).toBe(1);
    expect(errors.join("\n")).toMatch(/y-range/);
  });
});
