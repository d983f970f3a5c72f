import { describe, expect, it } from "vitest";

import { linePath, renderPlot } from "../src/plot.js";

const OPTS = { width: 100, height: 80, pad: 10 };

describe("linePath", () => {
  it("maps the data box onto the padded plot box", () => {
    const path = linePath([0, 1], [0, 1], { lo: 0, hi: 1 }, { lo: 0, hi: 1 },
                          OPTS);
    expect(path).toBe("M10.00,70.00 L90.00,10.00");
  });

  it("lifts the pen over non-finite values", () => {
    const path = linePath([0, 1, 2], [0, NaN, 1], { lo: 0, hi: 2 },
                          { lo: 0, hi: 1 }, OPTS);
    expect(path).toBe("M10.00,70.00 M90.00,10.00");
  });
});

describe("renderPlot", () => {
  it("draws one path per series with its color", () => {
    const svg = renderPlot(
      [
        { xs: [0, 1], ys: [0, 1], color: "black" },
        { xs: [0, 1], ys: [1, 0], color: "#cc0000" },
      ],
      OPTS,
    );
    expect(svg).toContain('stroke="black"');
    expect(svg).toContain('stroke="#cc0000"');
    expect((svg.match(/<path /g) ?? []).length).toBe(2);
    expect(svg.startsWith("<svg")).toBe(true);
  });

  it("filters non-positive values on a log axis", () => {
    const svg = renderPlot(
      [{ xs: [0, 1, 2], ys: [0, 10, 1], color: "blue" }],
      { ...OPTS, logY: true },
    );
    // the zero sample cannot appear; the path starts at the second point
    expect(svg).toContain("M");
    expect(svg).not.toContain("NaN");
  });

  it("labels axes when asked", () => {
    const svg = renderPlot([{ xs: [0, 1], ys: [0, 1], color: "black" }],
                           { ...OPTS, xLabel: "time (ms)", yLabel: "u" });
    expect(svg).toContain("time (ms)");
  });
});
