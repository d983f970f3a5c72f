import { describe, expect, it } from "vitest";

import {
  addDataRow,
  applyFittedValues,
  applyModelDefaults,
  buildFitPayload,
  canRun,
  formatValue,
  initialState,
  loadDetails,
  normalizePreview,
  paramProblems,
  removeDataRow,
  rowProblems,
  setFitAll,
} from "../src/state.js";
import type { ModelDefaults } from "../src/types.js";

const MS_DEFAULTS: ModelDefaults = {
  id: "ms",
  parameter_names: ["tau_in", "tau_out", "tau_close", "tau_open", "v_gate"],
  display_names: ["τ_in", "τ_out", "τ_close", "τ_open", "v_gate"],
  state_labels: ["u", "h"],
  default_bounds: [
    { name: "tau_in", min: 0.15, max: 0.6 },
    { name: "tau_out", min: 3, max: 12 },
    { name: "tau_close", min: 75, max: 300 },
    { name: "tau_open", min: 60, max: 240 },
    { name: "v_gate", min: 0.065, max: 0.26 },
  ],
  default_normalize_to: 1.0,
  default_stimulus: { kind: "square", magnitude: 0.2, duration: 2.0 },
};

function readyState() {
  const state = initialState();
  applyModelDefaults(state, MS_DEFAULTS);
  const row = addDataRow(state);
  row.samples = [0, 0.5, 1.0, 0.2];
  row.fileName = "cl500.txt";
  row.cycleLength = 500;
  return state;
}

describe("model defaults", () => {
  it("mirrors the catalog into the parameter table", () => {
    const state = initialState();
    applyModelDefaults(state, MS_DEFAULTS);
    expect(state.paramRows).toHaveLength(5);
    expect(state.paramRows[0]).toMatchObject({
      name: "tau_in",
      min: 0.15,
      max: 0.6,
      fit: true,
      value: null,
    });
    expect(state.normalizeTo).toBe(1.0);
  });

  it("rebuilds the table on model switch", () => {
    const state = readyState();
    state.paramRows[0].value = 0.3;
    applyModelDefaults(state, { ...MS_DEFAULTS, id: "mms" });
    expect(state.model).toBe("mms");
    expect(state.paramRows[0].value).toBeNull();
  });
});

describe("data rows", () => {
  it("adds and removes rows", () => {
    const state = initialState();
    const a = addDataRow(state);
    const b = addDataRow(state);
    expect(state.dataRows).toHaveLength(2);
    removeDataRow(state, a.id);
    expect(state.dataRows.map((r) => r.id)).toEqual([b.id]);
  });

  it("flags missing file and cycle length", () => {
    const state = initialState();
    const row = addDataRow(state);
    const problems = rowProblems(row);
    expect(problems.join(" ")).toMatch(/cycle length/);
    expect(problems.join(" ")).toMatch(/file/);
  });

  it("validates APD rows through the list parser", () => {
    const state = initialState();
    const row = addDataRow(state);
    row.apdOnly = true;
    row.cycleLength = 500;
    row.apdText = "210,,195";
    expect(rowProblems(row).join(" ")).toMatch(/entry 2/);
    row.apdText = "210, 195";
    expect(rowProblems(row)).toEqual([]);
  });
});

describe("run gating", () => {
  it("disabled with no rows and after removing the last row", () => {
    const state = initialState();
    applyModelDefaults(state, MS_DEFAULTS);
    expect(canRun(state)).toBe(false);
    const row = addDataRow(state);
    expect(canRun(state)).toBe(false); // row invalid
    row.samples = [0, 1];
    row.cycleLength = 500;
    expect(canRun(state)).toBe(true);
    removeDataRow(state, row.id);
    expect(canRun(state)).toBe(false);
  });

  it("requires values for non-fitted parameters", () => {
    const state = readyState();
    state.paramRows[2].fit = false;
    expect(paramProblems(state).join(" ")).toMatch(/tau_close/);
    expect(canRun(state)).toBe(false);
    state.paramRows[2].value = 150;
    expect(canRun(state)).toBe(true);
  });

  it("fit all / fit none toggle every checkbox", () => {
    const state = readyState();
    setFitAll(state, false);
    expect(state.paramRows.every((r) => !r.fit)).toBe(true);
    setFitAll(state, true);
    expect(state.paramRows.every((r) => r.fit)).toBe(true);
  });
});

describe("payload building", () => {
  it("includes both dataset kinds and the pso block", () => {
    const state = readyState();
    const apd = addDataRow(state);
    apd.apdOnly = true;
    apd.cycleLength = 260;
    apd.apdText = "210, 195";
    apd.apdThreshold = 0.8;
    apd.weight = 1000;
    state.numStimuli = 2;
    const payload = buildFitPayload(state, 42);
    expect(payload.model).toBe("ms");
    expect(payload.seed).toBe(42);
    expect(payload.datasets).toHaveLength(2);
    expect(payload.datasets[0]).toMatchObject({
      kind: "voltage",
      cycle_length: 500,
      samples: [0, 0.5, 1.0, 0.2],
    });
    expect(payload.datasets[1]).toMatchObject({
      kind: "apd",
      targets: [210, 195],
      threshold: 0.8,
      weight: 1000,
    });
    expect(payload.pso.particles).toBe(4096);
    expect(payload.pso.chi).toBeNull();
    expect(payload.parameters.tau_in).toMatchObject({
      fit: true,
      min: 0.15,
      max: 0.6,
    });
  });

  it("sends biphasic stimulus fields when selected", () => {
    const state = readyState();
    state.stimulus.biphasic = true;
    state.stimulus.b = 7.5;
    const payload = buildFitPayload(state, 1);
    expect(payload.stimulus).toMatchObject({ kind: "biphasic", b: 7.5 });
  });
});

describe("results display", () => {
  it("fills fitted values shown at three decimals", () => {
    const state = readyState();
    applyFittedValues(state, { tau_in: 0.30001, tau_out: 6.0 });
    expect(formatValue(state.paramRows[0].value)).toBe("0.300");
    expect(formatValue(state.paramRows[1].value)).toBe("6.000");
  });

  it("keeps convergence point count at iterations + 1", () => {
    // mirror of the monitor loop: one point per on-iteration event
    const state = readyState();
    state.hyper.iterations = 10;
    const convergence: number[] = [];
    for (let i = 0; i <= state.hyper.iterations; i++) {
      convergence.push(1 / (i + 1));
    }
    expect(convergence).toHaveLength(state.hyper.iterations + 1);
  });
});

describe("normalization preview", () => {
  it("rescales to [0, normalizeTo]", () => {
    expect(normalizePreview([2, 4, 6], 1.0)).toEqual([0, 0.5, 1.0]);
  });

  it("is disabled when normalize-to is 0", () => {
    expect(normalizePreview([2, 4, 6], 0)).toBeNull();
  });

  it("refuses constant data", () => {
    expect(normalizePreview([3, 3], 1.0)).toBeNull();
  });
});

describe("run details roundtrip", () => {
  it("loads a details document back into the form", () => {
    const state = initialState();
    applyModelDefaults(state, MS_DEFAULTS);
    const details = {
      config: {
        model: "ms",
        normalize_to: 0.0,
        num_stimuli: 2,
        pre_stimuli: 4,
        sample_interval: 1.0,
        seed: 77,
        stimulus: { kind: "biphasic", i_mag: 0.5, a: 0.7, b: 7, c: 6.5,
                    duration: 10 },
        pso: { phi1: 2.05, phi2: 2.05, chi: null, gamma: 0.05,
               particles: 256, iterations: 16 },
        parameters: {
          tau_close: { fit: false, value: 150.0 },
          v_gate: { fit: true, min: 0.1, max: 0.2 },
        },
        datasets: [
          { kind: "voltage", cycle_length: 500, weight: 1, name: "a",
            samples: [0, 1, 0.5] },
          { kind: "apd", cycle_length: 260, weight: 1000, threshold: 0.8,
            targets: [210, 195] },
        ],
      },
    };
    loadDetails(state, details);
    expect(state.seed).toBe(77);
    expect(state.numStimuli).toBe(2);
    expect(state.stimulus.biphasic).toBe(true);
    expect(state.hyper.particles).toBe(256);
    const tauClose = state.paramRows.find((r) => r.name === "tau_close")!;
    expect(tauClose.fit).toBe(false);
    expect(tauClose.value).toBe(150);
    const vGate = state.paramRows.find((r) => r.name === "v_gate")!;
    expect(vGate.min).toBe(0.1);
    expect(state.dataRows).toHaveLength(2);
    expect(state.dataRows[0].samples).toEqual([0, 1, 0.5]);
    expect(state.dataRows[1].apdOnly).toBe(true);
    expect(state.dataRows[1].apdText).toBe("210, 195");
  });
});
