// UI state and the pure transitions behind the page. No fitness math lives
// here: every displayed number comes back from the service.

import { parseApdList } from "./files.js";
import type {
  DatasetPayload,
  FitPayload,
  ModelDefaults,
  ParameterEntry,
} from "./types.js";

export interface ParamRow {
  name: string;
  display: string;
  value: number | null;
  min: number;
  max: number;
  fit: boolean;
}

export interface DataRow {
  id: number;
  apdOnly: boolean;
  fileName: string | null;
  samples: number[] | null;
  apdText: string;
  apdThreshold: number;
  cycleLength: number | null;
  weight: number;
  plotted: boolean;
}

export interface StimulusForm {
  biphasic: boolean;
  magnitude: number;
  duration: number;
  iMag: number;
  a: number;
  b: number;
  c: number;
  biphasicDuration: number;
}

export interface HyperForm {
  phi1: number;
  phi2: number;
  chi: number | null;
  gamma: number;
  particles: number;
  iterations: number;
}

export interface UiState {
  model: string;
  displayNames: Record<string, string>;
  paramRows: ParamRow[];
  dataRows: DataRow[];
  nextRowId: number;
  numStimuli: number;
  preStimuli: number;
  sampleInterval: number;
  normalizeTo: number;
  stimulus: StimulusForm;
  hyper: HyperForm;
  seed: number | null; // null draws a fresh seed per run
}

export function defaultStimulus(): StimulusForm {
  return {
    biphasic: false,
    magnitude: 0.2,
    duration: 2.0,
    iMag: 0.4,
    a: 0.725,
    b: 7.0,
    c: 6.72,
    biphasicDuration: 10.0,
  };
}

export function defaultHyper(): HyperForm {
  return {
    phi1: 2.05,
    phi2: 2.05,
    chi: null,
    gamma: 0.05,
    particles: 4096,
    iterations: 32,
  };
}

export function initialState(): UiState {
  return {
    model: "ms",
    displayNames: {},
    paramRows: [],
    dataRows: [],
    nextRowId: 1,
    numStimuli: 1,
    preStimuli: 0,
    sampleInterval: 1.0,
    normalizeTo: 1.0,
    stimulus: defaultStimulus(),
    hyper: defaultHyper(),
    seed: null,
  };
}

/** Rebuild the parameter table from a model's catalog defaults. */
export function applyModelDefaults(state: UiState, doc: ModelDefaults): void {
  state.model = doc.id;
  state.displayNames = {};
  state.paramRows = doc.default_bounds.map((row, i) => {
    state.displayNames[row.name] = doc.display_names[i];
    return {
      name: row.name,
      display: doc.display_names[i],
      value: null,
      min: row.min,
      max: row.max,
      fit: true,
    };
  });
  state.normalizeTo = doc.default_normalize_to;
}

export function addDataRow(state: UiState): DataRow {
  const row: DataRow = {
    id: state.nextRowId++,
    apdOnly: false,
    fileName: null,
    samples: null,
    apdText: "",
    apdThreshold: 0.1,
    cycleLength: null,
    weight: 1.0,
    plotted: false,
  };
  state.dataRows.push(row);
  return row;
}

export function removeDataRow(state: UiState, id: number): void {
  state.dataRows = state.dataRows.filter((row) => row.id !== id);
}

export function setFitAll(state: UiState, fit: boolean): void {
  for (const row of state.paramRows) row.fit = fit;
}

/** Problems that keep a data row from being submitted. */
export function rowProblems(row: DataRow): string[] {
  const problems: string[] = [];
  if (row.cycleLength === null || !(row.cycleLength > 0)) {
    problems.push("cycle length required");
  }
  if (!(row.weight >= 0)) {
    problems.push("weight must be non-negative");
  }
  if (row.apdOnly) {
    try {
      parseApdList(row.apdText);
    } catch (err) {
      problems.push(String((err as Error).message));
    }
    if (!(row.apdThreshold > 0)) {
      problems.push("APD threshold must be positive");
    }
  } else if (row.samples === null) {
    problems.push("data file required");
  }
  return problems;
}

export function paramProblems(state: UiState): string[] {
  const problems: string[] = [];
  for (const row of state.paramRows) {
    if (!row.fit && row.value === null) {
      problems.push(`${row.name}: value required when not fit`);
    }
    if (row.fit && !(row.min <= row.max)) {
      problems.push(`${row.name}: min exceeds max`);
    }
  }
  return problems;
}

/** The Run button is enabled only when every row is valid. */
export function canRun(state: UiState): boolean {
  if (state.dataRows.length === 0) return false;
  if (state.dataRows.some((row) => rowProblems(row).length > 0)) return false;
  if (paramProblems(state).length > 0) return false;
  return true;
}

function datasetPayload(row: DataRow): DatasetPayload {
  if (row.apdOnly) {
    return {
      kind: "apd",
      cycle_length: row.cycleLength as number,
      weight: row.weight,
      name: `apd@${row.cycleLength}ms`,
      targets: parseApdList(row.apdText),
      threshold: row.apdThreshold,
    };
  }
  return {
    kind: "voltage",
    cycle_length: row.cycleLength as number,
    weight: row.weight,
    name: row.fileName ?? `voltage@${row.cycleLength}ms`,
    samples: row.samples as number[],
  };
}

export function buildFitPayload(state: UiState, seed: number): FitPayload {
  const parameters: Record<string, ParameterEntry> = {};
  for (const row of state.paramRows) {
    const entry: ParameterEntry = { fit: row.fit, min: row.min, max: row.max };
    if (row.value !== null) entry.value = row.value;
    parameters[row.name] = entry;
  }
  const stimulus = state.stimulus.biphasic
    ? {
        kind: "biphasic",
        i_mag: state.stimulus.iMag,
        a: state.stimulus.a,
        b: state.stimulus.b,
        c: state.stimulus.c,
        duration: state.stimulus.biphasicDuration,
      }
    : {
        kind: "square",
        magnitude: state.stimulus.magnitude,
        duration: state.stimulus.duration,
      };
  return {
    model: state.model,
    normalize_to: state.normalizeTo,
    num_stimuli: state.numStimuli,
    pre_stimuli: state.preStimuli,
    dt: 0.02,
    sample_interval: state.sampleInterval,
    stimulus,
    datasets: state.dataRows.map(datasetPayload),
    parameters,
    pso: {
      phi1: state.hyper.phi1,
      phi2: state.hyper.phi2,
      chi: state.hyper.chi,
      gamma: state.hyper.gamma,
      particles: state.hyper.particles,
      iterations: state.hyper.iterations,
    },
    seed,
  };
}

/** Fill the parameter table with fitted values, three decimals for display. */
export function applyFittedValues(
  state: UiState,
  best: Record<string, number>,
): void {
  for (const row of state.paramRows) {
    if (row.name in best) {
      row.value = best[row.name];
    }
  }
}

export function formatValue(value: number | null): string {
  return value === null ? "" : value.toFixed(3);
}

/** Normalization preview for a loaded voltage row; null when bypassed. */
export function normalizePreview(
  samples: number[],
  normalizeTo: number,
): number[] | null {
  if (normalizeTo === 0) return null;
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of samples) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  if (hi === lo) return null;
  return samples.map((v) => normalizeTo * ((v - lo) / (hi - lo)));
}

/** Load a run-details document back into the form (the config echo). */
export function loadDetails(state: UiState, doc: Record<string, any>): void {
  const config = "config" in doc ? doc.config : doc;
  state.model = String(config.model);
  state.normalizeTo = Number(config.normalize_to ?? state.normalizeTo);
  state.numStimuli = Number(config.num_stimuli ?? 1);
  state.preStimuli = Number(config.pre_stimuli ?? 0);
  state.sampleInterval = Number(config.sample_interval ?? 1.0);
  state.seed = config.seed === undefined ? null : Number(config.seed);

  const stim = config.stimulus ?? {};
  if (stim.kind === "biphasic") {
    state.stimulus.biphasic = true;
    state.stimulus.iMag = Number(stim.i_mag ?? 0.4);
    state.stimulus.a = Number(stim.a ?? 0.725);
    state.stimulus.b = Number(stim.b ?? 7.0);
    state.stimulus.c = Number(stim.c ?? 6.72);
    state.stimulus.biphasicDuration = Number(stim.duration ?? 10.0);
  } else {
    state.stimulus.biphasic = false;
    state.stimulus.magnitude = Number(stim.magnitude ?? 0.2);
    state.stimulus.duration = Number(stim.duration ?? 2.0);
  }

  const pso = config.pso ?? {};
  state.hyper.phi1 = Number(pso.phi1 ?? 2.05);
  state.hyper.phi2 = Number(pso.phi2 ?? 2.05);
  state.hyper.chi = pso.chi === null || pso.chi === undefined ? null : Number(pso.chi);
  state.hyper.gamma = Number(pso.gamma ?? 0.05);
  state.hyper.particles = Number(pso.particles ?? 4096);
  state.hyper.iterations = Number(pso.iterations ?? 32);

  const parameters = config.parameters ?? {};
  for (const row of state.paramRows) {
    const entry = parameters[row.name];
    if (!entry) continue;
    row.fit = Boolean(entry.fit ?? true);
    if (entry.min !== undefined) row.min = Number(entry.min);
    if (entry.max !== undefined) row.max = Number(entry.max);
    row.value = entry.value === undefined ? row.value : Number(entry.value);
  }

  state.dataRows = [];
  for (const ds of config.datasets ?? []) {
    const row = addDataRow(state);
    row.cycleLength = Number(ds.cycle_length);
    row.weight = Number(ds.weight ?? 1.0);
    if (ds.kind === "apd") {
      row.apdOnly = true;
      row.apdText = (ds.targets ?? []).join(", ");
      row.apdThreshold = Number(ds.threshold ?? 0.1);
    } else {
      row.samples = (ds.samples ?? []).map(Number);
      row.fileName = ds.name || "from details";
    }
  }
}
