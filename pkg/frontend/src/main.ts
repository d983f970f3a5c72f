// Page wiring: model/parameter forms, data rows, run/monitor loop, plots.
// All numerics come from the service; this file only renders them.

import { ApiClient, ApiError } from "./api.js";
import { parseVoltageText } from "./files.js";
import { renderPlot, Series } from "./plot.js";
import {
  addDataRow,
  applyFittedValues,
  applyModelDefaults,
  buildFitPayload,
  canRun,
  DataRow,
  formatValue,
  initialState,
  loadDetails,
  normalizePreview,
  removeDataRow,
  rowProblems,
  setFitAll,
  UiState,
} from "./state.js";
import type { JobDoc } from "./types.js";

const api = new ApiClient("");
const state: UiState = initialState();

interface RunRecord {
  seed: number;
  bestError: number;
  jobId: string;
}

let activeJob: string | null = null;
let closeProgress: (() => void) | null = null;
let lastResultDoc: JobDoc | null = null;
let convergence: number[] = [];
const runHistory: RunRecord[] = [];

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function setBanner(text: string, isError = false): void {
  const banner = el<HTMLDivElement>("banner");
  banner.textContent = text;
  banner.className = isError ? "banner error" : "banner";
}

// ---------------------------------------------------------------------- model

async function switchModel(modelId: string): Promise<void> {
  const defaults = await api.modelDefaults(modelId);
  applyModelDefaults(state, defaults);
  renderParamTable();
  renderGlobalFields();
}

function renderParamTable(): void {
  const body = el<HTMLTableSectionElement>("param-rows");
  body.innerHTML = "";
  for (const row of state.paramRows) {
    const tr = document.createElement("tr");
    tr.innerHTML = `
      <td class="pname" title="${row.name}">${row.display}</td>
      <td><input class="pvalue" data-name="${row.name}" value="${formatValue(row.value)}"></td>
      <td><input class="pmin" data-name="${row.name}" value="${row.min}"></td>
      <td><input class="pmax" data-name="${row.name}" value="${row.max}"></td>
      <td><input type="checkbox" class="pfit" data-name="${row.name}" ${row.fit ? "checked" : ""}></td>`;
    body.appendChild(tr);
  }
  body.querySelectorAll<HTMLInputElement>(".pvalue").forEach((input) => {
    input.addEventListener("change", () => {
      const row = state.paramRows.find((r) => r.name === input.dataset.name);
      if (row) row.value = input.value.trim() === "" ? null : Number(input.value);
      refreshRunButton();
    });
  });
  body.querySelectorAll<HTMLInputElement>(".pmin").forEach((input) => {
    input.addEventListener("change", () => {
      const row = state.paramRows.find((r) => r.name === input.dataset.name);
      if (row) row.min = Number(input.value);
      refreshRunButton();
    });
  });
  body.querySelectorAll<HTMLInputElement>(".pmax").forEach((input) => {
    input.addEventListener("change", () => {
      const row = state.paramRows.find((r) => r.name === input.dataset.name);
      if (row) row.max = Number(input.value);
      refreshRunButton();
    });
  });
  body.querySelectorAll<HTMLInputElement>(".pfit").forEach((input) => {
    input.addEventListener("change", () => {
      const row = state.paramRows.find((r) => r.name === input.dataset.name);
      if (row) row.fit = input.checked;
      refreshRunButton();
    });
  });
}

// ----------------------------------------------------------------- data rows

function renderDataRows(): void {
  const host = el<HTMLDivElement>("data-rows");
  host.innerHTML = "";
  for (const row of state.dataRows) {
    const div = document.createElement("div");
    div.className = "data-row";
    const problems = rowProblems(row);
    const fileLabel = row.fileName ?? "no file";
    div.innerHTML = row.apdOnly
      ? `
      <label><input type="checkbox" class="apd-only" checked> APD only</label>
      <label>APDs <input class="apd-text" size="18" value="${row.apdText}"
             placeholder="210, 195"></label>
      <label>APD threshold <input class="apd-threshold" size="5"
             value="${row.apdThreshold}"></label>
      <label>Cycle length <input class="cl" size="6"
             value="${row.cycleLength ?? ""}"></label>
      <label>Fitting weight <input class="weight" size="5" value="${row.weight}"></label>
      <button class="plot-btn">Plot</button>
      <button class="remove-btn">Remove data</button>
      <span class="problems">${problems.join("; ")}</span>`
      : `
      <label><input type="checkbox" class="apd-only"> APD only</label>
      <label class="file-label">Browse
        <input type="file" class="file-input" hidden></label>
      <span class="file-name">${fileLabel}</span>
      <label>Cycle length <input class="cl" size="6"
             value="${row.cycleLength ?? ""}"></label>
      <label>Fitting weight <input class="weight" size="5" value="${row.weight}"></label>
      <button class="plot-btn">Plot</button>
      <button class="remove-btn">Remove data</button>
      <span class="problems">${problems.join("; ")}</span>`;
    wireDataRow(div, row);
    host.appendChild(div);
  }
  refreshRunButton();
}

function wireDataRow(div: HTMLDivElement, row: DataRow): void {
  div.querySelector<HTMLInputElement>(".apd-only")!
    .addEventListener("change", (event) => {
      row.apdOnly = (event.target as HTMLInputElement).checked;
      renderDataRows();
    });
  div.querySelector<HTMLInputElement>(".cl")!
    .addEventListener("change", (event) => {
      const raw = (event.target as HTMLInputElement).value.trim();
      row.cycleLength = raw === "" ? null : Number(raw);
      renderDataRows();
    });
  div.querySelector<HTMLInputElement>(".weight")!
    .addEventListener("change", (event) => {
      row.weight = Number((event.target as HTMLInputElement).value);
      renderDataRows();
    });
  div.querySelector<HTMLButtonElement>(".remove-btn")!
    .addEventListener("click", () => {
      removeDataRow(state, row.id);
      renderDataRows();
    });
  div.querySelector<HTMLButtonElement>(".plot-btn")!
    .addEventListener("click", () => plotRow(row));
  const fileInput = div.querySelector<HTMLInputElement>(".file-input");
  if (fileInput) {
    fileInput.addEventListener("change", async () => {
      const file = fileInput.files?.[0];
      if (!file) return;
      try {
        row.samples = parseVoltageText(await file.text());
        row.fileName = file.name;
        setBanner(`${file.name}: ${row.samples.length} samples`);
      } catch (err) {
        row.samples = null;
        row.fileName = null;
        setBanner(`${file.name}: ${(err as Error).message}`, true);
      }
      renderDataRows();
    });
  }
  const apdText = div.querySelector<HTMLInputElement>(".apd-text");
  if (apdText) {
    apdText.addEventListener("change", () => {
      row.apdText = apdText.value;
      renderDataRows();
    });
  }
  const apdThreshold = div.querySelector<HTMLInputElement>(".apd-threshold");
  if (apdThreshold) {
    apdThreshold.addEventListener("change", () => {
      row.apdThreshold = Number(apdThreshold.value);
      renderDataRows();
    });
  }
}

// --------------------------------------------------------------------- plots

function plotRow(row: DataRow): void {
  if (row.apdOnly || row.samples === null) {
    setBanner("nothing to plot for this row", true);
    return;
  }
  const preview = normalizePreview(row.samples, state.normalizeTo);
  const data = preview ?? row.samples;
  const xs = data.map((_, i) => i * state.sampleInterval);
  const series: Series[] = [
    { xs, ys: data, color: "black", width: 1.2 },
  ];
  // after a run the same button overlays the model fit in red
  const result = lastResultDoc?.result;
  if (result && row.cycleLength !== null) {
    const key = `${row.cycleLength}`;
    const model = result.traces[key];
    if (model) {
      const label = row.fileName ?? `voltage@${row.cycleLength}ms`;
      const errRow = result.per_dataset_errors.find((r) => r.label === label);
      const shift = errRow?.shift ?? 0;
      const ys = xs.map((_, i) => {
        const k = i + shift;
        return k >= 0 && k < model.length ? model[k] : 0;
      });
      series.push({ xs, ys, color: "#cc0000", width: 1.4 });
    }
  }
  el<HTMLDivElement>("overlay-plot").innerHTML = renderPlot(series, {
    width: 560,
    height: 320,
    pad: 34,
    xLabel: "time (ms)",
    yLabel: "voltage (model units)",
  });
}

function renderConvergence(): void {
  const host = el<HTMLDivElement>("convergence-plot");
  if (convergence.length === 0) {
    host.innerHTML = "";
    return;
  }
  const xs = convergence.map((_, i) => i);
  host.innerHTML = renderPlot(
    [{ xs, ys: convergence, color: "#1155cc", width: 1.4 }],
    {
      width: 560,
      height: 200,
      pad: 34,
      logY: true,
      xLabel: "iteration",
      yLabel: "lowest error",
    },
  );
}

// ----------------------------------------------------------------- run logic

function refreshRunButton(): void {
  el<HTMLButtonElement>("run-btn").disabled =
    activeJob !== null || !canRun(state);
}

async function onRun(): Promise<void> {
  const seed = state.seed ?? Math.floor(Math.random() * 2 ** 31);
  let payload;
  try {
    payload = buildFitPayload(state, seed);
  } catch (err) {
    setBanner((err as Error).message, true);
    return;
  }
  try {
    activeJob = await api.submitFit(payload);
  } catch (err) {
    if (err instanceof ApiError) {
      setBanner(err.message, true);
    } else {
      setBanner(String(err), true);
    }
    return;
  }
  lastResultDoc = null;
  convergence = [];
  renderConvergence();
  setBanner(`job ${activeJob} running (seed ${seed})`);
  el<HTMLButtonElement>("cancel-btn").disabled = false;
  refreshRunButton();
  const jobId = activeJob;
  closeProgress = api.progress(
    jobId,
    (iteration, lowestError) => {
      convergence.push(lowestError);
      el<HTMLSpanElement>("iteration-counter").textContent =
        `iteration ${iteration} / ${state.hyper.iterations}`;
      el<HTMLSpanElement>("best-error").textContent =
        `lowest error ${lowestError.toExponential(4)}`;
      renderConvergence();
    },
    (status) => void onJobEnd(jobId, seed, status),
  );
}

async function onJobEnd(jobId: string, seed: number, status: string):
    Promise<void> {
  closeProgress?.();
  closeProgress = null;
  activeJob = null;
  el<HTMLButtonElement>("cancel-btn").disabled = true;
  const doc = await api.jobStatus(jobId);
  lastResultDoc = doc;
  if (doc.result) {
    applyFittedValues(state, doc.result.best_params);
    renderParamTable();
    runHistory.push({ seed, bestError: doc.result.best_error, jobId });
    renderRunHistory();
    el<HTMLSpanElement>("best-error").textContent =
      `lowest error ${doc.result.best_error.toExponential(4)}`;
    const firstVoltage = state.dataRows.find((r) => !r.apdOnly);
    if (firstVoltage) plotRow(firstVoltage);
    el<HTMLButtonElement>("save-params-btn").disabled = false;
    el<HTMLButtonElement>("save-details-btn").disabled = false;
  }
  setBanner(doc.error ? `job ${status}: ${doc.error}` : `job ${status}`);
  refreshRunButton();
}

function renderRunHistory(): void {
  const host = el<HTMLUListElement>("run-history");
  host.innerHTML = "";
  for (const record of runHistory.slice().reverse()) {
    const li = document.createElement("li");
    li.textContent =
      `seed ${record.seed}: error ${record.bestError.toExponential(4)}`;
    host.appendChild(li);
  }
}

async function onCancel(): Promise<void> {
  if (activeJob) await api.cancel(activeJob);
}

function download(name: string, text: string): void {
  const blob = new Blob([text], { type: "text/plain" });
  const url = URL.createObjectURL(blob);
  const anchor = document.createElement("a");
  anchor.href = url;
  anchor.download = name;
  anchor.click();
  URL.revokeObjectURL(url);
}

async function onSave(kind: "parameters" | "details"): Promise<void> {
  if (!lastResultDoc) return;
  const text = await api.exportText(lastResultDoc.job_id, kind);
  const suffix = kind === "parameters" ? "parameters.tsv" : "run_details.json";
  download(`apfit_${suffix}`, text);
}

async function onLoadDetails(file: File): Promise<void> {
  try {
    const doc = JSON.parse(await file.text());
    const config = "config" in doc ? doc.config : doc;
    await switchModel(String(config.model));
    loadDetails(state, doc);
    el<HTMLSelectElement>("model-select").value = state.model;
    renderParamTable();
    renderGlobalFields();
    renderDataRows();
    setBanner(`loaded ${file.name}`);
  } catch (err) {
    setBanner(`could not load details: ${(err as Error).message}`, true);
  }
}

// ------------------------------------------------------------- global fields

function bindNumber(id: string, get: () => number,
                    set: (v: number) => void): void {
  const input = el<HTMLInputElement>(id);
  input.value = String(get());
  input.addEventListener("change", () => {
    set(Number(input.value));
    refreshRunButton();
  });
}

function renderGlobalFields(): void {
  bindNumber("num-stimuli", () => state.numStimuli,
             (v) => (state.numStimuli = v));
  bindNumber("pre-stimuli", () => state.preStimuli,
             (v) => (state.preStimuli = v));
  bindNumber("sample-interval", () => state.sampleInterval,
             (v) => (state.sampleInterval = v));
  bindNumber("normalize-to", () => state.normalizeTo,
             (v) => (state.normalizeTo = v));

  const biphasic = el<HTMLInputElement>("stim-biphasic");
  biphasic.checked = state.stimulus.biphasic;
  biphasic.onchange = () => {
    state.stimulus.biphasic = biphasic.checked;
    renderGlobalFields();
  };
  el<HTMLDivElement>("square-fields").hidden = state.stimulus.biphasic;
  el<HTMLDivElement>("biphasic-fields").hidden = !state.stimulus.biphasic;
  bindNumber("stim-magnitude", () => state.stimulus.magnitude,
             (v) => (state.stimulus.magnitude = v));
  bindNumber("stim-duration", () => state.stimulus.duration,
             (v) => (state.stimulus.duration = v));
  bindNumber("stim-imag", () => state.stimulus.iMag,
             (v) => (state.stimulus.iMag = v));
  bindNumber("stim-a", () => state.stimulus.a, (v) => (state.stimulus.a = v));
  bindNumber("stim-b", () => state.stimulus.b, (v) => (state.stimulus.b = v));
  bindNumber("stim-c", () => state.stimulus.c, (v) => (state.stimulus.c = v));
  bindNumber("stim-bi-duration", () => state.stimulus.biphasicDuration,
             (v) => (state.stimulus.biphasicDuration = v));

  bindNumber("pso-phi1", () => state.hyper.phi1,
             (v) => (state.hyper.phi1 = v));
  bindNumber("pso-phi2", () => state.hyper.phi2,
             (v) => (state.hyper.phi2 = v));
  const chi = el<HTMLInputElement>("pso-chi");
  chi.value = state.hyper.chi === null ? "" : String(state.hyper.chi);
  chi.onchange = () => {
    state.hyper.chi = chi.value.trim() === "" ? null : Number(chi.value);
  };
  bindNumber("pso-gamma", () => state.hyper.gamma,
             (v) => (state.hyper.gamma = v));
  bindNumber("pso-particles", () => state.hyper.particles,
             (v) => (state.hyper.particles = v));
  bindNumber("pso-iterations", () => state.hyper.iterations,
             (v) => (state.hyper.iterations = v));
  const seed = el<HTMLInputElement>("pso-seed");
  seed.value = state.seed === null ? "" : String(state.seed);
  seed.onchange = () => {
    state.seed = seed.value.trim() === "" ? null : Number(seed.value);
  };
}

// ---------------------------------------------------------------------- init

async function init(): Promise<void> {
  const select = el<HTMLSelectElement>("model-select");
  const models = await api.models();
  select.innerHTML = models
    .map((m) => `<option value="${m.id}">${m.id.toUpperCase()}</option>`)
    .join("");
  select.value = state.model;
  select.addEventListener("change", () => void switchModel(select.value));

  el<HTMLButtonElement>("fit-all-btn").addEventListener("click", () => {
    setFitAll(state, true);
    renderParamTable();
    refreshRunButton();
  });
  el<HTMLButtonElement>("fit-none-btn").addEventListener("click", () => {
    setFitAll(state, false);
    renderParamTable();
    refreshRunButton();
  });
  el<HTMLButtonElement>("add-data-btn").addEventListener("click", () => {
    addDataRow(state);
    renderDataRows();
  });
  el<HTMLButtonElement>("run-btn").addEventListener("click",
                                                    () => void onRun());
  el<HTMLButtonElement>("cancel-btn").addEventListener("click",
                                                       () => void onCancel());
  el<HTMLButtonElement>("save-params-btn").addEventListener(
    "click", () => void onSave("parameters"));
  el<HTMLButtonElement>("save-details-btn").addEventListener(
    "click", () => void onSave("details"));
  el<HTMLInputElement>("load-details-input").addEventListener(
    "change", (event) => {
      const file = (event.target as HTMLInputElement).files?.[0];
      if (file) void onLoadDetails(file);
    });

  await switchModel(state.model);
  addDataRow(state);
  renderDataRows();
  renderGlobalFields();
  refreshRunButton();
}

void init();
