// Thin client over the fit service HTTP API.

import type { FitPayload, JobDoc, ModelDefaults, ModelInfo } from "./types.js";

export class ApiError extends Error {
  constructor(
    message: string,
    public status: number,
    public fields: { field: string; message: string }[] = [],
  ) {
    super(message);
  }
}

async function checkJson(resp: Response): Promise<any> {
  if (resp.ok) return resp.json();
  let fields: { field: string; message: string }[] = [];
  let message = `${resp.status} ${resp.statusText}`;
  try {
    const body = await resp.json();
    if (body?.detail?.errors) {
      fields = body.detail.errors;
      message = fields.map((e) => `${e.field}: ${e.message}`).join("; ");
    } else if (typeof body?.detail === "string") {
      message = body.detail;
    }
  } catch {
    // keep the status text
  }
  throw new ApiError(message, resp.status, fields);
}

export class ApiClient {
  constructor(private base: string = "") {}

  async models(): Promise<ModelInfo[]> {
    return checkJson(await fetch(`${this.base}/models`));
  }

  async modelDefaults(id: string): Promise<ModelDefaults> {
    return checkJson(await fetch(`${this.base}/models/${id}/defaults`));
  }

  async submitFit(payload: FitPayload): Promise<string> {
    const resp = await fetch(`${this.base}/fits`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(payload),
    });
    const doc = await checkJson(resp);
    return doc.job_id as string;
  }

  async jobStatus(jobId: string): Promise<JobDoc> {
    return checkJson(await fetch(`${this.base}/fits/${jobId}`));
  }

  async cancel(jobId: string): Promise<void> {
    await checkJson(
      await fetch(`${this.base}/fits/${jobId}/cancel`, { method: "POST" }),
    );
  }

  async exportText(jobId: string, kind: string): Promise<string> {
    const resp = await fetch(`${this.base}/fits/${jobId}/export/${kind}`);
    if (!resp.ok) throw new ApiError(`export ${kind} failed`, resp.status);
    return resp.text();
  }

  /**
   * Subscribe to the progress stream. Returns a close function. Events carry
   * the service's per-iteration lowest error, unresampled.
   */
  progress(
    jobId: string,
    onPoint: (iteration: number, lowestError: number) => void,
    onEnd: (status: string) => void,
  ): () => void {
    const source = new EventSource(`${this.base}/fits/${jobId}/progress`);
    source.onmessage = (event) => {
      const doc = JSON.parse(event.data);
      onPoint(doc.iteration as number, doc.lowest_error as number);
    };
    source.addEventListener("end", (event) => {
      const doc = JSON.parse((event as MessageEvent).data);
      source.close();
      onEnd(doc.status as string);
    });
    source.onerror = () => {
      source.close();
      onEnd("failed");
    };
    return () => source.close();
  }
}
