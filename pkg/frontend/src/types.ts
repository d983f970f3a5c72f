// Payload shapes shared with the fit service.

export interface ModelInfo {
  id: string;
  parameters: number;
  default_normalize_to: number;
}

export interface BoundRow {
  name: string;
  min: number;
  max: number;
}

export interface ModelDefaults {
  id: string;
  parameter_names: string[];
  display_names: string[];
  state_labels: string[];
  default_bounds: BoundRow[];
  default_normalize_to: number;
  default_stimulus: { kind: string; magnitude: number; duration: number };
}

export interface DatasetPayload {
  kind: "voltage" | "apd";
  cycle_length: number;
  weight: number;
  name: string;
  samples?: number[];
  targets?: number[];
  threshold?: number;
}

export interface ParameterEntry {
  fit: boolean;
  min?: number;
  max?: number;
  value?: number;
}

export interface FitPayload {
  model: string;
  normalize_to: number;
  num_stimuli: number;
  pre_stimuli: number;
  dt: number;
  sample_interval: number;
  stimulus: Record<string, unknown>;
  datasets: DatasetPayload[];
  parameters: Record<string, ParameterEntry>;
  pso: {
    phi1: number;
    phi2: number;
    chi: number | null;
    gamma: number;
    particles: number;
    iterations: number;
  };
  seed: number;
}

export interface DatasetErrorRow {
  label: string;
  raw_error: number;
  normalized_error: number;
  weighted_error: number;
  shift?: number;
}

export interface FitResultDoc {
  best_params: Record<string, number>;
  best_error: number;
  history: number[];
  wall_time_s: number;
  iterations_completed: number;
  cancelled: boolean;
  per_dataset_errors: DatasetErrorRow[];
  traces: Record<string, number[]>;
}

export interface JobDoc {
  job_id: string;
  status: "queued" | "running" | "done" | "failed" | "cancelled";
  model: string;
  iterations_total: number;
  progress: number[];
  error: string | null;
  result: FitResultDoc | null;
}
