"""Job assembly, fit execution, and export artifacts.

``FitConfig`` captures everything a fit needs; ``build_job`` validates it
(collecting every violation before failing) and resolves model defaults.
``run_fit`` drives the swarm and packages the result with its convergence
history, per-dataset error breakdown, best-fit traces, and a run-details
document sufficient to reproduce the run bit-for-bit.
"""

from __future__ import annotations

import json
import math
import time
import statistics
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from typing import Callable

import numpy as np

from . import __version__
from .dataio import ApdDataset, DataError, Dataset, VoltageDataset, normalize
from .fitness import (ALIGNMENT_MARGIN_SAMPLES, EvalContext, FitnessBreakdown,
                      SENTINEL)
from .models import Bounds, ModelId, model_spec
from .pso import PsoHyper, run_swarm
from .simulator import PacingConfig, Trace, simulate
from .stimulus import BiphasicStimulus, SquareStimulus, StimulusConfig

__all__ = [
    "ConfigError",
    "FitConfig",
    "FitJob",
    "FitResult",
    "BenchReport",
    "build_job",
    "run_fit",
    "bench",
    "export_parameters",
    "export_run_details",
    "export_trace_csv",
    "export_convergence_csv",
    "load_run_details",
    "config_to_dict",
    "config_from_dict",
]


class ConfigError(ValueError):
    """One or more configuration violations, each tagged with a field path."""

    def __init__(self, errors: list[tuple[str, str]]):
        self.errors = errors
        lines = "; ".join(f"{path}: {msg}" for path, msg in errors)
        super().__init__(lines)


@dataclass(frozen=True)
class FitConfig:
    """Complete description of one fitting job.

    Voltage datasets hold raw samples; normalization (to ``normalize_to``,
    or none when it is 0) happens during job building. ``fit_mask`` defaults
    to fitting every parameter; non-fitted parameters need an entry in
    ``fixed_values``.
    """

    model: ModelId
    datasets: tuple[Dataset, ...]
    normalize_to: float | None = None  # None: model default; 0: bypass
    num_stimuli: int = 1
    pre_stimuli: int = 0
    dt: float = 0.02
    sample_interval: float = 1.0
    stimulus: StimulusConfig = field(default_factory=SquareStimulus)
    fit_mask: dict[str, bool] | None = None
    fixed_values: dict[str, float] = field(default_factory=dict)
    bounds: dict[str, tuple[float, float]] = field(default_factory=dict)
    hyper: PsoHyper = field(default_factory=PsoHyper)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "model", ModelId(self.model))
        object.__setattr__(self, "datasets", tuple(self.datasets))


@dataclass(frozen=True)
class FitJob:
    """A validated, fully-resolved job ready to run."""

    config: FitConfig
    bounds: Bounds
    datasets: tuple[Dataset, ...]  # voltage data normalized
    normalize_to: float
    parameter_names: tuple[str, ...]
    context: EvalContext


def build_job(config: FitConfig, margin: int = ALIGNMENT_MARGIN_SAMPLES) -> FitJob:
    """Validate ``config`` and resolve defaults into a runnable job.

    All violations are collected and reported together, each with the path
    of the offending field.
    """
    errors: list[tuple[str, str]] = []
    spec = model_spec(config.model)

    normalize_to = (spec.default_normalize_to
                    if config.normalize_to is None else config.normalize_to)
    if normalize_to < 0:
        errors.append(("normalize_to", "must be non-negative"))

    if config.num_stimuli < 1:
        errors.append(("num_stimuli", "must be at least 1"))
    if config.pre_stimuli < 0:
        errors.append(("pre_stimuli", "must be non-negative"))

    if not config.datasets:
        errors.append(("datasets", "at least one dataset is required"))

    # pacing validity, checked once per distinct cycle length
    for cl in {ds.cycle_length for ds in config.datasets}:
        try:
            PacingConfig(cl, max(config.num_stimuli, 1),
                         max(config.pre_stimuli, 0), config.dt,
                         config.sample_interval)
        except ValueError as exc:
            errors.append((f"pacing(cl={cl:g})", str(exc)))

    resolved: list[Dataset] = []
    for i, ds in enumerate(config.datasets):
        path = f"datasets[{i}]"
        if isinstance(ds, VoltageDataset):
            expected = config.num_stimuli * ds.cycle_length / config.sample_interval
            if abs(ds.samples.size - expected) > 1:
                errors.append((
                    f"{path}.samples",
                    f"{ds.samples.size} samples but num_stimuli x "
                    f"cycle_length / sample_interval = {expected:g}"))
                continue
            if normalize_to != 0:
                try:
                    samples = normalize(ds.samples, normalize_to)
                except DataError as exc:
                    errors.append((f"{path}.samples", str(exc)))
                    continue
                ds = VoltageDataset(samples, ds.cycle_length, ds.weight,
                                    ds.source_name)
            resolved.append(ds)
        else:
            if len(ds.targets) != config.num_stimuli:
                errors.append((
                    f"{path}.targets",
                    f"{len(ds.targets)} APD targets but num_stimuli is "
                    f"{config.num_stimuli}"))
            if normalize_to != 0 and not ds.threshold < normalize_to:
                errors.append((
                    f"{path}.threshold",
                    f"must be below normalize_to ({normalize_to:g})"))
            resolved.append(ds)

    fit_mask = dict.fromkeys(spec.parameter_names, True)
    if config.fit_mask is not None:
        for name, flag in config.fit_mask.items():
            if name not in fit_mask:
                errors.append((f"fit_mask.{name}", "unknown parameter"))
            else:
                fit_mask[name] = bool(flag)
    for name in config.fixed_values:
        if name not in fit_mask:
            errors.append((f"fixed_values.{name}", "unknown parameter"))
    for name in config.bounds:
        if name not in fit_mask:
            errors.append((f"bounds.{name}", "unknown parameter"))

    lo = np.empty(spec.n_parameters)
    hi = np.empty(spec.n_parameters)
    for i, name in enumerate(spec.parameter_names):
        default_lo, default_hi = spec.default_bounds[i]
        if fit_mask[name]:
            blo, bhi = config.bounds.get(name, (default_lo, default_hi))
            if not (math.isfinite(blo) and math.isfinite(bhi)):
                errors.append((f"bounds.{name}", "bounds must be finite"))
                blo, bhi = default_lo, default_hi
            if blo > bhi:
                errors.append((f"bounds.{name}",
                               f"min {blo:g} exceeds max {bhi:g}"))
                blo, bhi = default_hi, default_hi
            lo[i], hi[i] = blo, bhi
        else:
            if name not in config.fixed_values:
                errors.append((
                    f"fixed_values.{name}",
                    "a value is required for a parameter that is not fit"))
                lo[i] = hi[i] = default_lo
                continue
            value = config.fixed_values[name]
            if not math.isfinite(value):
                errors.append((f"fixed_values.{name}", "must be finite"))
                value = default_lo
            lo[i] = hi[i] = value

    if errors:
        raise ConfigError(errors)

    context = EvalContext(
        model=config.model,
        datasets=resolved,
        stim=config.stimulus,
        num_stimuli=config.num_stimuli,
        pre_stimuli=config.pre_stimuli,
        dt=config.dt,
        sample_interval=config.sample_interval,
        normalize_to=normalize_to,
        margin=margin,
    )
    return FitJob(
        config=config,
        bounds=Bounds(lo, hi),
        datasets=tuple(resolved),
        normalize_to=normalize_to,
        parameter_names=spec.parameter_names,
        context=context,
    )


@dataclass(frozen=True)
class FitResult:
    model: ModelId
    parameter_names: tuple[str, ...]
    best_params: np.ndarray
    best_error: float
    history: np.ndarray
    breakdown: FitnessBreakdown
    best_traces: dict[float, Trace]
    wall_time_s: float
    config: FitConfig
    iterations_completed: int
    cancelled: bool
    started: str
    finished: str

    @property
    def best_params_by_name(self) -> dict[str, float]:
        return dict(zip(self.parameter_names, map(float, self.best_params)))


def run_fit(
    config: FitConfig | FitJob,
    on_iteration: Callable[[int, float], None] | None = None,
    should_stop: Callable[[], bool] | None = None,
) -> FitResult:
    """Run the full fit: validate, optimize, and package the result.

    Wall time covers the swarm optimization only, not validation or export.
    """
    job = config if isinstance(config, FitJob) else build_job(config)
    cfg = job.config
    started = datetime.now(timezone.utc).isoformat()
    t0 = time.perf_counter()
    run = run_swarm(job.bounds, cfg.hyper, cfg.seed,
                    job.context.evaluate_batch, on_iteration, should_stop)
    wall = time.perf_counter() - t0
    finished = datetime.now(timezone.utc).isoformat()

    _, breakdown = job.context.evaluate(run.best_position)
    best_traces = {
        cl: simulate(cfg.model, run.best_position, cfg.stimulus,
                     job.context.pacing_for(cl),
                     margin_samples=job.context.margin)
        for cl in job.context.distinct_cycle_lengths
    }
    return FitResult(
        model=cfg.model,
        parameter_names=job.parameter_names,
        best_params=run.best_position,
        best_error=run.best_error,
        history=run.history,
        breakdown=breakdown,
        best_traces=best_traces,
        wall_time_s=wall,
        config=cfg,
        iterations_completed=run.iterations_completed,
        cancelled=run.cancelled,
        started=started,
        finished=finished,
    )


# ---------------------------------------------------------------------------
# Config serialization (shared by CLI --config, the HTTP API, run details)
# ---------------------------------------------------------------------------


def _stimulus_to_dict(stim: StimulusConfig) -> dict:
    if isinstance(stim, SquareStimulus):
        return {"kind": "square", "magnitude": stim.magnitude,
                "duration": stim.duration}
    return {"kind": "biphasic", "i_mag": stim.i_mag, "a": stim.a,
            "b": stim.b, "c": stim.c, "duration": stim.duration}


def _stimulus_from_dict(doc: dict) -> StimulusConfig:
    kind = doc.get("kind", "square")
    if kind == "square":
        return SquareStimulus(
            magnitude=float(doc.get("magnitude", 0.2)),
            duration=float(doc.get("duration", 2.0)))
    if kind == "biphasic":
        return BiphasicStimulus(
            i_mag=float(doc.get("i_mag", 0.4)),
            a=float(doc.get("a", 0.725)),
            b=float(doc.get("b", 7.0)),
            c=float(doc.get("c", 6.72)),
            duration=float(doc.get("duration", 10.0)))
    raise DataError(f"unknown stimulus kind {kind!r}")


def _dataset_to_dict(ds: Dataset) -> dict:
    if isinstance(ds, VoltageDataset):
        return {
            "kind": "voltage",
            "cycle_length": ds.cycle_length,
            "weight": ds.weight,
            "name": ds.source_name,
            "samples": [float(v) for v in ds.samples],
        }
    return {
        "kind": "apd",
        "cycle_length": ds.cycle_length,
        "weight": ds.weight,
        "name": ds.source_name,
        "threshold": ds.threshold,
        "targets": list(ds.targets),
    }


def _dataset_from_dict(doc: dict) -> Dataset:
    kind = doc.get("kind", "voltage")
    if kind == "voltage":
        return VoltageDataset(
            samples=np.asarray(doc["samples"], dtype=float),
            cycle_length=float(doc["cycle_length"]),
            weight=float(doc.get("weight", 1.0)),
            source_name=str(doc.get("name", "")))
    if kind == "apd":
        return ApdDataset(
            targets=tuple(float(t) for t in doc["targets"]),
            threshold=float(doc["threshold"]),
            cycle_length=float(doc["cycle_length"]),
            weight=float(doc.get("weight", 1.0)),
            source_name=str(doc.get("name", "")))
    raise DataError(f"unknown dataset kind {kind!r}")


def config_to_dict(config: FitConfig) -> dict:
    parameters = {}
    spec = model_spec(config.model)
    mask = dict.fromkeys(spec.parameter_names, True)
    if config.fit_mask:
        mask.update(config.fit_mask)
    for name in spec.parameter_names:
        entry: dict = {"fit": bool(mask.get(name, True))}
        if name in config.bounds:
            entry["min"], entry["max"] = config.bounds[name]
        if name in config.fixed_values:
            entry["value"] = config.fixed_values[name]
        parameters[name] = entry
    return {
        "model": config.model.value,
        "normalize_to": config.normalize_to,
        "num_stimuli": config.num_stimuli,
        "pre_stimuli": config.pre_stimuli,
        "dt": config.dt,
        "sample_interval": config.sample_interval,
        "stimulus": _stimulus_to_dict(config.stimulus),
        "datasets": [_dataset_to_dict(ds) for ds in config.datasets],
        "parameters": parameters,
        "pso": {
            "phi1": config.hyper.phi1,
            "phi2": config.hyper.phi2,
            "chi": config.hyper.chi,
            "gamma": config.hyper.gamma,
            "particles": config.hyper.particles,
            "iterations": config.hyper.iterations,
        },
        "seed": config.seed,
    }


def config_from_dict(doc: dict) -> FitConfig:
    try:
        model = ModelId(doc["model"])
    except (KeyError, ValueError):
        raise ConfigError([("model", f"unknown model {doc.get('model')!r}")])
    fit_mask: dict[str, bool] = {}
    fixed_values: dict[str, float] = {}
    bounds: dict[str, tuple[float, float]] = {}
    for name, entry in (doc.get("parameters") or {}).items():
        fit = bool(entry.get("fit", True))
        fit_mask[name] = fit
        if "value" in entry and entry["value"] is not None:
            fixed_values[name] = float(entry["value"])
        if "min" in entry or "max" in entry:
            spec = model_spec(model)
            try:
                idx = spec.index_of(name)
            except KeyError:
                bounds[name] = (float(entry.get("min", 0.0)),
                                float(entry.get("max", 0.0)))
                continue
            dlo, dhi = spec.default_bounds[idx]
            bounds[name] = (float(entry.get("min", dlo)),
                            float(entry.get("max", dhi)))
    pso_doc = doc.get("pso") or {}
    hyper = PsoHyper(
        phi1=float(pso_doc.get("phi1", 2.05)),
        phi2=float(pso_doc.get("phi2", 2.05)),
        chi=(None if pso_doc.get("chi") is None
             else float(pso_doc["chi"])),
        gamma=float(pso_doc.get("gamma", 0.05)),
        particles=int(pso_doc.get("particles", 4096)),
        iterations=int(pso_doc.get("iterations", 32)),
    )
    normalize_to = doc.get("normalize_to")
    return FitConfig(
        model=model,
        datasets=tuple(_dataset_from_dict(d) for d in doc.get("datasets", [])),
        normalize_to=None if normalize_to is None else float(normalize_to),
        num_stimuli=int(doc.get("num_stimuli", 1)),
        pre_stimuli=int(doc.get("pre_stimuli", 0)),
        dt=float(doc.get("dt", 0.02)),
        sample_interval=float(doc.get("sample_interval", 1.0)),
        stimulus=_stimulus_from_dict(doc.get("stimulus") or {}),
        fit_mask=fit_mask or None,
        fixed_values=fixed_values,
        bounds=bounds,
        hyper=hyper,
        seed=int(doc.get("seed", 0)),
    )


# ---------------------------------------------------------------------------
# Exports
# ---------------------------------------------------------------------------


def export_parameters(result: FitResult) -> str:
    """Tab-separated name/value lines in catalog order, three decimals."""
    lines = [
        f"{name}\t{value:.3f}"
        for name, value in zip(result.parameter_names, result.best_params)
    ]
    return "\n".join(lines) + "\n"


def _breakdown_to_list(breakdown: FitnessBreakdown) -> list[dict]:
    rows = []
    for row in breakdown.per_dataset:
        entry = {
            "label": row.label,
            "raw_error": row.raw_error,
            "normalized_error": row.normalized_error,
            "weighted_error": row.weighted_error,
        }
        if row.shift is not None:
            entry["shift"] = row.shift
        rows.append(entry)
    return rows


def export_run_details(result: FitResult) -> str:
    """Structured key-value document; reloadable as a config for reruns."""
    doc = {
        "tool": "apfit",
        "version": __version__,
        "started": result.started,
        "finished": result.finished,
        "wall_time_s": result.wall_time_s,
        "final_error": result.best_error,
        "iterations_completed": result.iterations_completed,
        "cancelled": result.cancelled,
        "chi_effective": result.config.hyper.effective_chi,
        "best_parameters": result.best_params_by_name,
        "per_dataset_errors": _breakdown_to_list(result.breakdown),
        "history": [float(v) for v in result.history],
        "config": config_to_dict(result.config),
    }
    return json.dumps(doc, indent=2) + "\n"


def load_run_details(text: str) -> FitConfig:
    """Re-load an exported run-details document as a runnable config."""
    doc = json.loads(text)
    return config_from_dict(doc["config"] if "config" in doc else doc)


def export_trace_csv(result: FitResult) -> str:
    """Best-fit trace vs data, one row per sample and cycle length.

    The model column is read at the alignment shift the fitness used, so the
    overlay matches the comparison exactly; indices outside the simulated
    window appear as the resting value 0.
    """
    lines = ["cycle_length_ms,time_ms,model_u,data_u"]
    shifts = result.breakdown.shifts_used
    for cl, trace in result.best_traces.items():
        data = next(
            (ds for ds in result.config.datasets
             if isinstance(ds, VoltageDataset) and ds.cycle_length == cl),
            None)
        job_data = None
        if data is not None:
            # re-normalize for display the same way the fit consumed it
            nt = result.config.normalize_to
            if nt is None:
                nt = model_spec(result.model).default_normalize_to
            job_data = data.samples if nt == 0 else normalize(data.samples, nt)
            shift = shifts.get(data.label, 0)
            n_rows = job_data.size
        else:
            shift = 0
            pacing = PacingConfig(cl, result.config.num_stimuli,
                                  result.config.pre_stimuli, result.config.dt,
                                  result.config.sample_interval)
            n_rows = pacing.n_samples
        m = trace.samples
        for i in range(n_rows):
            k = i + shift
            model_u = float(m[k]) if 0 <= k < m.size else 0.0
            t = i * result.config.sample_interval
            if job_data is None:
                lines.append(f"{cl:g},{t:g},{model_u!r},")
            else:
                lines.append(f"{cl:g},{t:g},{model_u!r},{float(job_data[i])!r}")
    return "\n".join(lines) + "\n"


def export_convergence_csv(result: FitResult) -> str:
    """Lowest error per iteration, iteration 0 being the initial sweep."""
    lines = ["iteration,lowest_error"]
    for i, err in enumerate(result.history):
        lines.append(f"{i},{float(err)!r}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Benchmarking
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BenchReport:
    model: ModelId
    particles: int
    iterations: int
    repeats: int
    times_s: tuple[float, ...]
    mean_s: float
    std_s: float
    per_iteration_s: float

    def format(self) -> str:
        times = ", ".join(f"{t:.2f}" for t in self.times_s)
        return (
            f"model={self.model.value} particles={self.particles} "
            f"iterations={self.iterations} repeats={self.repeats}\n"
            f"  times_s: [{times}]\n"
            f"  mean {self.mean_s:.2f} s, std {self.std_s:.2f} s, "
            f"per-iteration {self.per_iteration_s:.3f} s\n"
        )


def bench(config: FitConfig, repeats: int) -> BenchReport:
    """Time ``repeats`` full runs of ``config``, varying the seed per run."""
    if repeats < 1:
        raise ValueError("repeats must be at least 1")
    times = []
    for i in range(repeats):
        cfg_i = replace(config, seed=config.seed + i)
        job_i = build_job(cfg_i)
        result = run_fit(job_i)
        times.append(result.wall_time_s)
    mean = statistics.fmean(times)
    std = statistics.stdev(times) if len(times) > 1 else 0.0
    return BenchReport(
        model=config.model,
        particles=config.hyper.particles,
        iterations=config.hyper.iterations,
        repeats=repeats,
        times_s=tuple(times),
        mean_s=mean,
        std_s=std,
        per_iteration_s=mean / (config.hyper.iterations + 1),
    )
