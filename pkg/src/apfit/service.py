"""HTTP fit service: model catalogs, job lifecycle, streamed progress.

The service validates jobs synchronously (422 with field paths on bad
configs), runs them on a small worker pool, and exposes per-iteration
progress as a server-sent event stream. Results and the export documents are
available once a job finishes; jobs live in memory only.

Run directly with ``python -m apfit.service`` (loopback-only by default).
"""

from __future__ import annotations

import argparse
import json
import threading
import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import Body, FastAPI, HTTPException
from fastapi.responses import PlainTextResponse, StreamingResponse

from .dataio import DataError
from .models import ModelId, model_spec
from .orchestrator import (ConfigError, FitConfig, FitJob, FitResult,
                           build_job, config_from_dict, config_to_dict,
                           export_convergence_csv, export_parameters,
                           export_run_details, export_trace_csv, run_fit)
from .stimulus import SquareStimulus

__all__ = ["create_app", "main"]

_PROGRESS_POLL_S = 0.05


@dataclass
class _Job:
    job_id: str
    config: FitConfig
    fit_job: FitJob
    status: str = "queued"  # queued -> running -> done|failed|cancelled
    progress: list[float] = field(default_factory=list)
    result: FitResult | None = None
    error: str | None = None
    cancel_event: threading.Event = field(default_factory=threading.Event)
    lock: threading.Lock = field(default_factory=threading.Lock)

    def snapshot(self) -> dict:
        with self.lock:
            doc = {
                "job_id": self.job_id,
                "status": self.status,
                "model": self.config.model.value,
                "iterations_total": self.config.hyper.iterations,
                "progress": list(self.progress),
                "error": self.error,
                "config": config_to_dict(self.config),
                "result": None,
            }
            if self.result is not None:
                doc["result"] = _result_to_dict(self.result)
        return doc


def _result_to_dict(result: FitResult) -> dict:
    rows = []
    for row in result.breakdown.per_dataset:
        entry = {
            "label": row.label,
            "raw_error": row.raw_error,
            "normalized_error": row.normalized_error,
            "weighted_error": row.weighted_error,
        }
        if row.shift is not None:
            entry["shift"] = row.shift
        rows.append(entry)
    return {
        "best_params": result.best_params_by_name,
        "best_error": result.best_error,
        "history": [float(v) for v in result.history],
        "wall_time_s": result.wall_time_s,
        "iterations_completed": result.iterations_completed,
        "cancelled": result.cancelled,
        "per_dataset_errors": rows,
        "traces": {
            f"{cl:g}": [float(v) for v in trace.samples]
            for cl, trace in result.best_traces.items()
        },
    }


def _defaults_payload(model: ModelId) -> dict:
    spec = model_spec(model)
    stim = SquareStimulus()
    return {
        "id": spec.id.value,
        "parameter_names": list(spec.parameter_names),
        "display_names": list(spec.display_names),
        "state_labels": list(spec.state_labels),
        "default_bounds": [
            {"name": name, "min": lo, "max": hi}
            for name, (lo, hi) in zip(spec.parameter_names,
                                      spec.default_bounds)
        ],
        "default_normalize_to": spec.default_normalize_to,
        "default_stimulus": {
            "kind": "square",
            "magnitude": stim.magnitude,
            "duration": stim.duration,
        },
    }


def create_app(max_concurrent_jobs: int = 1,
               frontend_dir: str | Path | None = None) -> FastAPI:
    """Build the service app; jobs persist only for the app's lifetime."""
    app = FastAPI(title="apfit service")
    jobs: dict[str, _Job] = {}
    jobs_lock = threading.Lock()
    executor = ThreadPoolExecutor(max_workers=max(1, max_concurrent_jobs))

    def _get_job(job_id: str) -> _Job:
        with jobs_lock:
            job = jobs.get(job_id)
        if job is None:
            raise HTTPException(status_code=404,
                                detail=f"unknown job {job_id!r}")
        return job

    def _run_job(job: _Job) -> None:
        with job.lock:
            if job.status == "cancelled":
                return
            job.status = "running"

        def on_iteration(iteration: int, lowest_error: float) -> None:
            with job.lock:
                job.progress.append(float(lowest_error))

        try:
            result = run_fit(job.fit_job, on_iteration=on_iteration,
                             should_stop=job.cancel_event.is_set)
        except Exception as exc:  # surfaced through the job record
            with job.lock:
                job.status = "failed"
                job.error = str(exc)
            return
        with job.lock:
            job.result = result
            job.status = "cancelled" if result.cancelled else "done"

    @app.get("/models")
    def list_models() -> list[dict]:
        return [
            {
                "id": mid.value,
                "parameters": model_spec(mid).n_parameters,
                "default_normalize_to": model_spec(mid).default_normalize_to,
            }
            for mid in ModelId
        ]

    @app.get("/models/{model_id}/defaults")
    def model_defaults(model_id: str) -> dict:
        try:
            mid = ModelId(model_id)
        except ValueError:
            raise HTTPException(status_code=404,
                                detail=f"unknown model {model_id!r}")
        return _defaults_payload(mid)

    @app.post("/fits", status_code=202)
    def submit_fit(payload: dict = Body(...)) -> dict:
        try:
            config = config_from_dict(payload)
            fit_job = build_job(config)
        except ConfigError as exc:
            raise HTTPException(status_code=422, detail={
                "errors": [{"field": path, "message": msg}
                           for path, msg in exc.errors]})
        except (DataError, ValueError) as exc:
            raise HTTPException(status_code=422, detail={
                "errors": [{"field": "", "message": str(exc)}]})
        job = _Job(job_id=uuid.uuid4().hex, config=config, fit_job=fit_job)
        with jobs_lock:
            jobs[job.job_id] = job
        executor.submit(_run_job, job)
        return {"job_id": job.job_id, "status": job.status}

    @app.get("/fits/{job_id}")
    def fit_status(job_id: str) -> dict:
        return _get_job(job_id).snapshot()

    @app.get("/fits/{job_id}/progress")
    def fit_progress(job_id: str) -> StreamingResponse:
        job = _get_job(job_id)

        def stream():
            sent = 0
            while True:
                with job.lock:
                    pending = job.progress[sent:]
                    status = job.status
                for value in pending:
                    payload = json.dumps(
                        {"iteration": sent, "lowest_error": value})
                    sent += 1
                    yield f"data: {payload}\n\n"
                if status in ("done", "failed", "cancelled") and not pending:
                    payload = json.dumps({"status": status})
                    yield f"event: end\ndata: {payload}\n\n"
                    return
                if not pending:
                    time.sleep(_PROGRESS_POLL_S)

        return StreamingResponse(stream(), media_type="text/event-stream")

    @app.post("/fits/{job_id}/cancel")
    def cancel_fit(job_id: str) -> dict:
        job = _get_job(job_id)
        job.cancel_event.set()
        with job.lock:
            if job.status == "queued":
                job.status = "cancelled"
            status = job.status
        return {"job_id": job_id, "status": status}

    _EXPORTS = {
        "parameters": export_parameters,
        "details": export_run_details,
        "trace": export_trace_csv,
        "convergence": export_convergence_csv,
    }

    @app.get("/fits/{job_id}/export/{kind}")
    def fit_export(job_id: str, kind: str) -> PlainTextResponse:
        job = _get_job(job_id)
        exporter = _EXPORTS.get(kind)
        if exporter is None:
            raise HTTPException(status_code=404,
                                detail=f"unknown export {kind!r}")
        with job.lock:
            result = job.result
        if result is None:
            raise HTTPException(status_code=409,
                                detail="job has no result yet")
        return PlainTextResponse(exporter(result))

    if frontend_dir is not None and Path(frontend_dir).is_dir():
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=str(frontend_dir), html=True),
                  name="frontend")

    return app


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="apfit-service", description="Run the fit service.")
    parser.add_argument("--host", default="127.0.0.1",
                        help="bind address (default: loopback only)")
    parser.add_argument("--port", type=int, default=8000)
    parser.add_argument("--jobs", type=int, default=1,
                        help="max concurrent fit jobs")
    parser.add_argument("--frontend", metavar="DIR",
                        help="serve a built browser UI from this directory")
    args = parser.parse_args(argv)

    import uvicorn
    app = create_app(max_concurrent_jobs=args.jobs,
                     frontend_dir=args.frontend)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
