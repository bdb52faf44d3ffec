"""HTTP service around the calibration workbench.

Data generation and reporting run synchronously. Calibrations and sweeps
take minutes to hours, so they run as background jobs on a single worker
thread (the numerics are single-core anyway); clients poll /jobs/{id}.
Passing wait=true executes the job inline instead, which is what the
bundled command-line client uses when it talks to an in-process app.
"""

from __future__ import annotations

import threading
import traceback
import uuid
from typing import Literal, Optional

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, ConfigDict

from . import __version__
from .calibrate import build_report, generate_data, run_calibration, run_sweep
from .config import CalibrationResult, ConfigError, ExperimentConfig


class GenerateRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    config: ExperimentConfig
    out_dir: Optional[str] = None
    seed: Optional[int] = None


class GenerateResponse(BaseModel):
    files: list[str]


class CalibrateRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    config: ExperimentConfig
    seed: Optional[int] = None
    out_dir: Optional[str] = None


class SweepRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    config: ExperimentConfig
    out_dir: Optional[str] = None


class ReportRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    results_dir: str
    out_dir: Optional[str] = None
    force: bool = False


class ReportResponse(BaseModel):
    tables: list[str]
    problems: list[str]
    n_runs: int
    n_studies: int


class JobStatus(BaseModel):
    job_id: str
    kind: Literal["calibrate", "sweep"]
    status: Literal["queued", "running", "done", "failed"]
    result: Optional[dict] = None
    error: Optional[str] = None


class _Job:
    def __init__(self, kind, work):
        self.id = uuid.uuid4().hex[:12]
        self.kind = kind
        self.work = work
        self.status = "queued"
        self.result = None
        self.error = None

    def run(self):
        self.status = "running"
        try:
            self.result = self.work()
            self.status = "done"
        except Exception as exc:  # noqa: BLE001 - reported via the API
            self.error = f"{type(exc).__name__}: {exc}"
            self.status = "failed"
            traceback.print_exc()

    def to_status(self) -> JobStatus:
        return JobStatus(job_id=self.id, kind=self.kind, status=self.status,
                         result=self.result, error=self.error)


class JobStore:
    """In-memory job registry with one sequential worker thread."""

    def __init__(self):
        self._jobs: dict[str, _Job] = {}
        self._lock = threading.Lock()

    def submit(self, kind, work, wait: bool) -> _Job:
        job = _Job(kind, work)
        with self._lock:
            self._jobs[job.id] = job
        if wait:
            job.run()
        else:
            threading.Thread(target=job.run, daemon=True).start()
        return job

    def get(self, job_id) -> _Job | None:
        with self._lock:
            return self._jobs.get(job_id)


def create_app() -> FastAPI:
    app = FastAPI(title="pinncal", version=__version__)
    jobs = JobStore()
    app.state.jobs = jobs

    @app.get("/health")
    def health():
        return {"status": "ok", "version": __version__}

    @app.post("/generate", response_model=GenerateResponse)
    def generate(req: GenerateRequest):
        try:
            files = generate_data(req.config, out_dir=req.out_dir,
                                  seed=req.seed)
        except (ConfigError, ValueError, OSError) as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return GenerateResponse(files=files)

    @app.post("/calibrate", response_model=JobStatus)
    def calibrate(req: CalibrateRequest, wait: bool = False):
        def work():
            result = run_calibration(req.config, seed=req.seed,
                                     out_dir=req.out_dir)
            return result.model_dump()

        return jobs.submit("calibrate", work, wait).to_status()

    @app.post("/sweep", response_model=JobStatus)
    def sweep(req: SweepRequest, wait: bool = False):
        if req.config.study is None:
            raise HTTPException(status_code=422,
                                detail="config has no study section")

        def work():
            summary = run_sweep(req.config, out_dir=req.out_dir)
            return {"study": summary.study,
                    "config_hash": summary.config_hash,
                    "cells": summary.cells}

        return jobs.submit("sweep", work, wait).to_status()

    @app.get("/jobs/{job_id}", response_model=JobStatus)
    def job_status(job_id: str):
        job = jobs.get(job_id)
        if job is None:
            raise HTTPException(status_code=404, detail="unknown job")
        return job.to_status()

    @app.post("/report", response_model=ReportResponse)
    def report(req: ReportRequest):
        try:
            out = build_report(req.results_dir, out_dir=req.out_dir,
                               force=req.force)
        except FileNotFoundError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        except ConfigError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        return ReportResponse(**out)

    return app


app = create_app()
