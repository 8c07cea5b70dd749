"""HTTP facade over the detection library.

The service is stateless apart from the sweep cache on disk; every endpoint
is a thin pydantic wrapper over the same workflow functions the CLI uses, so
a CLI run and an equivalent HTTP call produce identical numbers.  Gray fields
travel as row-major float lists — fine for the lattice sizes this test is
designed for; bulk simulation workloads should use the library directly.
"""

from __future__ import annotations

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field, field_validator

from . import __version__, _workflows, mctest
from .lattice import build_lattice
from .noise import GrayField, gaussian_model


class CalibrateRequest(BaseModel):
    n: int = Field(ge=1, le=4096)
    p_e: list[float]
    alpha: list[float]
    trials: int = Field(default=20000, ge=1)
    seed: int = Field(default=1, ge=0)
    jobs: int = Field(default=1, ge=1, le=64)

    @field_validator("p_e", "alpha")
    @classmethod
    def _open_unit(cls, v: list[float]) -> list[float]:
        if not v or any(not 0.0 < x < 1.0 for x in v):
            raise ValueError("values must lie strictly inside (0, 1)")
        return v


class CriticalValueRow(BaseModel):
    N: int
    p_E: float
    alpha: float
    c0: int
    trials: int
    seed: int


class CalibrateResponse(BaseModel):
    rows: list[CriticalValueRow]
    csv: str


class DetectRequest(BaseModel):
    side: int = Field(ge=1, le=4096)
    values: list[float]
    tau: float = 0.5
    p_e: float = Field(default=0.5, gt=0.0, lt=1.0)
    alpha: float = Field(default=0.05, gt=0.0, lt=1.0)
    trials: int = Field(default=20000, ge=1)
    seed: int = Field(default=1, ge=0)
    jobs: int = Field(default=1, ge=1, le=64)
    with_p_value: bool = False


class DetectResponse(BaseModel):
    decision: str
    T: int
    c0: int
    tau: float
    N: int
    pE: float | None
    early_stopped: bool
    p_value: float | None


class PowerRequest(BaseModel):
    n: int = Field(ge=1, le=4096)
    p_b: list[float]
    p_e: list[float]
    alpha: float = Field(default=0.05, gt=0.0, lt=1.0)
    trials: int = Field(default=20000, ge=1)
    seed: int = Field(default=1, ge=0)
    jobs: int = Field(default=1, ge=1, le=64)


class PowerResponse(BaseModel):
    c0: list[int]
    beta: list[list[float]]
    csv: str


class DistRequest(BaseModel):
    n: int = Field(ge=1, le=4096)
    p_e: list[float] | None = None
    trials: int = Field(default=20000, ge=1)
    seed: int = Field(default=1, ge=0)
    jobs: int = Field(default=1, ge=1, le=64)
    include_survival: bool = False


class DistResponse(BaseModel):
    quantiles: list[tuple[float, int, int]]
    quantiles_csv: str
    survival_csv: dict[str, str] | None = None


class ScanRequest(BaseModel):
    side: int = Field(ge=1, le=4096)
    values: list[float]
    schedule: list[float]
    tau0: float = Field(default=0.0, ge=0.0)
    alpha: float = Field(default=0.05, gt=0.0, lt=1.0)
    trials: int = Field(default=20000, ge=1)
    seed: int = Field(default=1, ge=0)
    sigma: float = Field(default=1.0, gt=0.0)
    p_e: list[float] | None = None
    jobs: int = Field(default=1, ge=1, le=64)


class ScanStepModel(BaseModel):
    tau: float
    p_e: float
    c0: int
    statistic: int
    decision: str


class ScanResponse(BaseModel):
    steps: list[ScanStepModel]
    stopped: str
    tests_performed: int


def _field(side: int, values: list[float]) -> GrayField:
    if len(values) != side * side:
        raise HTTPException(
            status_code=422, detail=f"expected {side * side} values for side {side}"
        )
    return GrayField(side, np.asarray(values, dtype=np.float64))


def create_app() -> FastAPI:
    app = FastAPI(title="percodetect", version=__version__)

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "version": __version__}

    @app.post("/calibrate", response_model=CalibrateResponse)
    def calibrate_endpoint(req: CalibrateRequest) -> CalibrateResponse:
        table = _workflows.calibration_table(
            req.n, req.p_e, req.alpha, req.trials, req.seed, jobs=req.jobs
        )
        return CalibrateResponse(
            rows=[CriticalValueRow(**row) for row in table.rows], csv=table.to_csv()
        )

    @app.post("/detect", response_model=DetectResponse)
    def detect_endpoint(req: DetectRequest) -> DetectResponse:
        fld = _field(req.side, req.values)
        lattice = build_lattice(req.side)
        c0, _row = mctest.calibrate(req.side, req.p_e, req.alpha, req.trials, req.seed, req.jobs)
        dist = None
        if req.with_p_value:
            micro = mctest.load_or_sweep(req.side, req.trials, req.seed, jobs=req.jobs)
            dist = micro.canonical(req.p_e)
        report = mctest.run_test(fld, req.tau, c0, lattice, dist=dist)
        return DetectResponse(
            decision=report.decision,
            T=report.statistic,
            c0=report.critical_value,
            tau=report.tau,
            N=report.side,
            pE=req.p_e,
            early_stopped=report.early_stopped,
            p_value=report.p_value,
        )

    @app.post("/power", response_model=PowerResponse)
    def power_endpoint(req: PowerRequest) -> PowerResponse:
        matrix, c0s = _workflows.power_matrix(
            req.n, req.p_b, req.p_e, req.alpha, req.trials, req.seed, jobs=req.jobs
        )
        csv = _workflows.power_csv(req.p_b, req.p_e, matrix, req.trials)
        return PowerResponse(c0=c0s, beta=matrix, csv=csv)

    @app.post("/dist", response_model=DistResponse)
    def dist_endpoint(req: DistRequest) -> DistResponse:
        p_list = req.p_e if req.p_e else _workflows.DIST_DEFAULT_P
        dists, quantiles = _workflows.distribution_run(
            req.n, p_list, req.trials, req.seed, jobs=req.jobs
        )
        survival = (
            {str(p): d.to_csv() for p, d in dists.items()} if req.include_survival else None
        )
        return DistResponse(
            quantiles=quantiles,
            quantiles_csv=_workflows.quantiles_csv(quantiles),
            survival_csv=survival,
        )

    @app.post("/scan", response_model=ScanResponse)
    def scan_endpoint(req: ScanRequest) -> ScanResponse:
        fld = _field(req.side, req.values)
        report = mctest.threshold_scan(
            fld,
            req.schedule,
            req.tau0,
            req.alpha,
            req.trials,
            req.seed,
            noise=None if req.p_e else gaussian_model(),
            sigma=req.sigma,
            p_e=req.p_e,
            jobs=req.jobs,
        )
        return ScanResponse(
            steps=[ScanStepModel(**vars(s)) for s in report.steps],
            stopped=report.stopped,
            tests_performed=report.tests_performed,
        )

    return app


app = create_app()
