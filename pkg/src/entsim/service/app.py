"""HTTP front end: every endpoint delegates to the shared report builders, so
service replies and local command-line reports are the same JSON document.
Domain validation failures (bad state, bad measurement, inconsistent flags)
surface as HTTP 400 with the parser's entry-indexed diagnostic.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__, reports
from .models import (
    BellRequest,
    EntangledRequest,
    HealthReply,
    MiAuditRequest,
    MiAuditReply,
    MiBoundRequest,
    MiBoundReply,
    NeCoverRequest,
    NeCoverReply,
    NeQuantumRequest,
    NeQuantumReply,
    NeWrapRequest,
    NeWrapReply,
    StatsReport,
    TeleportRequest,
)


def create_app() -> FastAPI:
    app = FastAPI(title="entsim", version=__version__)

    @app.exception_handler(ValueError)
    async def _value_error(request: Request, exc: ValueError) -> JSONResponse:
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.get("/health", response_model=HealthReply)
    def health() -> HealthReply:
        return HealthReply(status="ok", version=__version__)

    @app.post("/simulate/bell", response_model=StatsReport, response_model_exclude_none=True)
    def simulate_bell(req: BellRequest) -> StatsReport:
        report = reports.bell_report(
            req.protocol,
            req.x,
            req.y,
            req.trials,
            req.seed,
            k_code=req.k_code,
            round_cap=req.round_cap,
            workers=req.workers,
        )
        return StatsReport(**report)

    @app.post("/simulate/teleport", response_model=StatsReport, response_model_exclude_none=True)
    def simulate_teleport(req: TeleportRequest) -> StatsReport:
        report = reports.teleport_report(
            req.state,
            req.povm,
            req.trials,
            req.seed,
            round_cap=req.round_cap,
            workers=req.workers,
        )
        return StatsReport(**report)

    @app.post("/simulate/entangled", response_model=StatsReport, response_model_exclude_none=True)
    def simulate_entangled(req: EntangledRequest) -> StatsReport:
        report = reports.entangled_report(
            req.alice_povm,
            req.bob_povm,
            req.trials,
            req.seed,
            round_cap=req.round_cap,
            workers=req.workers,
        )
        return StatsReport(**report)

    @app.post("/mi/bound", response_model=MiBoundReply, response_model_exclude_none=True)
    def mi_bound(req: MiBoundRequest) -> MiBoundReply:
        return MiBoundReply(**reports.mi_bound_report(req.mc_samples, req.seed))

    @app.post("/mi/audit", response_model=MiAuditReply)
    def mi_audit(req: MiAuditRequest) -> MiAuditReply:
        report = reports.mi_audit_report(
            req.protocol,
            req.trials,
            req.seed,
            x=req.x,
            y=req.y,
            alice_povm_obj=req.alice_povm,
            bob_povm_obj=req.bob_povm,
            workers=req.workers,
        )
        return MiAuditReply(**report)

    @app.post("/ne/quantum", response_model=NeQuantumReply, response_model_exclude_none=True)
    def ne_quantum(req: NeQuantumRequest) -> NeQuantumReply:
        return NeQuantumReply(**reports.ne_quantum_report(req.n, req.x, req.y, req.exhaustive))

    @app.post("/ne/wrap", response_model=NeWrapReply)
    def ne_wrap(req: NeWrapRequest) -> NeWrapReply:
        report = reports.ne_wrap_report(
            req.protocol, req.n, req.x, req.y, req.trials, req.seed, workers=req.workers
        )
        return NeWrapReply(**report)

    @app.post("/ne/cover", response_model=NeCoverReply)
    def ne_cover(req: NeCoverRequest) -> NeCoverReply:
        return NeCoverReply(**reports.ne_cover_report(req.n))

    return app
