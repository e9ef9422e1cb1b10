"""FastAPI service wrapping the promise-graph toolkit.

Clients post model text and get structured analysis results back; nothing
is stored server-side, so the service scales trivially and the CLI can
run it in-process.
"""

from __future__ import annotations

from fastapi import FastAPI

from .. import __version__
from ..addressing import AddressError, ScalingParams, scaling_split, parse_address
from ..core import PnetError, find_bindings, unmatched_impositions
from ..dot import export_dot
from ..dsl import Diagnostic, ModelError, desired_bodies, elaborate, parse_model, policy_spec_of, render_graph
from ..policy import compile_policy, verify_compiled
from ..simulator import Message, SimulationError, flood_set, inject
from ..verifier import AnalysisError, check_alignment, check_cooperation, single_points_of_failure
from .schemas import (
    STATUS_OK,
    STATUS_PARSE_ERROR,
    STATUS_USAGE_ERROR,
    STATUS_VERDICT_FALSE,
    AlignRequest,
    AnalysisResponse,
    BindingOut,
    BindingsRequest,
    BindingsResponse,
    CheckRequest,
    CompileRequest,
    CompileResponse,
    DiagnosticOut,
    DotRequest,
    DotResponse,
    FloodRequest,
    FloodResponse,
    ScaleResponse,
    SimulateRequest,
    SimulateResponse,
    SpofRequest,
    SpofResponse,
    TraceEventOut,
)


def _diag_out(diags) -> list[DiagnosticOut]:
    return [
        DiagnosticOut(severity=d.severity, line=d.span.line, column=d.span.col,
                      message=d.message, hint=d.hint)
        for d in diags
    ]


class _Loaded:
    def __init__(self, graph, doc, diagnostics):
        self.graph = graph
        self.doc = doc
        self.diagnostics = diagnostics


def _load(model_text: str):
    """Parse + elaborate; returns (_Loaded | None, error_response | None)."""
    doc, diags = parse_model(model_text)
    errors = [d for d in diags if d.severity == "error"]
    if errors:
        return None, (STATUS_PARSE_ERROR, _diag_out(diags))
    try:
        graph = elaborate(doc)
    except ModelError as exc:
        return None, (STATUS_PARSE_ERROR, _diag_out(list(diags) + list(exc.diagnostics)))
    return _Loaded(graph, doc, _diag_out(diags)), None


def create_app() -> FastAPI:
    app = FastAPI(title="pnet", version=__version__,
                  description="Promise-graph network modeling and verification")

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok", "version": __version__}

    @app.post("/check", response_model=AnalysisResponse)
    def check(req: CheckRequest) -> AnalysisResponse:
        loaded, err = _load(req.model)
        if err:
            return AnalysisResponse(status=err[0], diagnostics=err[1])
        if (req.src is None) != (req.dst is None):
            return AnalysisResponse(status=STATUS_USAGE_ERROR,
                                    message="--src and --dst go together")
        if req.src is None:
            return AnalysisResponse(status=STATUS_OK, verdict=True,
                                    diagnostics=loaded.diagnostics,
                                    narrative=[f"model is well-formed: "
                                               f"{len(loaded.graph.agents)} agents, "
                                               f"{len(loaded.graph.promises)} promises"])
        try:
            report = check_cooperation(loaded.graph, req.src, req.dst)
        except (AnalysisError, PnetError) as exc:
            return AnalysisResponse(status=STATUS_USAGE_ERROR, message=str(exc),
                                    diagnostics=loaded.diagnostics)
        return AnalysisResponse(
            status=STATUS_OK if report.verdict else STATUS_VERDICT_FALSE,
            verdict=report.verdict,
            witnesses=list(report.witnesses),
            narrative=list(report.narrative),
            diagnostics=loaded.diagnostics,
        )

    @app.post("/simulate", response_model=SimulateResponse)
    def simulate(req: SimulateRequest) -> SimulateResponse:
        loaded, err = _load(req.model)
        if err:
            return SimulateResponse(status=err[0], diagnostics=err[1])
        try:
            addr = parse_address(req.dst)
            trace = inject(loaded.graph, req.source, Message(addr, ttl=req.ttl))
        except (AddressError, SimulationError) as exc:
            return SimulateResponse(status=STATUS_USAGE_ERROR, message=str(exc),
                                    diagnostics=loaded.diagnostics)
        return SimulateResponse(
            status=STATUS_OK if trace.delivered else STATUS_VERDICT_FALSE,
            delivered=trace.delivered,
            final_agent=trace.final_agent,
            events=[TraceEventOut(hop=e.hop, agent=e.agent, action=e.action,
                                  address=str(e.address)) for e in trace.events],
            text=trace.text(),
            diagnostics=loaded.diagnostics,
        )

    @app.post("/flood", response_model=FloodResponse)
    def flood(req: FloodRequest) -> FloodResponse:
        loaded, err = _load(req.model)
        if err:
            return FloodResponse(status=err[0], diagnostics=err[1])
        try:
            agents = sorted(flood_set(loaded.graph, req.source))
        except (PnetError, SimulationError) as exc:
            return FloodResponse(status=STATUS_USAGE_ERROR, message=str(exc),
                                 diagnostics=loaded.diagnostics)
        return FloodResponse(status=STATUS_OK, agents=agents,
                             diagnostics=loaded.diagnostics)

    @app.post("/compile", response_model=CompileResponse)
    def compile_(req: CompileRequest) -> CompileResponse:
        doc, diags = parse_model(req.policy)
        errors = [d for d in diags if d.severity == "error"]
        if errors:
            return CompileResponse(status=STATUS_PARSE_ERROR, diagnostics=_diag_out(diags))
        spec = policy_spec_of(doc)
        if spec is None:
            return CompileResponse(status=STATUS_USAGE_ERROR,
                                   message="no cell declarations to compile",
                                   diagnostics=_diag_out(diags))
        try:
            graph = compile_policy(spec)
            report = verify_compiled(spec, graph)
        except PnetError as exc:
            return CompileResponse(status=STATUS_USAGE_ERROR, message=str(exc),
                                   diagnostics=_diag_out(diags))
        return CompileResponse(
            status=STATUS_OK if report.verdict else STATUS_VERDICT_FALSE,
            model=render_graph(graph),
            verified=report.verdict,
            diagnostics=_diag_out(diags),
        )

    @app.post("/align", response_model=AnalysisResponse)
    def align(req: AlignRequest) -> AnalysisResponse:
        loaded, err = _load(req.model)
        if err:
            return AnalysisResponse(status=err[0], diagnostics=err[1])
        ddoc, ddiags = parse_model(req.desired, source="<desired>")
        errors = [d for d in ddiags if d.severity == "error"]
        if errors:
            return AnalysisResponse(status=STATUS_PARSE_ERROR, diagnostics=_diag_out(ddiags))
        want = desired_bodies(ddoc)
        try:
            report = check_alignment(want, loaded.graph, req.container)
        except PnetError as exc:
            return AnalysisResponse(status=STATUS_USAGE_ERROR, message=str(exc),
                                    diagnostics=loaded.diagnostics)
        return AnalysisResponse(
            status=STATUS_OK if report.verdict else STATUS_VERDICT_FALSE,
            verdict=report.verdict,
            witnesses=list(report.witnesses),
            narrative=list(report.narrative),
            diagnostics=loaded.diagnostics,
        )

    @app.post("/spof", response_model=SpofResponse)
    def spof(req: SpofRequest) -> SpofResponse:
        loaded, err = _load(req.model)
        if err:
            return SpofResponse(status=err[0], diagnostics=err[1])
        try:
            agents = sorted(single_points_of_failure(loaded.graph, req.src, req.dst))
        except AnalysisError as exc:
            return SpofResponse(status=STATUS_VERDICT_FALSE, message=str(exc),
                                diagnostics=loaded.diagnostics)
        except PnetError as exc:
            return SpofResponse(status=STATUS_USAGE_ERROR, message=str(exc),
                                diagnostics=loaded.diagnostics)
        return SpofResponse(status=STATUS_OK, agents=agents,
                            diagnostics=loaded.diagnostics)

    @app.get("/scale", response_model=ScaleResponse)
    def scale(bits: int, prefix: int) -> ScaleResponse:
        try:
            containers, per_container = scaling_split(ScalingParams(bits, prefix))
        except AddressError as exc:
            return ScaleResponse(status=STATUS_USAGE_ERROR, message=str(exc))
        return ScaleResponse(status=STATUS_OK, containers=containers,
                             per_container=per_container)

    @app.post("/dot", response_model=DotResponse)
    def dot(req: DotRequest) -> DotResponse:
        loaded, err = _load(req.model)
        if err:
            return DotResponse(status=err[0], diagnostics=err[1])
        return DotResponse(status=STATUS_OK, dot=export_dot(loaded.graph),
                           diagnostics=loaded.diagnostics)

    @app.post("/bindings", response_model=BindingsResponse)
    def bindings(req: BindingsRequest) -> BindingsResponse:
        loaded, err = _load(req.model)
        if err:
            return BindingsResponse(status=err[0], diagnostics=err[1])
        found = find_bindings(loaded.graph)
        dropped = unmatched_impositions(loaded.graph)
        return BindingsResponse(
            status=STATUS_OK,
            bindings=[BindingOut(giver=b.giver_agent, user=b.user_agent,
                                 body=b.user.body.canon(), exchange=b.exchange)
                      for b in found],
            unmatched_impositions=[
                f"{i.imposer} -> {i.imposee} {i.body.canon()}" for i in dropped],
            diagnostics=loaded.diagnostics,
        )

    return app


app = create_app()
