"""Pydantic request/response models for the analysis service.

Every response carries a status the thin CLI maps onto its exit-code
contract: ok -> 0, verdict_false -> 1, parse_error/usage_error -> 2.
"""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, Field

STATUS_OK = "ok"
STATUS_VERDICT_FALSE = "verdict_false"
STATUS_PARSE_ERROR = "parse_error"
STATUS_USAGE_ERROR = "usage_error"


class DiagnosticOut(BaseModel):
    severity: str
    line: int
    column: int
    message: str
    hint: str = ""

    def render(self) -> str:
        tail = f" ({self.hint})" if self.hint else ""
        return f"{self.line}:{self.column}: {self.severity}: {self.message}{tail}"


class BaseResponse(BaseModel):
    status: str
    diagnostics: list[DiagnosticOut] = Field(default_factory=list)
    message: str = ""


class CheckRequest(BaseModel):
    model: str
    src: Optional[str] = None
    dst: Optional[str] = None


class AnalysisResponse(BaseResponse):
    verdict: Optional[bool] = None
    witnesses: list[str] = Field(default_factory=list)
    narrative: list[str] = Field(default_factory=list)


class SimulateRequest(BaseModel):
    model: str
    source: str
    dst: str  # address literal, e.g. "vlan:10,mac:00:00:11:11:11:BB"
    ttl: int = 32


class TraceEventOut(BaseModel):
    hop: int
    agent: str
    action: str
    address: str


class SimulateResponse(BaseResponse):
    delivered: Optional[bool] = None
    final_agent: Optional[str] = None
    events: list[TraceEventOut] = Field(default_factory=list)
    text: str = ""


class FloodRequest(BaseModel):
    model: str
    source: str


class FloodResponse(BaseResponse):
    agents: list[str] = Field(default_factory=list)


class CompileRequest(BaseModel):
    policy: str


class CompileResponse(BaseResponse):
    model: Optional[str] = None
    verified: Optional[bool] = None


class AlignRequest(BaseModel):
    model: str
    container: str
    desired: str  # model text containing desired { ... } blocks


class SpofRequest(BaseModel):
    model: str
    src: str
    dst: str


class SpofResponse(BaseResponse):
    agents: list[str] = Field(default_factory=list)


class ScaleResponse(BaseResponse):
    containers: Optional[int] = None
    per_container: Optional[int] = None


class DotRequest(BaseModel):
    model: str


class DotResponse(BaseResponse):
    dot: str = ""


class BindingsRequest(BaseModel):
    model: str


class BindingOut(BaseModel):
    giver: str
    user: str
    body: str
    exchange: bool


class BindingsResponse(BaseResponse):
    bindings: list[BindingOut] = Field(default_factory=list)
    unmatched_impositions: list[str] = Field(default_factory=list)
