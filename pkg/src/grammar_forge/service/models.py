"""Request/response bodies for the workbench service.

Field names are stable: the web UI and any other client program against
these schemas.
"""

from __future__ import annotations

from pydantic import BaseModel, Field


class CreateSessionRequest(BaseModel):
    metamodel: str = Field(description="metamodel document text (.mm.json)")
    seed: int = 42


class ElementEntry(BaseModel):
    id: str
    kind: str  # rule | line | keyword | assignment | crossref | alternatives | block
    rule: str
    returns: str | None = None
    line_path: list[int] | None = None
    element_index: int | None = None
    label: str
    feature: str | None = None
    keyword: str | None = None
    cardinality: str | None = None
    block_open: str | None = None
    block_close: str | None = None


class GeneratedView(BaseModel):
    text: str
    elements: list[ElementEntry]


class ReportEntryView(BaseModel):
    index: int
    rule_id: str
    status: str
    matched: int = 0
    lines_changed: int = 0
    message: str | None = None


class ReportView(BaseModel):
    entries: list[ReportEntryView]
    totals: dict[str, int]


class ConfigEntryView(BaseModel):
    index: int
    line: str
    rule_id: str
    rule: str
    attr: str | None = None
    context: str | None = None
    args: dict[str, object]


class MigratedProgramView(BaseModel):
    name: str
    text: str
    dropped: list[str] = []
    error: str | None = None


class PreviewView(BaseModel):
    programs: list[MigratedProgramView]
    samples: list[str]


class SessionView(BaseModel):
    session_id: str
    revision: int
    metamodel_name: str
    seed: int


class OptimizedView(BaseModel):
    revision: int
    text: str
    report: ReportView


class MutationResponse(BaseModel):
    revision: int
    optimized: str
    report: ReportView
    previews: PreviewView
    config: list[ConfigEntryView]


class AddEntryRequest(BaseModel):
    revision: int
    line: str = Field(description="one .goc configuration line")


class UpdateEntryRequest(BaseModel):
    revision: int
    line: str


class ReorderRequest(BaseModel):
    revision: int
    order: list[int]


class SelectionRequest(BaseModel):
    element_id: str


class CandidateView(BaseModel):
    rule_id: str
    doc: str
    rule: str
    attr: str | None = None
    prefilled_args: dict[str, object] = {}
    args_schema: list[dict[str, object]] = []
    line: str | None = None


class StyleApplyRequest(BaseModel):
    revision: int
    name: str


class StyleInstallRequest(BaseModel):
    doc: str
    force: bool = False


class StyleInfo(BaseModel):
    name: str
    description: str


class ImportProgramRequest(BaseModel):
    revision: int
    name: str = "program"
    text: str


class SpanPayload(BaseModel):
    start: int
    end: int
    label: str
    type: str | None = None


class InferRequest(BaseModel):
    text: str
    spans: list[SpanPayload]


class InferResponse(BaseModel):
    metamodel: str
    grammar: str
    parse_ok: bool
    message: str | None = None


class EvolveRequest(BaseModel):
    revision: int
    metamodel: str


class EvolveResponse(BaseModel):
    revision: int
    reuse: dict
    optimized: str
    report: ReportView
    previews: PreviewView


class ErrorDetail(BaseModel):
    module: str
    message: str


class ErrorBody(BaseModel):
    error: ErrorDetail
