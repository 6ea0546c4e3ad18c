"""FastAPI application exposing the interactive session protocol.

Window 1 is the generated grammar with a selectable element index, window 2
the live optimized grammar, window 3 the instance previews (imported
programs migrated to the current grammar plus sampled examples). The
properties pane is driven by the selection endpoint, which offers catalog
rules applicable to the selected element with a prefilled scope.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, Query
from fastapi.requests import Request
from fastapi.responses import JSONResponse, PlainTextResponse
from fastapi.staticfiles import StaticFiles

from .. import __version__
from ..errors import GrammarForgeError
from ..generate import generate_grammar
from ..grammar import (
    Alternatives,
    Assignment,
    Block,
    CrossRef,
    Grammar,
    Keyword,
    iter_lines,
)
from ..gxt import print_grammar
from ..infer import AnnotatedExample, Span, coverage_gaps, infer_grammar
from ..instances import migrate_program, parse_program, sample_instances
from ..metamodel import load_metamodel, metamodel_to_document
from ..optimize import CATALOG, ApplicationReport
from ..styles import StyleRegistry
from ..evolve import regenerate_and_reapply
from .models import (
    AddEntryRequest,
    CandidateView,
    ConfigEntryView,
    CreateSessionRequest,
    ElementEntry,
    EvolveRequest,
    EvolveResponse,
    GeneratedView,
    ImportProgramRequest,
    InferRequest,
    InferResponse,
    MigratedProgramView,
    MutationResponse,
    OptimizedView,
    PreviewView,
    ReorderRequest,
    ReportEntryView,
    ReportView,
    SelectionRequest,
    SessionView,
    StyleApplyRequest,
    StyleInfo,
    StyleInstallRequest,
    UpdateEntryRequest,
)
from .sessions import (
    ImportedProgram,
    SessionStore,
    StaleRevisionError,
    UnknownSessionError,
    parse_entry,
)

PREVIEW_COUNT = 3
PREVIEW_DEPTH = 3


def create_app(ui_dir: str | None = None, styles_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="grammar-forge", version=__version__)
    store = SessionStore()
    registry = StyleRegistry(styles_dir)

    @app.exception_handler(GrammarForgeError)
    async def _domain_error(request: Request, exc: GrammarForgeError):
        status = 400
        if isinstance(exc, UnknownSessionError):
            status = 404
        elif isinstance(exc, StaleRevisionError):
            status = 409
        module = type(exc).__name__.removesuffix("Error").lower() or "core"
        return JSONResponse(
            status_code=status,
            content={"error": {"module": module, "message": str(exc)}},
        )

    # -- session lifecycle -------------------------------------------------

    @app.post("/api/sessions", response_model=SessionView)
    def create_session(body: CreateSessionRequest):
        session = store.create(body.metamodel, seed=body.seed)
        return _session_view(session)

    @app.get("/api/sessions/{sid}", response_model=SessionView)
    def get_session(sid: str):
        return _session_view(store.get(sid))

    # -- windows -----------------------------------------------------------

    @app.get("/api/sessions/{sid}/generated", response_model=GeneratedView)
    def get_generated(sid: str):
        session = store.get(sid)
        return GeneratedView(
            text=print_grammar(session.generated),
            elements=_element_index(session.generated),
        )

    @app.get("/api/sessions/{sid}/optimized", response_model=OptimizedView)
    def get_optimized(sid: str):
        session = store.get(sid)
        return OptimizedView(
            revision=session.revision,
            text=print_grammar(session.optimized),
            report=_report_view(session.report),
        )

    @app.get("/api/sessions/{sid}/previews", response_model=PreviewView)
    def get_previews(sid: str, count: int = Query(default=PREVIEW_COUNT, ge=0, le=20)):
        session = store.get(sid)
        return _previews(session, count)

    # -- configuration CRUD --------------------------------------------------

    @app.get("/api/sessions/{sid}/config", response_model=list[ConfigEntryView])
    def get_config(sid: str):
        session = store.get(sid)
        return [_entry_view(c, i) for i, c in enumerate(session.config)]

    @app.post("/api/sessions/{sid}/config/entries", response_model=MutationResponse)
    def add_entry(sid: str, body: AddEntryRequest):
        entry = parse_entry(body.line, 0)

        def fn(session):
            session.config.append(entry)

        return _mutation(store.mutate(sid, body.revision, fn))

    @app.put("/api/sessions/{sid}/config/entries/{index}", response_model=MutationResponse)
    def update_entry(sid: str, index: int, body: UpdateEntryRequest):
        entry = parse_entry(body.line, index)

        def fn(session):
            if not 0 <= index < len(session.config):
                raise GrammarForgeError(f"no config entry at index {index}")
            session.config[index] = entry

        return _mutation(store.mutate(sid, body.revision, fn))

    @app.delete("/api/sessions/{sid}/config/entries/{index}", response_model=MutationResponse)
    def delete_entry(sid: str, index: int, revision: int = Query()):
        def fn(session):
            if not 0 <= index < len(session.config):
                raise GrammarForgeError(f"no config entry at index {index}")
            del session.config[index]

        return _mutation(store.mutate(sid, revision, fn))

    @app.post("/api/sessions/{sid}/config/reorder", response_model=MutationResponse)
    def reorder_entries(sid: str, body: ReorderRequest):
        def fn(session):
            if sorted(body.order) != list(range(len(session.config))):
                raise GrammarForgeError("order must be a permutation of the entry indices")
            session.config = [session.config[i] for i in body.order]

        return _mutation(store.mutate(sid, body.revision, fn))

    # -- selection / properties pane ----------------------------------------

    @app.post("/api/sessions/{sid}/selection", response_model=list[CandidateView])
    def selection_candidates(sid: str, body: SelectionRequest):
        session = store.get(sid)
        return _candidates(session.generated, body.element_id)

    @app.get("/api/catalog")
    def get_catalog():
        return {
            rule_id: {
                "doc": rule.doc,
                "needs_attr": rule.needs_attr,
                "args": [
                    {"name": a.name, "type": a.type, "required": a.required, "default": a.default}
                    for a in rule.args
                ],
            }
            for rule_id, rule in CATALOG.items()
        }

    # -- styles --------------------------------------------------------------

    @app.get("/api/styles", response_model=list[StyleInfo])
    def list_styles():
        return [StyleInfo(name=n, description=d) for n, d in registry.list_styles()]

    @app.post("/api/styles", response_model=StyleInfo)
    def install_style(body: StyleInstallRequest):
        style = registry.install_style(body.doc, force=body.force)
        return StyleInfo(name=style.name, description=style.description)

    @app.post("/api/sessions/{sid}/style", response_model=MutationResponse)
    def apply_style(sid: str, body: StyleApplyRequest):
        style = registry.get(body.name)

        def fn(session):
            session.config.extend(style.entries)

        return _mutation(store.mutate(sid, body.revision, fn))

    # -- programs / previews ---------------------------------------------------

    @app.post("/api/sessions/{sid}/programs", response_model=MutationResponse)
    def import_program(sid: str, body: ImportProgramRequest):
        session = store.get(sid)
        result = parse_program(session.optimized, body.text)
        if not result.is_ok:
            raise GrammarForgeError(f"program does not parse under the current grammar: {result}")

        def fn(s):
            s.programs.append(ImportedProgram(body.name, body.text, s.optimized))

        return _mutation(store.mutate(sid, body.revision, fn))

    # -- inference ----------------------------------------------------------

    @app.post("/api/sessions/{sid}/infer", response_model=InferResponse)
    def infer(sid: str, body: InferRequest):
        store.get(sid)  # session must exist; inference itself is stateless
        ex = AnnotatedExample(
            body.text,
            tuple(Span(s.start, s.end, s.label, s.type) for s in body.spans),
        )
        metamodel, grammar = infer_grammar(ex)
        result = parse_program(grammar, ex.text)
        gaps = coverage_gaps(grammar, ex) if result.is_ok else []
        message = None
        if not result.is_ok:
            message = str(result)
        elif gaps:
            message = "dead productions: " + "; ".join(gaps)
        return InferResponse(
            metamodel=metamodel_to_document(metamodel),
            grammar=print_grammar(grammar),
            parse_ok=result.is_ok,
            message=message,
        )

    # -- evolution ------------------------------------------------------------

    @app.post("/api/sessions/{sid}/evolve", response_model=EvolveResponse)
    def evolve(sid: str, body: EvolveRequest):
        m_new = load_metamodel(body.metamodel)
        session = store.get(sid)
        m_old = session.metamodel
        _grammar, _report, reuse = regenerate_and_reapply(
            m_new, list(session.config), m_old=m_old
        )

        def fn(s):
            s.metamodel = m_new
            s.generated = generate_grammar(m_new)

        session = store.mutate(sid, body.revision, fn)
        return EvolveResponse(
            revision=session.revision,
            reuse=reuse.to_dict(),
            optimized=print_grammar(session.optimized),
            report=_report_view(session.report),
            previews=_previews(session, PREVIEW_COUNT),
        )

    # -- exports ---------------------------------------------------------------

    @app.get("/api/sessions/{sid}/export/config", response_class=PlainTextResponse)
    def export_config(sid: str):
        return store.get(sid).export_config()

    @app.get("/api/sessions/{sid}/export/grammar", response_class=PlainTextResponse)
    def export_grammar(sid: str):
        return print_grammar(store.get(sid).optimized)

    @app.get("/api/sessions/{sid}/export/generated", response_class=PlainTextResponse)
    def export_generated(sid: str):
        return print_grammar(store.get(sid).generated)

    @app.get("/api/sessions/{sid}/export/report", response_class=PlainTextResponse)
    def export_report(sid: str):
        return store.get(sid).report.render_text() + "\n"

    @app.get("/api/sessions/{sid}/export/metamodel", response_class=PlainTextResponse)
    def export_metamodel(sid: str):
        return metamodel_to_document(store.get(sid).metamodel)

    # -- static UI -------------------------------------------------------------

    dist = Path(ui_dir) if ui_dir else Path("frontend/dist")
    if dist.is_dir():
        app.mount("/", StaticFiles(directory=str(dist), html=True), name="ui")

    return app


# ---------------------------------------------------------------------------
# View builders
# ---------------------------------------------------------------------------


def _session_view(session) -> SessionView:
    return SessionView(
        session_id=session.id,
        revision=session.revision,
        metamodel_name=session.metamodel.name,
        seed=session.seed,
    )


def _report_view(report: ApplicationReport) -> ReportView:
    data = report.to_dict()
    return ReportView(
        entries=[
            ReportEntryView(
                index=e["index"],
                rule_id=e["rule_id"],
                status=e["status"],
                matched=e["matched"],
                lines_changed=e["lines_changed"],
                message=e["message"],
            )
            for e in data["entries"]
        ],
        totals={k: v for k, v in data["totals"].items() if isinstance(v, int)},
    )


def _entry_view(c, index: int) -> ConfigEntryView:
    return ConfigEntryView(
        index=index,
        line=c.to_line(),
        rule_id=c.rule_id,
        rule=c.scope.rule,
        attr=c.scope.feature,
        context=c.scope.context_feature,
        args=dict(c.args),
    )


def _mutation(session) -> MutationResponse:
    return MutationResponse(
        revision=session.revision,
        optimized=print_grammar(session.optimized),
        report=_report_view(session.report),
        previews=_previews(session, PREVIEW_COUNT),
        config=[_entry_view(c, i) for i, c in enumerate(session.config)],
    )


def _previews(session, count: int) -> PreviewView:
    programs = []
    for prog in session.programs:
        try:
            result = migrate_program(prog.grammar, session.optimized, prog.text)
            programs.append(
                MigratedProgramView(
                    name=prog.name, text=result.text, dropped=list(result.dropped)
                )
            )
        except GrammarForgeError as exc:
            programs.append(
                MigratedProgramView(name=prog.name, text="", error=str(exc))
            )
    samples = sample_instances(session.optimized, session.seed, count, PREVIEW_DEPTH)
    return PreviewView(programs=programs, samples=samples)


def _element_id(rule: str, path: tuple[int, ...] | None, index: int | None) -> str:
    parts = [rule]
    if path is not None:
        parts.append(".".join(str(p) for p in path))
        if index is not None:
            parts.append(str(index))
    return ":".join(parts)


def _element_index(g: Grammar) -> list[ElementEntry]:
    out: list[ElementEntry] = []
    for rule in g.rules:
        out.append(
            ElementEntry(
                id=_element_id(rule.name, None, None),
                kind="rule",
                rule=rule.name,
                returns=rule.returns,
                label=f"{rule.name} returns {rule.returns}",
            )
        )
        for path, line in iter_lines(rule):
            out.append(
                ElementEntry(
                    id=_element_id(rule.name, path, None),
                    kind="line",
                    rule=rule.name,
                    line_path=list(path),
                    label=" ".join(_element_label(e) for e in line.elements),
                    feature=line.first_feature(),
                    cardinality=line.cardinality,
                )
            )
            for j, e in enumerate(line.elements):
                kind = type(e).__name__.lower()
                out.append(
                    ElementEntry(
                        id=_element_id(rule.name, path, j),
                        kind=kind,
                        rule=rule.name,
                        line_path=list(path),
                        element_index=j,
                        label=_element_label(e),
                        feature=getattr(e, "feature", None),
                        keyword=e.literal if isinstance(e, Keyword) else None,
                        block_open=e.open if isinstance(e, Block) else None,
                        block_close=e.close if isinstance(e, Block) else None,
                    )
                )
    return out


def _element_label(e) -> str:
    if isinstance(e, Keyword):
        return f"'{e.literal}'"
    if isinstance(e, Assignment):
        return f"{e.feature}{e.operator}{e.callee}"
    if isinstance(e, CrossRef):
        return f"{e.feature}=[{e.target_class}|{e.id_terminal}]"
    if isinstance(e, Alternatives):
        return " | ".join(e.options)
    if isinstance(e, Block):
        return f"{e.open} ... {e.close}"
    return "?"


def _candidates(g: Grammar, element_id: str) -> list[CandidateView]:
    parts = element_id.split(":")
    rule_name = parts[0]
    rule = g.rule_named(rule_name)
    if rule is None:
        raise GrammarForgeError(f"unknown rule '{rule_name}' in selection")
    path = tuple(int(p) for p in parts[1].split(".")) if len(parts) > 1 and parts[1] else None
    index = int(parts[2]) if len(parts) > 2 else None

    line = None
    element = None
    if path is not None:
        for p, l in iter_lines(rule):
            if p == path:
                line = l
                break
        if line is None:
            raise GrammarForgeError(f"no line at {path} in rule {rule_name}")
        if index is not None:
            if not 0 <= index < len(line.elements):
                raise GrammarForgeError(f"no element {index} on line {path} of {rule_name}")
            element = line.elements[index]

    out: list[CandidateView] = []

    def add(rule_id: str, attr: str | None = None, **prefilled) -> None:
        catalog_rule = CATALOG[rule_id]
        scope_parts = [rule_id, f"rule={rule_name}"]
        if attr:
            scope_parts.append(f"attr={attr}")
        for key, value in prefilled.items():
            text = str(value)
            if isinstance(value, bool):
                text = "true" if value else "false"
            if " " in text or not text:
                text = f"'{text}'"
            scope_parts.append(f"{key}={text}")
        out.append(
            CandidateView(
                rule_id=rule_id,
                doc=catalog_rule.doc,
                rule=rule_name,
                attr=attr,
                prefilled_args=dict(prefilled),
                args_schema=[
                    {"name": a.name, "type": a.type, "required": a.required, "default": a.default}
                    for a in catalog_rule.args
                ],
                line=" ".join(scope_parts),
            )
        )

    line_feature = line.first_feature() if line is not None else None
    line_keyword = line.keywords()[0] if line is not None and line.keywords() else None

    if element is None and path is None:
        # Whole-rule selection.
        add("remove_rule")
        add("rename_rule")
        add("reorder_features")
        add("remove_block")
        add("change_block_delimiters")
        return out

    if isinstance(element, Keyword):
        add("remove_keyword", attr=line_feature, keyword=element.literal)
        add("rename_keyword", old=element.literal, new=element.literal)
        add("remove_attr_keyword_everywhere", keyword=element.literal)
        return out
    if isinstance(element, (Assignment, CrossRef)):
        feature = element.feature
        if line_keyword is not None:
            add("remove_keyword", attr=feature, keyword=line_keyword)
        add("add_keyword_to_attr", attr=feature, keyword="", before=False)
        if path is not None and len(path) > 1:
            add("move_attr_out_of_block", attr=feature)
        add("set_line_cardinality", attr=feature, card=line.cardinality if line else "optional")
        if isinstance(element, Assignment) and element.operator == "+=":
            add("add_list_separator", attr=feature, sep=",")
        return out
    if isinstance(element, Block):
        add("change_block_delimiters", open=element.open, new_open=element.open,
            close=element.close, new_close=element.close)
        add("remove_block")
        return out
    if element is None and line is not None:
        if line_feature is not None:
            add("set_line_cardinality", attr=line_feature, card=line.cardinality)
        if line_keyword is not None:
            add("remove_keyword", attr=line_feature, keyword=line_keyword)
        return out
    return out
