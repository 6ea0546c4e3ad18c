"""Grammar-driven parsing, serialization, and sampling of domain programs.

The parser is interpretive: a recursive descent over the grammar's
Line/Block/Alternatives structure with bounded backtracking, so grammar
edits preview instantly without any regeneration step. Alternatives resolve
by single-token lookahead on leading keywords, falling back to ordered
trials. Failures report the furthest position reached, the expected token
set there, and the offending token; arbitrary byte inputs always yield a
result (work is bounded by input length times rule count).

Serialization emits one physical line per grammar line, indenting block
contents four spaces. INDENT/DEDENT-delimited blocks are realized purely by
indentation; a layout pre-lexer converts indentation changes back into
synthetic tokens when such blocks are present.
"""

from __future__ import annotations

import json
import random
import re
import sys
from dataclasses import dataclass, field

from .errors import MigrationError, SerializeError
from .grammar import (
    Alternatives,
    Assignment,
    Block,
    CrossRef,
    DEDENT,
    Grammar,
    INDENT,
    Keyword,
    Line,
    ParserRule,
)
from .metamodel import Metamodel


@dataclass(frozen=True)
class Ref:
    """A by-name reference to another object's identifying attribute."""

    name: str


@dataclass(frozen=True, eq=True)
class InstanceObject:
    cls: str
    slots: dict[str, object] = field(default_factory=dict)


@dataclass(frozen=True, eq=True)
class InstanceModel:
    root: InstanceObject


@dataclass(frozen=True)
class ParseOk:
    model: InstanceModel
    coverage: frozenset = frozenset()

    @property
    def is_ok(self) -> bool:
        return True


@dataclass(frozen=True)
class ParseFailure:
    position: int
    line: int
    column: int
    expected: tuple[str, ...]
    found: str

    @property
    def is_ok(self) -> bool:
        return False

    def __str__(self) -> str:
        exp = ", ".join(self.expected) or "nothing"
        return (
            f"parse failure at line {self.line}, column {self.column}: "
            f"expected {exp}, found {self.found}"
        )


# ---------------------------------------------------------------------------
# Tokenizer
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Tok:
    kind: str  # id | string | int | float | symbol | indent | dedent | eof
    text: str
    pos: int
    line: int
    col: int


_ID_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_NUM_RE = re.compile(r"-?[0-9]+(?:\.[0-9]+)?(?:[eE][+-]?[0-9]+)?")


def _grammar_symbols(g: Grammar) -> list[str]:
    """Non-word keyword literals and block delimiters, longest first."""
    symbols: set[str] = set()

    def collect(lines: tuple[Line, ...]) -> None:
        for line in lines:
            for e in line.elements:
                if isinstance(e, Keyword) and not _ID_RE.fullmatch(e.literal):
                    symbols.add(e.literal)
                elif isinstance(e, Block):
                    for d in (e.open, e.close):
                        if d not in (INDENT, DEDENT) and not _ID_RE.fullmatch(d):
                            symbols.add(d)
                    collect(e.body)

    for r in g.rules:
        collect(r.body)
    return sorted(symbols, key=len, reverse=True)


def _tokenize(text: str, symbols: list[str], layout: bool) -> tuple[list[_Tok], _Tok | None]:
    """Token list terminated by EOF, or (partial tokens, offending token)."""
    toks: list[_Tok] = []
    indent_stack = [0]
    offset = 0
    lines = text.split("\n")
    for lineno, raw in enumerate(lines, start=1):
        stripped = raw.strip()
        if not stripped:
            offset += len(raw) + 1
            continue
        i = 0
        while i < len(raw) and raw[i] == " ":
            i += 1
        if layout:
            if i < len(raw) and raw[i] == "\t":
                bad = _Tok("error", "\t", offset + i, lineno, i + 1)
                return toks, bad
            col = i
            if col > indent_stack[-1]:
                indent_stack.append(col)
                toks.append(_Tok("indent", "<indent>", offset + i, lineno, i + 1))
            while col < indent_stack[-1]:
                indent_stack.pop()
                toks.append(_Tok("dedent", "<dedent>", offset + i, lineno, i + 1))
            if col != indent_stack[-1]:
                bad = _Tok("error", raw[i : i + 1] or " ", offset + i, lineno, i + 1)
                return toks, bad
        while i < len(raw):
            ch = raw[i]
            if ch in (" ", "\t"):
                i += 1
                continue
            pos = offset + i
            col = i + 1
            if ch == '"':
                j = i + 1
                while j < len(raw):
                    if raw[j] == "\\":
                        j += 2
                        continue
                    if raw[j] == '"':
                        break
                    j += 1
                if j >= len(raw):
                    return toks, _Tok("error", raw[i:], pos, lineno, col)
                toks.append(_Tok("string", raw[i : j + 1], pos, lineno, col))
                i = j + 1
                continue
            m = _NUM_RE.match(raw, i)
            if m and (ch.isdigit() or (ch == "-" and m.end() > i + 1)):
                textv = m.group(0)
                kind = "float" if ("." in textv or "e" in textv or "E" in textv) else "int"
                toks.append(_Tok(kind, textv, pos, lineno, col))
                i = m.end()
                continue
            m = _ID_RE.match(raw, i)
            if m:
                toks.append(_Tok("id", m.group(0), pos, lineno, col))
                i = m.end()
                continue
            for sym in symbols:
                if raw.startswith(sym, i):
                    toks.append(_Tok("symbol", sym, pos, lineno, col))
                    i += len(sym)
                    break
            else:
                return toks, _Tok("error", ch, pos, lineno, col)
        offset += len(raw) + 1
    if layout:
        while len(indent_stack) > 1:
            indent_stack.pop()
            toks.append(_Tok("dedent", "<dedent>", len(text), len(lines), 1))
    toks.append(_Tok("eof", "<end of input>", len(text), len(lines), len(lines[-1]) + 1))
    return toks, None


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


class _Fail(Exception):
    """Local parse failure; recovery point decides whether to backtrack."""


class _Hard(Exception):
    """Unrecoverable condition (work bound exceeded, unsupported shape)."""


_TERMINAL_EXPECTS = {
    "STRING": "string literal",
    "INT": "integer",
    "FLOAT": "float",
    "BOOL": "'true' or 'false'",
    "ID": "identifier",
}


class _Parser:
    def __init__(self, g: Grammar, toks: list[_Tok]):
        if g.metamodel is None:
            raise ValueError("parse_program requires a grammar with an attached metamodel")
        self.g = g
        self.m: Metamodel = g.metamodel
        self.toks = toks
        self.pos = 0
        self.best_pos = 0
        self.best_expected: set[str] = set()
        self.trail: list[tuple] = []
        self.refs: list[tuple[_Tok, str, str]] = []  # (token, target_class, name)
        self.steps = 0
        self.budget = 256 * (len(toks) + 1) + 64 * len(g.rules) * (len(toks) + 1)
        self.depth = 0
        self.max_depth = len(toks) + 8
        self.features = {
            c.name: {f.name: f for f in self.m.all_features(c)} for c in self.m.classes
        }
        self.lead_cache: dict[str, frozenset[str]] = {}

    # -- bookkeeping ---------------------------------------------------

    def tok(self) -> _Tok:
        return self.toks[self.pos]

    def fail(self, expected: str):
        p = self.toks[self.pos].pos
        if p > self.best_pos:
            self.best_pos = p
            self.best_expected = {expected}
        elif p == self.best_pos:
            self.best_expected.add(expected)
        raise _Fail()

    def tick(self) -> None:
        self.steps += 1
        if self.steps > self.budget:
            raise _Hard("work bound exceeded")

    def failure(self) -> ParseFailure:
        best = next((t for t in self.toks if t.pos >= self.best_pos), self.toks[-1])
        return ParseFailure(
            position=self.best_pos,
            line=best.line,
            column=best.col,
            expected=tuple(sorted(self.best_expected)),
            found=best.text,
        )

    # -- grammar walking -------------------------------------------------
    #
    # Rule bodies parse in continuation-passing style: every optional or
    # repeating line is a choice point, and a failure later in the same
    # rule unwinds into the alternatives (a keywordless optional line may
    # greedily eat a token another line needed; the rewrite engine creates
    # such grammars routinely). Choices inside an already completed child
    # rule are committed; the work budget bounds total backtracking.

    def parse_root(self) -> InstanceObject:
        if not self.g.rules:
            self.fail("a grammar with rules")

        def expect_eof() -> None:
            if self.tok().kind != "eof":
                self.fail("end of input")

        return self.parse_rule(self.g.rules[0], expect_eof)

    def lead_keywords(self, rule_name: str, stack: tuple[str, ...] = ()) -> frozenset[str]:
        if rule_name in self.lead_cache:
            return self.lead_cache[rule_name]
        if rule_name in stack:
            return frozenset()
        rule = self.g.rule_named(rule_name)
        if rule is None:
            return frozenset()
        first = rule.body[0].elements[0]
        out: frozenset[str]
        if isinstance(first, Keyword):
            out = frozenset({first.literal})
        elif isinstance(first, Alternatives):
            acc: set[str] = set()
            for opt in first.options:
                acc |= self.lead_keywords(opt, stack + (rule_name,))
            out = frozenset(acc)
        else:
            out = frozenset()
        self.lead_cache[rule_name] = out
        return out

    def choice(self, updates: list, first, second) -> None:
        """Try ``first`` (including everything after it via its
        continuation); on failure roll back and take ``second``."""
        saved = (self.pos, len(self.trail), len(self.refs), len(updates))
        try:
            first()
            return
        except _Fail:
            self.pos = saved[0]
            del self.trail[saved[1] :]
            del self.refs[saved[2] :]
            del updates[saved[3] :]
        second()

    def parse_rule(self, rule: ParserRule, cont=None) -> InstanceObject:
        """Parse one rule occurrence; ``cont`` runs after the body matched
        and may still fail back into the body's choice points."""
        self.tick()
        self.depth += 1
        if self.depth > self.max_depth:
            raise _Hard("recursion bound exceeded")
        try:
            if rule.is_dispatch:
                alt = rule.body[0].elements[0]
                assert isinstance(alt, Alternatives)
                obj = self.parse_alternatives(alt, cont)
                self.trail.append(("rule", rule.name))
                self.trail.append(("line", rule.name, (0,)))
                return obj
            updates: list = []
            self.m_lines(rule, rule.body, 0, (), updates, cont or (lambda: None))
            slots: dict[str, object] = {}
            for feature, op, value in updates:
                if op == "+=":
                    slots.setdefault(feature, []).append(value)  # type: ignore[union-attr]
                else:
                    slots[feature] = value
            self.trail.append(("rule", rule.name))
            return InstanceObject(rule.returns, slots)
        finally:
            self.depth -= 1

    def parse_alternatives(self, alt: Alternatives, cont=None) -> InstanceObject:
        nxt = self.tok()
        candidates = []
        for opt in alt.options:
            leads = self.lead_keywords(opt)
            if nxt.text in leads:
                candidates.append(opt)
        if len(candidates) == 1:
            rule = self.g.rule_named(candidates[0])
            assert rule is not None
            return self.parse_rule(rule, cont)
        saved = (self.pos, len(self.trail), len(self.refs))
        for opt in alt.options:
            rule = self.g.rule_named(opt)
            if rule is None:
                continue
            try:
                return self.parse_rule(rule, cont)
            except _Fail:
                self.pos, tlen, rlen = saved[0], saved[1], saved[2]
                del self.trail[tlen:]
                del self.refs[rlen:]
        for opt in alt.options:
            for kw in sorted(self.lead_keywords(opt)):
                if self.toks[self.pos].pos >= self.best_pos:
                    self.best_pos = self.toks[self.pos].pos
                    self.best_expected.add(f"'{kw}'")
        raise _Fail()

    def m_lines(
        self,
        rule: ParserRule,
        lines: tuple[Line, ...],
        i: int,
        prefix: tuple[int, ...],
        updates: list,
        cont,
    ) -> None:
        if i == len(lines):
            cont()
            return
        line = lines[i]
        path = prefix + (i,)

        def rest() -> None:
            self.m_lines(rule, lines, i + 1, prefix, updates, cont)

        card = line.cardinality
        if card == "required":
            self.m_line_once(rule, line, path, updates, rest)
        elif card == "optional":
            self.choice(
                updates,
                lambda: self.m_line_once(rule, line, path, updates, rest),
                rest,
            )
        elif card == "star":
            self.m_star(rule, line, path, updates, rest)
        else:  # plus
            self.m_line_once(
                rule, line, path, updates, lambda: self.m_star(rule, line, path, updates, rest)
            )

    def m_star(self, rule: ParserRule, line: Line, path, updates: list, cont) -> None:
        def once_more() -> None:
            start = self.pos

            def after() -> None:
                if self.pos == start:
                    cont()  # no progress: stop repeating
                else:
                    self.m_star(rule, line, path, updates, cont)

            self.m_line_once(rule, line, path, updates, after)

        self.choice(updates, once_more, cont)

    def m_line_once(self, rule: ParserRule, line: Line, path, updates: list, cont) -> None:
        def done() -> None:
            self.trail.append(("line", rule.name, path))
            cont()

        self.m_elements(rule, line.elements, 0, path, updates, done)

    def m_elements(self, rule: ParserRule, elements, j: int, path, updates: list, cont) -> None:
        if j == len(elements):
            cont()
            return
        self.tick()
        e = elements[j]

        def rest() -> None:
            self.m_elements(rule, elements, j + 1, path, updates, cont)

        if isinstance(e, Keyword):
            self.expect_token(e.literal)
            rest()
            return
        if isinstance(e, Assignment):
            target = self.g.rule_named(e.callee)
            if target is not None:
                child = self.parse_rule(target)
                updates.append((e.feature, e.operator, child))
            else:
                value = self.parse_terminal_value(rule, e)
                updates.append((e.feature, e.operator, value))
            rest()
            return
        if isinstance(e, CrossRef):
            t = self.tok()
            if t.kind != "id":
                self.fail(f"reference to {e.target_class} (identifier)")
            self.pos += 1
            self.refs.append((t, e.target_class, t.text))
            updates.append((e.feature, "=", Ref(t.text)))
            rest()
            return
        if isinstance(e, Block):
            self.m_block(rule, e, path + (j,), updates, rest)
            return
        if isinstance(e, Alternatives):
            raise _Hard(
                f"rule {rule.name}: bare rule calls outside a dispatch rule are unsupported"
            )
        raise _Hard(f"unknown element {e!r}")

    def m_block(self, rule: ParserRule, b: Block, path, updates: list, cont) -> None:
        if b.open == INDENT:
            def with_indent() -> None:
                t = self.tok()
                if t.kind != "indent":
                    self.fail("indented block")
                self.pos += 1

                def close() -> None:
                    t = self.tok()
                    if t.kind != "dedent":
                        self.fail("end of indented block")
                    self.pos += 1
                    cont()

                self.m_lines(rule, b.body, 0, path, updates, close)

            def empty() -> None:
                # An empty layout block leaves no trace in the text.
                if not all(l.cardinality in ("optional", "star") for l in b.body):
                    self.fail("indented block")
                cont()

            self.choice(updates, with_indent, empty)
            return

        self.expect_token(b.open)

        def close_str() -> None:
            self.expect_token(b.close)
            cont()

        self.m_lines(rule, b.body, 0, path, updates, close_str)

    def expect_token(self, literal: str) -> None:
        t = self.tok()
        if t.kind in ("id", "symbol") and t.text == literal:
            self.pos += 1
            return
        self.fail(f"'{literal}'")

    def parse_terminal_value(self, rule: ParserRule, e: Assignment):
        term = self.g.terminal_named(e.callee)
        if term is None:
            raise _Hard(f"rule {rule.name}: assignment callee '{e.callee}' is not declared")
        t = self.tok()
        defn = term.definition
        if defn == "STRING":
            if t.kind != "string":
                self.fail(_TERMINAL_EXPECTS[defn])
            self.pos += 1
            return json.loads(t.text)
        if defn == "INT":
            if t.kind != "int":
                self.fail(_TERMINAL_EXPECTS[defn])
            self.pos += 1
            return int(t.text)
        if defn == "FLOAT":
            if t.kind not in ("float", "int"):
                self.fail(_TERMINAL_EXPECTS[defn])
            self.pos += 1
            return float(t.text)
        if defn == "BOOL":
            if t.kind != "id" or t.text not in ("true", "false"):
                self.fail(_TERMINAL_EXPECTS[defn])
            self.pos += 1
            return t.text == "true"
        if defn == "ID":
            if t.kind != "id":
                self.fail(_TERMINAL_EXPECTS[defn])
            feature = self.features.get(rule.returns, {}).get(e.feature)
            if feature is not None:
                enum = self.m.enum_named(feature.type)
                if enum is not None and t.text not in enum.literals:
                    self.fail("one of " + ", ".join(enum.literals))
            self.pos += 1
            return t.text
        raise _Hard(f"unknown terminal class {defn}")


def parse_program(g: Grammar, text: str):
    """Parse a domain program; returns ParseOk or ParseFailure, never raises
    on any byte input. The grammar must carry an attached metamodel."""
    if g.metamodel is None:
        raise ValueError("parse_program requires a grammar with an attached metamodel")
    toks, bad = _tokenize(text, _grammar_symbols(g), g.uses_layout)
    if bad is not None:
        # Parse the clean prefix; the first bad character bounds the input.
        toks = toks + [_Tok("eof", "<end of input>", bad.pos, bad.line, bad.col)]
    parser = _Parser(g, toks)
    old_limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old_limit, 10000 + 16 * len(toks)))
    try:
        obj = parser.parse_root()
        model = InstanceModel(obj)
        ref_fail = _check_references(parser, model)
        if ref_fail is not None:
            return ref_fail
        if bad is not None:
            return ParseFailure(
                position=bad.pos,
                line=bad.line,
                column=bad.col,
                expected=("end of input",),
                found=bad.text,
            )
        return ParseOk(model, frozenset(parser.trail))
    except (_Fail, _Hard):
        if bad is not None and bad.pos >= parser.best_pos:
            return ParseFailure(
                position=bad.pos,
                line=bad.line,
                column=bad.col,
                expected=("a valid token",),
                found=bad.text,
            )
        return parser.failure()
    finally:
        sys.setrecursionlimit(old_limit)


def _check_references(parser: _Parser, model: InstanceModel):
    m = parser.m
    ids: dict[str, list[str]] = {}
    for obj in _walk_objects(model.root):
        name = identifying_value(m, obj)
        if name is not None:
            ids.setdefault(name, []).append(obj.cls)
    for tok, target, name in parser.refs:
        classes = ids.get(name, [])
        if not any(m.is_subtype(cls, target) for cls in classes):
            return ParseFailure(
                position=tok.pos,
                line=tok.line,
                column=tok.col,
                expected=(f"reference to a {target}",),
                found=name,
            )
    return None


def _walk_objects(obj: InstanceObject):
    yield obj
    for value in obj.slots.values():
        items = value if isinstance(value, list) else [value]
        for item in items:
            if isinstance(item, InstanceObject):
                yield from _walk_objects(item)


def identifying_value(m: Metamodel, obj: InstanceObject) -> str | None:
    """Value of the object's identifying attribute: its first string-typed
    attribute, in declaration order including inherited features."""
    cls = m.class_named(obj.cls)
    if cls is None:
        return None
    for f in m.all_features(cls):
        if f.kind == "attribute" and f.type == "string":
            value = obj.slots.get(f.name)
            return value if isinstance(value, str) else None
    return None


def validate_instance(m: Metamodel, model: InstanceModel) -> list[str]:
    """Lower-bound violations: required features left unset."""
    out = []
    for obj in _walk_objects(model.root):
        cls = m.class_named(obj.cls)
        if cls is None:
            out.append(f"{obj.cls}: unknown class")
            continue
        for f in m.all_features(cls):
            if f.lower >= 1:
                value = obj.slots.get(f.name)
                if value is None or (isinstance(value, list) and not value):
                    out.append(f"{obj.cls}.{f.name}: required feature unset")
    return out


# ---------------------------------------------------------------------------
# Serializer
# ---------------------------------------------------------------------------


class _Writer:
    def __init__(self) -> None:
        self.rows: list[str] = []
        self.tokens: list[str] = []
        self.level = 0
        self.last_level: int | None = None

    def token(self, text: str) -> None:
        self.tokens.append(text)

    def newline(self) -> None:
        if self.tokens:
            self.rows.append("    " * self.level + " ".join(self.tokens))
            self.tokens = []
            self.last_level = self.level

    def text(self) -> str:
        self.newline()
        return "\n".join(self.rows) + "\n" if self.rows else "\n"


def serialize_instance(g: Grammar, model: InstanceModel) -> str:
    """Deterministic text for an instance model.

    Under an unambiguous grammar the text parses back to the same model;
    an ambiguous grammar (rewrites can produce one) may re-attach content
    greedily, but parse and serialize always stabilize after one step.
    Raises SerializeError when a populated slot has no assignment in the
    grammar (inexpressible), a grammar-required slot is unset, or layout
    blocks would render without a visible boundary."""
    if g.metamodel is None:
        raise ValueError("serialize_instance requires a grammar with an attached metamodel")
    writer = _Writer()
    layout = g.uses_layout
    rule = _content_rule(g, model.root.cls)
    if rule is None:
        raise SerializeError(f"no grammar rule produces class {model.root.cls}")
    _emit_object(g, rule, model.root, writer, layout)
    return writer.text()


def _content_rule(g: Grammar, cls: str) -> ParserRule | None:
    for r in g.rules:
        if r.returns == cls and not r.is_dispatch:
            return r
    return None


class _SlotCursor:
    """Tracks per-feature consumption while walking the grammar."""

    def __init__(self, obj: InstanceObject):
        self.obj = obj
        self.remaining: dict[str, list] = {}
        self.consumed: set[str] = set()
        for feature, value in obj.slots.items():
            self.remaining[feature] = list(value) if isinstance(value, list) else [value]

    def available(self, feature: str) -> int:
        return len(self.remaining.get(feature, []))

    def take(self, feature: str):
        self.consumed.add(feature)
        return self.remaining[feature].pop(0)

    def mark(self, feature: str) -> None:
        self.consumed.add(feature)

    def leftovers(self) -> list[str]:
        out = []
        for feature, values in self.remaining.items():
            if values:
                out.append(feature)
        return out


def _emit_object(g: Grammar, rule: ParserRule, obj: InstanceObject, w: _Writer, layout: bool) -> None:
    cursor = _SlotCursor(obj)
    for line in rule.body:
        _emit_line(g, rule, line, obj, cursor, w, layout)
    leftover = cursor.leftovers()
    if leftover:
        raise SerializeError(
            f"{obj.cls}: feature(s) {', '.join(sorted(leftover))} cannot be expressed "
            f"by rule {rule.name}"
        )


def _line_features(line: Line) -> list[tuple[str, str]]:
    """(feature, operator) pairs assigned anywhere on the line, nested
    blocks included."""
    out: list[tuple[str, str]] = []
    for e in line.elements:
        if isinstance(e, Assignment):
            out.append((e.feature, e.operator))
        elif isinstance(e, CrossRef):
            out.append((e.feature, "="))
        elif isinstance(e, Block):
            for inner in e.body:
                out.extend(_line_features(inner))
    return out


def _direct_features(line: Line) -> list[tuple[str, str]]:
    """(feature, operator) pairs assigned by the line's own elements only;
    lines nested in blocks decide their own emission."""
    out: list[tuple[str, str]] = []
    for e in line.elements:
        if isinstance(e, Assignment):
            out.append((e.feature, e.operator))
        elif isinstance(e, CrossRef):
            out.append((e.feature, "="))
    return out


def _emit_line(
    g: Grammar,
    rule: ParserRule,
    line: Line,
    obj: InstanceObject,
    cursor: _SlotCursor,
    w: _Writer,
    layout: bool,
) -> None:
    drivers = _line_features(line)

    def ready() -> bool:
        return bool(drivers) and all(cursor.available(f) > 0 for f, _ in drivers)

    if line.cardinality == "required":
        for f, _ in _direct_features(line):
            if cursor.available(f) == 0:
                raise SerializeError(
                    f"{obj.cls}.{f}: required by rule {rule.name} but unset"
                )
        _emit_line_once(g, rule, line, obj, cursor, w, layout)
        return
    if line.cardinality == "optional":
        if ready():
            _emit_line_once(g, rule, line, obj, cursor, w, layout)
        else:
            for f, _ in drivers:
                cursor.mark(f)  # feature is expressible here even when empty
        return
    # star / plus
    if line.cardinality == "plus":
        for f, _ in drivers:
            if cursor.available(f) == 0:
                raise SerializeError(f"{obj.cls}.{f}: at least one value required")
        _emit_line_once(g, rule, line, obj, cursor, w, layout)
    emitted_any = False
    while ready():
        multi = [f for f, op in drivers if op == "+="]
        _emit_line_once(g, rule, line, obj, cursor, w, layout)
        emitted_any = True
        if not multi:
            break  # single-valued drivers cannot repeat
    if not emitted_any:
        for f, _ in drivers:
            cursor.mark(f)


def _emit_line_once(
    g: Grammar,
    rule: ParserRule,
    line: Line,
    obj: InstanceObject,
    cursor: _SlotCursor,
    w: _Writer,
    layout: bool,
) -> None:
    for e in line.elements:
        if isinstance(e, Keyword):
            w.token(e.literal)
        elif isinstance(e, Assignment):
            value = cursor.take(e.feature)
            target = g.rule_named(e.callee)
            if target is not None:
                if not isinstance(value, InstanceObject):
                    raise SerializeError(
                        f"{obj.cls}.{e.feature}: expected a contained object, got {value!r}"
                    )
                child_rule = _content_rule(g, value.cls)
                if child_rule is None:
                    raise SerializeError(f"no grammar rule produces class {value.cls}")
                _emit_inline_object(g, child_rule, value, w, layout)
            else:
                w.token(_format_value(g, e.callee, value, obj, e.feature))
        elif isinstance(e, CrossRef):
            value = cursor.take(e.feature)
            name = value.name if isinstance(value, Ref) else value
            if not isinstance(name, str):
                raise SerializeError(f"{obj.cls}.{e.feature}: expected a reference")
            w.token(name)
        elif isinstance(e, Block):
            _emit_block(g, rule, e, obj, cursor, w, layout)
        elif isinstance(e, Alternatives):
            raise SerializeError(
                f"rule {rule.name}: bare rule calls outside a dispatch rule are unsupported"
            )
    w.newline()


def _emit_inline_object(g: Grammar, rule: ParserRule, obj: InstanceObject, w: _Writer, layout: bool) -> None:
    # A contained object renders inline at the current position: its first
    # line continues the current row, then its remaining rows follow.
    _emit_object(g, rule, obj, w, layout)


def _emit_block(
    g: Grammar,
    rule: ParserRule,
    b: Block,
    obj: InstanceObject,
    cursor: _SlotCursor,
    w: _Writer,
    layout: bool,
) -> None:
    if b.open == INDENT:
        # Without anchor content on the opening row, a fresh indentation
        # block lands at the same column where the previous one closed and
        # the boundary becomes invisible to the layout lexer.
        if not w.tokens and w.last_level is not None and w.last_level > w.level:
            raise SerializeError(
                f"{obj.cls}: an indentation-delimited block immediately after "
                f"another one cannot be expressed"
            )
        w.newline()
        w.level += 1
    else:
        w.token(b.open)
        w.newline()
        if not layout:
            w.level += 1
    for line in b.body:
        _emit_line(g, rule, line, obj, cursor, w, layout)
    w.newline()
    if b.close == DEDENT:
        w.level -= 1
    else:
        if not layout:
            w.level -= 1
        w.token(b.close)


def _format_value(g: Grammar, callee: str, value, obj: InstanceObject, feature: str) -> str:
    term = g.terminal_named(callee)
    defn = term.definition if term is not None else "ID"
    if defn == "STRING":
        if not isinstance(value, str):
            raise SerializeError(f"{obj.cls}.{feature}: expected a string, got {value!r}")
        return json.dumps(value)
    if defn == "INT":
        if not isinstance(value, int) or isinstance(value, bool):
            raise SerializeError(f"{obj.cls}.{feature}: expected an int, got {value!r}")
        return str(value)
    if defn == "FLOAT":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise SerializeError(f"{obj.cls}.{feature}: expected a float, got {value!r}")
        text = repr(float(value))
        if "." not in text and "e" not in text and "E" not in text:
            text += ".0"
        return text
    if defn == "BOOL":
        if not isinstance(value, bool):
            raise SerializeError(f"{obj.cls}.{feature}: expected a bool, got {value!r}")
        return "true" if value else "false"
    # ID: enum literals and plain identifiers print bare.
    if not isinstance(value, str) or not _ID_RE.fullmatch(value):
        raise SerializeError(f"{obj.cls}.{feature}: expected an identifier, got {value!r}")
    return value


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------

_STRING_POOL = ("a", "b", "c", "d", "e")
_INT_POOL = (0, 1, 2)
_FLOAT_POOL = (0.0, 0.5, 1.5)


def sampling_diagnostic(g: Grammar) -> str | None:
    if not g.rules:
        return "grammar has no rules"
    root = g.rules[0]
    if root.is_dispatch and _dispatch_targets(g, root) == []:
        return f"root rule {root.name} reaches no concrete rule"
    return None


def _dispatch_targets(g: Grammar, rule: ParserRule, seen: frozenset = frozenset()) -> list[ParserRule]:
    if rule.name in seen:
        return []
    if not rule.is_dispatch:
        return [rule]
    alt = rule.body[0].elements[0]
    assert isinstance(alt, Alternatives)
    out: list[ParserRule] = []
    for opt in alt.options:
        r = g.rule_named(opt)
        if r is not None:
            out.extend(_dispatch_targets(g, r, seen | {rule.name}))
    return out


class _Unsamplable(Exception):
    """The grammar demands content no finite instance can supply (e.g. a
    required recursive containment)."""


def sample_models(g: Grammar, seed: int, count: int, max_depth: int) -> list[InstanceModel]:
    """Deterministically sample instance models by walking the grammar.

    Optional lines are included with seeded probability, except lines
    assigning a feature whose metamodel lower bound is 1, which are always
    included; containment recursion is cut at ``max_depth``. References are
    filled in a second pass from compatible objects already in the tree.
    A grammar that requires unbounded recursion yields fewer models than
    requested (possibly none).
    """
    if g.metamodel is None:
        raise ValueError("sample_models requires a grammar with an attached metamodel")
    if sampling_diagnostic(g) is not None:
        return []
    out = []
    for i in range(count):
        rng = random.Random(f"{seed}:{i}")
        sampler = _Sampler(g, rng, max_depth)
        try:
            root = sampler.sample_rule(g.rules[0], 1)
        except _Unsamplable:
            continue
        sampler.resolve_refs(root)
        out.append(InstanceModel(root))
    return out


def sample_instances(g: Grammar, seed: int, count: int, max_depth: int) -> list[str]:
    """Sampled example programs, each parseable under the grammar.

    Models the grammar itself cannot express (a grammar-required reference
    with no resolvable target, for instance) are dropped, so the output may
    be shorter than ``count``.
    """
    out = []
    for m in sample_models(g, seed, count, max_depth):
        try:
            out.append(serialize_instance(g, m))
        except SerializeError:
            continue
    return out


class _Sampler:
    def __init__(self, g: Grammar, rng: random.Random, max_depth: int):
        self.g = g
        self.m = g.metamodel
        self.rng = rng
        self.max_depth = max_depth
        self.deferred: list[tuple[dict, str, str, str]] = []  # (slots, feature, op, target)
        self.features = {
            c.name: {f.name: f for f in self.m.all_features(c)} for c in self.m.classes
        }

    def sample_rule(self, rule: ParserRule, depth: int) -> InstanceObject:
        if depth > self.max_depth + 32:
            # Only reachable when required lines force recursion the depth
            # cut cannot stop: no finite instance exists.
            raise _Unsamplable(rule.name)
        if rule.is_dispatch:
            targets = _dispatch_targets(self.g, rule)
            chosen = self.rng.choice(targets)
            return self.sample_rule(chosen, depth)
        slots: dict[str, object] = {}
        for line in rule.body:
            self.sample_line(rule, line, slots, depth)
        return InstanceObject(rule.returns, slots)

    def _line_contains_containment(self, line: Line) -> bool:
        for e in line.elements:
            if isinstance(e, Assignment) and self.g.rule_named(e.callee) is not None:
                return True
            if isinstance(e, Block) and any(
                self._line_contains_containment(inner) for inner in e.body
            ):
                return True
        return False

    def _forced(self, rule: ParserRule, line: Line) -> bool:
        for f, _ in _line_features(line):
            feature = self.features.get(rule.returns, {}).get(f)
            if feature is not None and feature.lower >= 1:
                return True
        return False

    def sample_line(self, rule: ParserRule, line: Line, slots: dict, depth: int) -> None:
        card = line.cardinality
        if self._line_contains_containment(line) and depth >= self.max_depth:
            if card in ("optional", "star"):
                return
        count = 1
        if card == "optional":
            if not self._forced(rule, line) and self.rng.random() >= 0.6:
                return
        elif card == "star":
            count = self.rng.choice((0, 1, 2))
            if count == 0:
                return
        elif card == "plus":
            count = 1 + self.rng.choice((0, 1))
        for _ in range(count):
            self.sample_line_once(rule, line, slots, depth)

    def sample_line_once(self, rule: ParserRule, line: Line, slots: dict, depth: int) -> None:
        for e in line.elements:
            if isinstance(e, Assignment):
                target = self.g.rule_named(e.callee)
                if target is not None:
                    value: object = self.sample_rule(target, depth + 1)
                else:
                    value = self.sample_value(rule, e)
                _store(slots, e.feature, e.operator, value)
            elif isinstance(e, CrossRef):
                self.deferred.append((slots, e.feature, "=", e.target_class))
            elif isinstance(e, Block):
                for inner in e.body:
                    self.sample_line(rule, inner, slots, depth)

    def sample_value(self, rule: ParserRule, e: Assignment):
        feature = self.features.get(rule.returns, {}).get(e.feature)
        if feature is not None:
            enum = self.m.enum_named(feature.type)
            if enum is not None:
                return self.rng.choice(enum.literals)
        term = self.g.terminal_named(e.callee)
        defn = term.definition if term is not None else "ID"
        if defn == "STRING":
            return self.rng.choice(_STRING_POOL)
        if defn == "INT":
            return self.rng.choice(_INT_POOL)
        if defn == "FLOAT":
            return self.rng.choice(_FLOAT_POOL)
        if defn == "BOOL":
            return self.rng.choice((True, False))
        return self.rng.choice(_STRING_POOL)

    def resolve_refs(self, root: InstanceObject) -> None:
        # Candidates come from the finished tree: a line emission that got
        # overwritten may have created objects that are no longer reachable.
        reachable = list(_walk_objects(root))
        for slots, feature, op, target in self.deferred:
            candidates = []
            for obj in reachable:
                if not self.m.is_subtype(obj.cls, target):
                    continue
                name = identifying_value(self.m, obj)
                if name is not None:
                    candidates.append(name)
            if not candidates:
                continue  # leave the slot empty; the line will be omitted
            _store(slots, feature, op, Ref(self.rng.choice(candidates)))


def _store(slots: dict, feature: str, op: str, value: object) -> None:
    if op == "+=":
        slots.setdefault(feature, []).append(value)
    else:
        slots[feature] = value


# ---------------------------------------------------------------------------
# Migration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MigrationResult:
    text: str
    dropped: tuple[str, ...] = ()


def migrate_program(g_old: Grammar, g_new: Grammar, text: str) -> MigrationResult:
    """Re-render a program valid under ``g_old`` with ``g_new``.

    Slots with no assignment under the new grammar are dropped and reported,
    as are objects of classes without a rule and references whose target
    disappeared. Raises MigrationError when the program does not parse under
    the old grammar or the root class is missing from the new one.
    """
    result = parse_program(g_old, text)
    if not result.is_ok:
        raise MigrationError(f"program does not parse under the old grammar: {result}")
    model = result.model
    if _content_rule(g_new, model.root.cls) is None:
        raise MigrationError(f"root class {model.root.cls} has no rule in the new grammar")

    expressible: dict[str, set[str]] = {}
    for rule in g_new.rules:
        if rule.is_dispatch:
            continue
        feats: set[str] = set()
        for line in rule.body:
            feats.update(f for f, _ in _line_features(line))
        expressible[rule.returns] = feats

    dropped: list[str] = []

    def rebuild(obj: InstanceObject, path: str) -> InstanceObject | None:
        if obj.cls not in expressible:
            dropped.append(f"{path}: class {obj.cls} is gone")
            return None
        slots: dict[str, object] = {}
        for feature, value in obj.slots.items():
            fpath = f"{path}.{feature}"
            if feature not in expressible[obj.cls]:
                dropped.append(f"{fpath}: not expressible under the new grammar")
                continue
            if isinstance(value, list):
                kept = []
                for i, item in enumerate(value):
                    if isinstance(item, InstanceObject):
                        child = rebuild(item, f"{fpath}[{i}]")
                        if child is not None:
                            kept.append(child)
                    else:
                        kept.append(item)
                if kept:
                    slots[feature] = kept
            elif isinstance(value, InstanceObject):
                child = rebuild(value, fpath)
                if child is not None:
                    slots[feature] = child
            else:
                slots[feature] = value
        return InstanceObject(obj.cls, slots)

    root = rebuild(model.root, model.root.cls)
    assert root is not None

    # Drop references whose target object no longer exists.
    m_new = g_new.metamodel if g_new.metamodel is not None else g_old.metamodel
    names: set[str] = set()
    for obj in _walk_objects(root):
        name = identifying_value(m_new, obj) if m_new else None
        if name is not None:
            names.add(name)

    def scrub(obj: InstanceObject, path: str) -> InstanceObject:
        slots = {}
        for feature, value in obj.slots.items():
            fpath = f"{path}.{feature}"
            if isinstance(value, Ref) and value.name not in names:
                dropped.append(f"{fpath}: reference target '{value.name}' is gone")
                continue
            if isinstance(value, list):
                value = [
                    scrub(v, f"{fpath}[{i}]") if isinstance(v, InstanceObject) else v
                    for i, v in enumerate(value)
                ]
            elif isinstance(value, InstanceObject):
                value = scrub(value, fpath)
            slots[feature] = value
        return InstanceObject(obj.cls, slots)

    root = scrub(root, root.cls)
    new_text = serialize_instance(g_new, InstanceModel(root))
    return MigrationResult(new_text, tuple(dropped))
