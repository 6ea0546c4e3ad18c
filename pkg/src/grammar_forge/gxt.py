"""Parser and canonical printer for the ``.gxt`` grammar text format.

The format is a strict subset of Xtext's grammar language: quoted keywords,
``=``/``+=``/``?=`` assignments, ``(...)``?/*/+ groups, ``returns``, and
``terminal`` rules over the built-in lexeme classes. Unsupported Xtext
constructs (actions, predicates, hidden-token clauses) are rejected.

Canonical form, produced by :func:`print_grammar`:

* header ``grammar <Name>``, one rule per paragraph,
* rule header ``Name returns Class:`` on its own line,
* one grammar line per physical line, indented one tab per block depth,
* block bodies nested under their opening delimiter, closing delimiter on
  its own line, ``;`` terminator at column zero,
* terminal rules last, one per line.

Blocks are recovered from layout (a trailing delimiter whose following
lines are indented one level deeper) or, for ``'{'``/``'}'`` pairs and
empty blocks, inline on a single physical line.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import GrammarSyntaxError
from .grammar import (
    DEDENT,
    INDENT,
    TERMINAL_CLASSES,
    Alternatives,
    Assignment,
    Block,
    CrossRef,
    Element,
    Grammar,
    Keyword,
    Line,
    ParserRule,
    TerminalRule,
    validate_grammar,
)

_SUFFIX = {"required": "", "optional": "?", "star": "*", "plus": "+"}
_CARD_BY_SUFFIX = {"?": "optional", "*": "star", "+": "plus"}


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------


def print_grammar(g: Grammar) -> str:
    """Render a grammar in canonical form; deterministic byte output."""
    parts = [f"grammar {g.name}"]
    for rule in g.rules:
        parts.append(_render_rule(rule))
    if g.terminals:
        parts.append("\n".join(f"terminal {t.name}: {t.definition};" for t in g.terminals))
    return "\n\n".join(parts) + "\n"


def _render_rule(rule: ParserRule) -> str:
    out = [f"{rule.name} returns {rule.returns}:"]
    for line in rule.body:
        out.extend(_render_line(line, 1))
    out.append(";")
    return "\n".join(out)


def _render_line(line: Line, depth: int) -> list[str]:
    indent = "\t" * depth
    grouped = line.cardinality != "required"
    phys: list[str] = []
    tokens: list[str] = []
    first_segment = True

    def emit(segment_tokens: list[str], final: bool) -> str:
        prefix = "(" if grouped and first_segment else ""
        text = indent + prefix + " ".join(segment_tokens)
        if final and grouped:
            text += ")" + _SUFFIX[line.cardinality]
        return text

    for e in line.elements:
        if isinstance(e, Block):
            if not e.body:
                tokens.append(_delim_token(e.open))
                tokens.append(_delim_token(e.close))
                continue
            tokens.append(_delim_token(e.open))
            phys.append(emit(tokens, final=False))
            first_segment = False
            for inner in e.body:
                phys.extend(_render_line(inner, depth + 1))
            tokens = [_delim_token(e.close)]
        else:
            tokens.append(_render_element(e))
    phys.append(emit(tokens, final=True))
    return phys


def _delim_token(delim: str) -> str:
    if delim in (INDENT, DEDENT):
        return delim
    return f"'{delim}'"


def _render_element(e: Element) -> str:
    if isinstance(e, Keyword):
        return f"'{e.literal}'"
    if isinstance(e, Assignment):
        return f"{e.feature}{e.operator}{e.callee}"
    if isinstance(e, CrossRef):
        return f"{e.feature}=[{e.target_class}|{e.id_terminal}]"
    if isinstance(e, Alternatives):
        return " | ".join(e.options)
    raise TypeError(f"unprintable element {e!r}")


# ---------------------------------------------------------------------------
# Tokenizer
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Tok:
    kind: str  # 'id' | 'quoted' | 'sym'
    text: str
    line: int
    col: int


@dataclass(frozen=True)
class _PhysLine:
    indent: int
    tokens: tuple[_Tok, ...]
    lineno: int


_SYMBOLS = ("+=", "?=", "=", "(", ")", "[", "]", "|", ";", ":", "?", "*", "+")


def _tokenize(text: str) -> list[_PhysLine]:
    out: list[_PhysLine] = []
    for lineno, raw in enumerate(text.split("\n"), start=1):
        i = 0
        indent = 0
        while i < len(raw):
            if raw[i] == "\t":
                indent += 1
                i += 1
            elif raw.startswith("    ", i):
                indent += 1
                i += 4
            else:
                break
        toks: list[_Tok] = []
        while i < len(raw):
            ch = raw[i]
            if ch in (" ", "\t"):
                i += 1
                continue
            if ch == "/" and raw.startswith("//", i):
                break
            col = i + 1
            if ch == "'":
                j = raw.find("'", i + 1)
                if j < 0:
                    raise GrammarSyntaxError("unterminated keyword literal", lineno, col)
                toks.append(_Tok("quoted", raw[i + 1 : j], lineno, col))
                i = j + 1
                continue
            if ch.isalpha() or ch == "_":
                j = i
                while j < len(raw) and (raw[j].isalnum() or raw[j] == "_"):
                    j += 1
                toks.append(_Tok("id", raw[i:j], lineno, col))
                i = j
                continue
            if ch == "{" or ch == "}":
                raise GrammarSyntaxError(
                    "Xtext actions '{...}' are not supported; braces must be quoted keywords",
                    lineno,
                    col,
                )
            if raw.startswith("=>", i) or raw.startswith("->", i):
                raise GrammarSyntaxError("syntactic predicates are not supported", lineno, col)
            for sym in _SYMBOLS:
                if raw.startswith(sym, i):
                    toks.append(_Tok("sym", sym, lineno, col))
                    i += len(sym)
                    break
            else:
                raise GrammarSyntaxError(f"unexpected character {ch!r}", lineno, col)
        if toks:
            out.append(_PhysLine(indent, tuple(toks), lineno))
    return out


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------


def parse_grammar(text: str) -> Grammar:
    """Parse grammar text and validate every grammar invariant."""
    phys = _tokenize(text)
    if not phys:
        raise GrammarSyntaxError("missing 'grammar <Name>' header", 1, 1)
    header = phys[0]
    if not (
        len(header.tokens) == 2
        and header.tokens[0].kind == "id"
        and header.tokens[0].text == "grammar"
        and header.tokens[1].kind == "id"
    ):
        t = header.tokens[0]
        raise GrammarSyntaxError("expected 'grammar <Name>' header", t.line, t.col)
    name = header.tokens[1].text

    rules: list[ParserRule] = []
    terminals: list[TerminalRule] = []
    pos = 1
    while pos < len(phys):
        first = phys[pos].tokens[0]
        if first.kind == "id" and first.text == "terminal":
            terminals.append(_parse_terminal(phys[pos]))
            pos += 1
        else:
            rule, pos = _parse_rule(phys, pos)
            rules.append(rule)

    g = Grammar(name=name, rules=tuple(rules), terminals=tuple(terminals))
    validate_grammar(g)
    return g


def _parse_terminal(line: _PhysLine) -> TerminalRule:
    toks = line.tokens
    ok = (
        len(toks) == 5
        and toks[1].kind == "id"
        and toks[2].text == ":"
        and toks[3].kind == "id"
        and toks[4].text == ";"
    )
    if not ok:
        raise GrammarSyntaxError(
            "expected 'terminal <Name>: <CLASS>;'", toks[0].line, toks[0].col
        )
    if toks[3].text not in TERMINAL_CLASSES:
        raise GrammarSyntaxError(
            f"unknown lexeme class '{toks[3].text}' (expected one of {', '.join(TERMINAL_CLASSES)})",
            toks[3].line,
            toks[3].col,
        )
    return TerminalRule(name=toks[1].text, definition=toks[3].text)


def _parse_rule(phys: list[_PhysLine], pos: int) -> tuple[ParserRule, int]:
    header = phys[pos]
    toks = header.tokens
    if not (
        len(toks) >= 4
        and toks[0].kind == "id"
        and toks[1].kind == "id"
        and toks[1].text == "returns"
        and toks[2].kind == "id"
        and toks[3].text == ":"
    ):
        raise GrammarSyntaxError(
            "expected rule header '<Name> returns <Class>:'", toks[0].line, toks[0].col
        )
    rule_name, returns = toks[0].text, toks[2].text

    if len(toks) > 4:
        # Inline form: the whole body follows the colon, terminated by ';'.
        flat: list[_Tok] = list(toks[4:])
        end = pos + 1
        while not any(t.text == ";" and t.kind == "sym" for t in flat):
            if end >= len(phys):
                raise GrammarSyntaxError(f"rule {rule_name}: missing ';'", toks[0].line, toks[0].col)
            flat.extend(phys[end].tokens)
            end += 1
        body, j = _parse_inline_lines(flat, 0, _is_semi)
        if j != len(flat) - 1:
            t = flat[j + 1]
            raise GrammarSyntaxError("unexpected tokens after ';'", t.line, t.col)
        return ParserRule(rule_name, returns, tuple(body)), end

    body, pos = _parse_layout_lines(phys, pos + 1, 1)
    if pos >= len(phys) or phys[pos].tokens[0].text != ";":
        where = phys[pos].tokens[0] if pos < len(phys) else toks[0]
        raise GrammarSyntaxError(f"rule {rule_name}: missing ';'", where.line, where.col)
    return ParserRule(rule_name, returns, tuple(body)), pos + 1


def _is_semi(t: _Tok) -> bool:
    return t.kind == "sym" and t.text == ";"


def _is_close_brace(t: _Tok) -> bool:
    return t.kind == "quoted" and t.text == "}"


# --- layout form -----------------------------------------------------------


def _parse_layout_lines(
    phys: list[_PhysLine], pos: int, depth: int
) -> tuple[list[Line], int]:
    lines: list[Line] = []
    while pos < len(phys) and phys[pos].indent == depth:
        line, pos = _parse_layout_line(phys, pos, depth)
        lines.append(line)
    return lines, pos


def _parse_layout_line(
    phys: list[_PhysLine], pos: int, depth: int
) -> tuple[Line, int]:
    toks = list(phys[pos].tokens)
    j = 0
    grouped = False
    if toks[j].text == "(" and toks[j].kind == "sym":
        grouped = True
        j += 1
    elements: list[Element] = []
    cardinality = "required"

    while True:
        if j >= len(toks):
            if grouped:
                t = toks[-1]
                raise GrammarSyntaxError("unclosed group '(...'", t.line, t.col)
            return Line(tuple(elements), "required"), pos + 1
        t = toks[j]
        if grouped and t.kind == "sym" and t.text == ")":
            j += 1
            if j < len(toks) and toks[j].kind == "sym" and toks[j].text in _CARD_BY_SUFFIX:
                cardinality = _CARD_BY_SUFFIX[toks[j].text]
                j += 1
            if j != len(toks):
                raise GrammarSyntaxError("unexpected tokens after group close", toks[j].line, toks[j].col)
            return Line(tuple(elements), cardinality), pos + 1

        opens_layout_block = (
            j == len(toks) - 1
            and (t.kind == "quoted" or (t.kind == "id" and t.text == INDENT))
            and pos + 1 < len(phys)
            and phys[pos + 1].indent == depth + 1
        )
        if opens_layout_block:
            open_delim = t.text if t.kind == "quoted" else INDENT
            body, pos = _parse_layout_lines(phys, pos + 1, depth + 1)
            if pos >= len(phys) or phys[pos].indent != depth:
                raise GrammarSyntaxError("missing block close delimiter", t.line, t.col)
            toks = list(phys[pos].tokens)
            ct = toks[0]
            if ct.kind == "quoted":
                close_delim = ct.text
            elif ct.kind == "id" and ct.text == DEDENT:
                close_delim = DEDENT
            else:
                raise GrammarSyntaxError("expected block close delimiter", ct.line, ct.col)
            elements.append(Block(open_delim, close_delim, tuple(body)))
            j = 1
            continue

        element, j = _parse_element(toks, j, allow_inline_block=True)
        elements.append(element)


# --- inline form -----------------------------------------------------------


def _parse_inline_lines(toks: list[_Tok], j: int, is_stop) -> tuple[list[Line], int]:
    """Parse lines from a flat token run until the stop token; returns the
    lines and the index of the stop token."""
    lines: list[Line] = []
    run: list[Element] = []

    def flush() -> None:
        if run:
            lines.append(Line(tuple(run), "required"))
            run.clear()

    while True:
        if j >= len(toks):
            raise GrammarSyntaxError("unexpected end of rule body", toks[-1].line, toks[-1].col)
        t = toks[j]
        if is_stop(t):
            flush()
            return lines, j
        if t.kind == "sym" and t.text == "(":
            flush()
            group_elems: list[Element] = []
            j += 1
            while True:
                if j >= len(toks):
                    raise GrammarSyntaxError("unclosed group '(...'", t.line, t.col)
                if toks[j].kind == "sym" and toks[j].text == ")":
                    j += 1
                    break
                element, j = _parse_element(toks, j, allow_inline_block=True)
                group_elems.append(element)
            card = "required"
            if j < len(toks) and toks[j].kind == "sym" and toks[j].text in _CARD_BY_SUFFIX:
                card = _CARD_BY_SUFFIX[toks[j].text]
                j += 1
            lines.append(Line(tuple(group_elems), card))
            continue
        element, j = _parse_element(toks, j, allow_inline_block=True)
        run.append(element)


def _parse_element(toks: list[_Tok], j: int, allow_inline_block: bool) -> tuple[Element, int]:
    t = toks[j]
    if t.kind == "quoted":
        if t.text == "{" and allow_inline_block:
            # An immediately closed pair is just two delimiter keywords: an
            # empty block accepts exactly the same programs, so the format
            # normalizes it away.
            if j + 1 < len(toks) and _is_close_brace(toks[j + 1]):
                return Keyword("{"), j + 1
            body, j = _parse_inline_lines(toks, j + 1, _is_close_brace)
            return Block("{", "}", tuple(body)), j + 1
        return Keyword(t.text), j + 1
    if t.kind == "id":
        if t.text in (INDENT, DEDENT):
            raise GrammarSyntaxError(f"'{t.text}' is reserved for layout blocks", t.line, t.col)
        nxt = toks[j + 1] if j + 1 < len(toks) else None
        if nxt is not None and nxt.kind == "sym" and nxt.text in ("=", "+=", "?="):
            op = nxt.text
            k = j + 2
            if k >= len(toks):
                raise GrammarSyntaxError("assignment missing its callee", t.line, t.col)
            callee = toks[k]
            if callee.kind == "sym" and callee.text == "[":
                return _parse_crossref(toks, j, t.text, op)
            if callee.kind != "id":
                raise GrammarSyntaxError("assignment callee must be a rule name", callee.line, callee.col)
            return Assignment(t.text, op, callee.text), k + 1
        # Bare rule reference(s): one or more names separated by '|'.
        options = [t.text]
        k = j + 1
        while (
            k + 1 < len(toks)
            and toks[k].kind == "sym"
            and toks[k].text == "|"
            and toks[k + 1].kind == "id"
        ):
            options.append(toks[k + 1].text)
            k += 2
        return Alternatives(tuple(options)), k
    raise GrammarSyntaxError(f"unexpected token {t.text!r}", t.line, t.col)


def _parse_crossref(toks: list[_Tok], j: int, feature: str, op: str) -> tuple[CrossRef, int]:
    t = toks[j]
    if op != "=":
        raise GrammarSyntaxError("cross-references use the '=' operator", t.line, t.col)
    k = j + 3  # past feature, '=', '['
    if k >= len(toks) or toks[k].kind != "id":
        raise GrammarSyntaxError("cross-reference missing target class", t.line, t.col)
    target = toks[k].text
    k += 1
    id_terminal = "ID"
    if k < len(toks) and toks[k].kind == "sym" and toks[k].text == "|":
        if k + 1 >= len(toks) or toks[k + 1].kind != "id":
            raise GrammarSyntaxError("cross-reference missing id terminal", t.line, t.col)
        id_terminal = toks[k + 1].text
        k += 2
    if k >= len(toks) or toks[k].text != "]":
        raise GrammarSyntaxError("cross-reference missing ']'", t.line, t.col)
    return CrossRef(feature, target, id_terminal), k + 1
