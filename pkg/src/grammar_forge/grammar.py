"""Grammar data model: parser rules built from lines of elements.

A Line groups the elements that render on one physical line of printed
grammar text; its cardinality applies to the whole group. Blocks nest lines
between an opening and a closing delimiter, which may be literal strings or
the layout markers INDENT/DEDENT. All values are immutable; rewrites build
new grammars.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Union

from .errors import GrammarValidationError
from .metamodel import Metamodel

INDENT = "INDENT"
DEDENT = "DEDENT"

CARDINALITIES = ("required", "optional", "star", "plus")

TERMINAL_CLASSES = ("ID", "STRING", "INT", "FLOAT", "BOOL")

# Terminal rule names emitted for each primitive type, Xtext-style.
PRIMITIVE_TERMINALS = {
    "string": "EString",
    "int": "EInt",
    "bool": "EBoolean",
    "float": "EFloat",
}
TERMINAL_DEFINITIONS = {
    "EString": "STRING",
    "EInt": "INT",
    "EBoolean": "BOOL",
    "EFloat": "FLOAT",
    "ID": "ID",
}


@dataclass(frozen=True)
class Keyword:
    literal: str


@dataclass(frozen=True)
class Assignment:
    feature: str
    operator: str  # = | += | ?=
    callee: str  # parser rule or terminal rule name


@dataclass(frozen=True)
class CrossRef:
    feature: str
    target_class: str
    id_terminal: str = "ID"


@dataclass(frozen=True)
class Alternatives:
    options: tuple[str, ...]


@dataclass(frozen=True)
class Block:
    open: str
    close: str
    body: tuple["Line", ...]


Element = Union[Keyword, Assignment, CrossRef, Alternatives, Block]


@dataclass(frozen=True)
class Line:
    elements: tuple[Element, ...]
    cardinality: str = "required"

    def first_feature(self) -> str | None:
        """The feature this line is about: its first assignment, searching
        nested blocks (a many-containment line assigns inside its block)."""
        for e in self.elements:
            if isinstance(e, (Assignment, CrossRef)):
                return e.feature
            if isinstance(e, Block):
                for inner in e.body:
                    found = inner.first_feature()
                    if found is not None:
                        return found
        return None

    def has_feature(self, feature: str) -> bool:
        return any(
            isinstance(e, (Assignment, CrossRef)) and e.feature == feature
            for e in self.elements
        )

    def keywords(self) -> tuple[str, ...]:
        return tuple(e.literal for e in self.elements if isinstance(e, Keyword))


@dataclass(frozen=True)
class ParserRule:
    name: str
    returns: str
    body: tuple[Line, ...]

    @property
    def is_dispatch(self) -> bool:
        return (
            len(self.body) == 1
            and len(self.body[0].elements) == 1
            and isinstance(self.body[0].elements[0], Alternatives)
        )


@dataclass(frozen=True)
class TerminalRule:
    name: str
    definition: str  # one of TERMINAL_CLASSES


@dataclass(frozen=True)
class Grammar:
    name: str
    rules: tuple[ParserRule, ...] = ()
    terminals: tuple[TerminalRule, ...] = ()
    metamodel: Metamodel | None = field(default=None, compare=False, repr=False)

    def rule_named(self, name: str) -> ParserRule | None:
        for r in self.rules:
            if r.name == name:
                return r
        return None

    def terminal_named(self, name: str) -> TerminalRule | None:
        for t in self.terminals:
            if t.name == name:
                return t
        return None

    @property
    def uses_layout(self) -> bool:
        def block_uses(lines: tuple[Line, ...]) -> bool:
            for line in lines:
                for e in line.elements:
                    if isinstance(e, Block):
                        if e.open == INDENT or e.close == DEDENT or block_uses(e.body):
                            return True
            return False

        return any(block_uses(r.body) for r in self.rules)


@dataclass(frozen=True)
class Selector:
    """Scope of a rewrite or element query.

    ``rule`` is a rule name or the wildcard ``*``. ``feature`` restricts
    matches to elements assigning that feature (``*`` matches any feature);
    ``keyword`` matches keyword elements by literal. ``context_feature``
    restricts matches to lines containing an assignment to that feature.
    """

    rule: str
    feature: str | None = None
    keyword: str | None = None
    context_feature: str | None = None


@dataclass(frozen=True)
class Location:
    """Position of a match: rule, path of line indices through nested
    blocks, and the element index within that line. Rule-level matches carry
    no line path; line-level matches carry no element index."""

    rule: str
    line_path: tuple[int, ...] | None = None
    element_index: int | None = None


# ---------------------------------------------------------------------------
# Traversal helpers
# ---------------------------------------------------------------------------


def iter_lines(rule: ParserRule) -> Iterator[tuple[tuple[int, ...], Line]]:
    """Yield (line_path, line) pairs in pre-order: a line before the lines
    nested in its blocks."""

    def walk(lines: tuple[Line, ...], prefix: tuple[int, ...]) -> Iterator[tuple[tuple[int, ...], Line]]:
        for i, line in enumerate(lines):
            path = prefix + (i,)
            yield path, line
            for j, e in enumerate(line.elements):
                if isinstance(e, Block):
                    yield from walk(e.body, path + (j,))

    yield from walk(rule.body, ())


def line_at(rule: ParserRule, path: tuple[int, ...]) -> Line:
    lines = rule.body
    line: Line | None = None
    it = iter(path)
    for idx in it:
        line = lines[idx]
        try:
            block_idx = next(it)
        except StopIteration:
            return line
        element = line.elements[block_idx]
        if not isinstance(element, Block):
            raise IndexError(f"path {path} does not address a block at {block_idx}")
        lines = element.body
    if line is None:
        raise IndexError("empty line path")
    return line


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def validate_grammar(g: Grammar) -> None:
    """Raise GrammarValidationError on any violated grammar invariant."""
    names = [r.name for r in g.rules] + [t.name for t in g.terminals]
    seen: set[str] = set()
    for n in names:
        if n in seen:
            raise GrammarValidationError(f"duplicate rule name '{n}'")
        seen.add(n)
    for n in (INDENT, DEDENT):
        if n in seen:
            raise GrammarValidationError(f"'{n}' is reserved and cannot name a rule")

    rule_names = {r.name for r in g.rules}
    terminal_names = {t.name for t in g.terminals}
    for t in g.terminals:
        if t.definition not in TERMINAL_CLASSES:
            raise GrammarValidationError(
                f"terminal {t.name}: definition must be one of {TERMINAL_CLASSES}"
            )

    for r in g.rules:
        if not r.body:
            raise GrammarValidationError(f"rule {r.name}: empty body")
        for path, line in iter_lines(r):
            if not line.elements:
                raise GrammarValidationError(f"rule {r.name}: empty line at {path}")
            if line.cardinality not in CARDINALITIES:
                raise GrammarValidationError(
                    f"rule {r.name}: bad cardinality '{line.cardinality}'"
                )
            for e in line.elements:
                if isinstance(e, Assignment):
                    if e.callee not in rule_names and e.callee not in terminal_names:
                        raise GrammarValidationError(
                            f"rule {r.name}: assignment '{e.feature}' references unknown rule '{e.callee}'"
                        )
                elif isinstance(e, Alternatives):
                    for opt in e.options:
                        if opt not in rule_names:
                            raise GrammarValidationError(
                                f"rule {r.name}: alternative references unknown rule '{opt}'"
                            )
                elif isinstance(e, Block):
                    if not e.open or not e.close:
                        raise GrammarValidationError(
                            f"rule {r.name}: block delimiters must be non-empty"
                        )

    _check_left_recursion(g)


def _first_position_refs(g: Grammar, rule: ParserRule) -> set[str]:
    """Parser rules referable at the first token position of this rule."""
    refs: set[str] = set()
    rule_names = {r.name for r in g.rules}
    for line in rule.body:
        e = line.elements[0]
        if isinstance(e, Assignment) and e.callee in rule_names:
            refs.add(e.callee)
        elif isinstance(e, Alternatives):
            refs.update(o for o in e.options if o in rule_names)
        # Keyword, CrossRef, and Block consume a token before any rule call.
        if line.cardinality in ("required", "plus"):
            break
    return refs


def _check_left_recursion(g: Grammar) -> None:
    first = {r.name: _first_position_refs(g, r) for r in g.rules}
    for start in first:
        stack = list(first[start])
        visited: set[str] = set()
        while stack:
            n = stack.pop()
            if n == start:
                raise GrammarValidationError(f"rule {start}: left recursion detected")
            if n in visited:
                continue
            visited.add(n)
            stack.extend(first.get(n, ()))


# ---------------------------------------------------------------------------
# Element location
# ---------------------------------------------------------------------------


def locate(g: Grammar, sel: Selector) -> list[Location]:
    """Every location matched by the selector, in grammar order.

    With neither ``feature`` nor ``keyword`` set the match is rule-level
    (one location per scoped rule). An empty result is not an error.
    """
    out: list[Location] = []
    if sel.rule == "*":
        scoped = list(g.rules)
    else:
        r = g.rule_named(sel.rule)
        scoped = [r] if r is not None else []

    for rule in scoped:
        if sel.keyword is None and sel.feature is None:
            out.append(Location(rule.name))
            continue
        for path, line in iter_lines(rule):
            if sel.context_feature is not None and not line.has_feature(sel.context_feature):
                continue
            if sel.keyword is not None:
                if sel.feature is not None and not _feature_on_line(line, sel.feature):
                    continue
                for i, e in enumerate(line.elements):
                    if isinstance(e, Keyword) and e.literal == sel.keyword:
                        out.append(Location(rule.name, path, i))
            else:
                for i, e in enumerate(line.elements):
                    if isinstance(e, (Assignment, CrossRef)) and (
                        sel.feature == "*" or e.feature == sel.feature
                    ):
                        out.append(Location(rule.name, path, i))
    return out


def _feature_on_line(line: Line, feature: str) -> bool:
    if feature == "*":
        return any(isinstance(e, (Assignment, CrossRef)) for e in line.elements)
    return line.has_feature(feature)
