"""Grammar-optimization engine: rule catalog, configuration format, and the
sequential application machinery with per-entry reporting.

Configurations are declarative ``.goc`` text, one entry per line:

    <rule_id> key=value ...

``rule=``, ``attr=``, and ``context=`` populate the entry's scope selector
(rule name or ``*``, feature name or ``*``, context feature); the remaining
keys are the rule's own arguments, validated against a closed schema.
Entries apply strictly in sequence; a failing entry leaves the grammar
unchanged and is reported, it never aborts the run unless ``strict`` is set.
"""

from __future__ import annotations

import difflib
from dataclasses import dataclass, field, replace

from .errors import ConfigError, GrammarForgeError
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
    Location,
    ParserRule,
    Selector,
    iter_lines,
    locate,
    validate_grammar,
)
from .gxt import print_grammar


# ---------------------------------------------------------------------------
# Catalog
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ArgSpec:
    name: str
    type: str  # str | bool | card | list
    required: bool = True
    default: object = None


@dataclass(frozen=True)
class CatalogRule:
    rule_id: str
    doc: str
    args: tuple[ArgSpec, ...]
    needs_attr: bool = False  # scope.feature must be present


CATALOG: dict[str, CatalogRule] = {
    r.rule_id: r
    for r in (
        CatalogRule(
            "remove_keyword",
            "Delete matching keyword elements in scope.",
            (ArgSpec("keyword", "str"),),
        ),
        CatalogRule(
            "add_keyword_to_attr",
            "Insert a keyword next to the scoped attribute's assignment "
            "(before=false inserts after); without attr, append to each "
            "rule's header line.",
            (ArgSpec("keyword", "str"), ArgSpec("before", "bool", required=False, default=False)),
        ),
        CatalogRule(
            "rename_keyword",
            "Replace a keyword literal throughout the scope.",
            (ArgSpec("old", "str"), ArgSpec("new", "str")),
        ),
        CatalogRule(
            "move_attr_out_of_block",
            "Hoist the attribute's line from the rule's outermost block to "
            "just before the block's opening delimiter; the moved line "
            "becomes required.",
            (),
            needs_attr=True,
        ),
        CatalogRule(
            "remove_block",
            "Splice the outermost block's lines into the parent, deleting "
            "its delimiters.",
            (),
        ),
        CatalogRule(
            "change_block_delimiters",
            "Retarget block delimiters; INDENT/DEDENT markers allowed.",
            (
                ArgSpec("open", "str"),
                ArgSpec("new_open", "str"),
                ArgSpec("close", "str"),
                ArgSpec("new_close", "str"),
            ),
        ),
        CatalogRule(
            "set_line_cardinality",
            "Set the cardinality of the scoped attribute's line.",
            (ArgSpec("card", "card"),),
            needs_attr=True,
        ),
        CatalogRule(
            "reorder_features",
            "Permute the lines of the rule's outermost block into the given "
            "feature order; unmentioned lines follow in original order.",
            (ArgSpec("order", "list"),),
        ),
        CatalogRule(
            "remove_rule",
            "Delete the rule and all alternatives references to it; fails "
            "if any assignment still targets it.",
            (),
        ),
        CatalogRule(
            "rename_rule",
            "Rename the rule and rewrite all references to it.",
            (ArgSpec("new_name", "str"),),
        ),
        CatalogRule(
            "add_list_separator",
            "Interleave a separator keyword between repetitions of a "
            "many-valued assignment.",
            (ArgSpec("sep", "str"),),
            needs_attr=True,
        ),
        CatalogRule(
            "remove_attr_keyword_everywhere",
            "Sugar: remove_keyword with wildcard rule scope.",
            (ArgSpec("keyword", "str"),),
        ),
    )
}


@dataclass(frozen=True)
class RuleConfig:
    """One parameterized invocation of a catalog rule."""

    rule_id: str
    scope: Selector
    args: dict[str, object] = field(default_factory=dict)
    index: int = 0

    def __post_init__(self) -> None:
        validate_config(self)

    def to_line(self) -> str:
        """Render back to one ``.goc`` line."""
        parts = [self.rule_id, f"rule={_format_value(self.scope.rule)}"]
        if self.scope.feature is not None:
            parts.append(f"attr={_format_value(self.scope.feature)}")
        if self.scope.context_feature is not None:
            parts.append(f"context={_format_value(self.scope.context_feature)}")
        for spec in CATALOG[self.rule_id].args:
            if spec.name in self.args:
                parts.append(f"{spec.name}={_format_value(self.args[spec.name])}")
        return " ".join(parts)


def _format_value(value: object) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (list, tuple)):
        return _format_value(",".join(str(v) for v in value))
    text = str(value)
    if text == "" or any(ch in text for ch in " \t'#"):
        return "'" + text + "'"
    return text


def validate_config(c: RuleConfig) -> None:
    rule = CATALOG.get(c.rule_id)
    if rule is None:
        raise ConfigError(f"unknown rule '{c.rule_id}'")
    known = {a.name for a in rule.args}
    unknown = set(c.args) - known
    if unknown:
        raise ConfigError(f"{c.rule_id}: unknown argument(s) {sorted(unknown)}")
    for spec in rule.args:
        if spec.name not in c.args:
            if spec.required:
                raise ConfigError(f"{c.rule_id}: missing argument '{spec.name}'")
            continue
        value = c.args[spec.name]
        if spec.type == "str":
            if not isinstance(value, str):
                raise ConfigError(f"{c.rule_id}: argument '{spec.name}' must be a string")
            # Keywords and delimiters must survive the grammar text format.
            if not value or "'" in value or "\n" in value:
                raise ConfigError(
                    f"{c.rule_id}: argument '{spec.name}' must be a non-empty string "
                    f"without quotes or newlines"
                )
        if spec.type == "bool" and not isinstance(value, bool):
            raise ConfigError(f"{c.rule_id}: argument '{spec.name}' must be true or false")
        if spec.type == "card" and value not in ("required", "optional", "star", "plus"):
            raise ConfigError(
                f"{c.rule_id}: argument '{spec.name}' must be one of required, optional, star, plus"
            )
        if spec.type == "list" and (
            not isinstance(value, tuple) or not all(isinstance(v, str) for v in value)
        ):
            raise ConfigError(f"{c.rule_id}: argument '{spec.name}' must be a name list")
    if rule.needs_attr and c.scope.feature is None:
        raise ConfigError(f"{c.rule_id}: requires attr=<feature>")


# ---------------------------------------------------------------------------
# Config parsing
# ---------------------------------------------------------------------------


def parse_config(text: str) -> list[RuleConfig]:
    """Parse ``.goc`` text into an ordered list of rule configurations."""
    out: list[RuleConfig] = []
    for lineno, raw in enumerate(text.split("\n"), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        try:
            out.append(_parse_config_line(stripped, len(out)))
        except ConfigError as exc:
            raise ConfigError(str(exc), line=lineno) from None
    return out


def parse_config_line(line: str, index: int = 0) -> RuleConfig:
    """Parse a single ``.goc`` entry line."""
    return _parse_config_line(line.strip(), index)


def _parse_config_line(line: str, index: int) -> RuleConfig:
    tokens = _split_config_tokens(line)
    rule_id = tokens[0]
    if "=" in rule_id:
        raise ConfigError(f"malformed line: expected '<rule_id> key=value ...'")
    if rule_id not in CATALOG:
        raise ConfigError(f"unknown rule '{rule_id}'")
    catalog_rule = CATALOG[rule_id]
    scope_kwargs: dict[str, str] = {}
    args: dict[str, object] = {}
    for tok in tokens[1:]:
        if "=" not in tok:
            raise ConfigError(f"malformed argument '{tok}': expected key=value")
        key, value = tok.split("=", 1)
        if key == "rule":
            scope_kwargs["rule"] = value
        elif key == "attr":
            scope_kwargs["feature"] = value
        elif key == "context":
            scope_kwargs["context_feature"] = value
        else:
            args[key] = _convert_arg(catalog_rule, key, value)
    scope = Selector(rule=scope_kwargs.pop("rule", "*"), **scope_kwargs)
    if rule_id == "remove_attr_keyword_everywhere":
        scope = replace(scope, rule="*")
    return RuleConfig(rule_id=rule_id, scope=scope, args=args, index=index)


def _convert_arg(rule: CatalogRule, key: str, value: str) -> object:
    spec = next((a for a in rule.args if a.name == key), None)
    if spec is None:
        raise ConfigError(f"{rule.rule_id}: unknown argument(s) ['{key}']")
    if spec.type == "bool":
        if value not in ("true", "false"):
            raise ConfigError(f"{rule.rule_id}: argument '{key}' must be true or false")
        return value == "true"
    if spec.type == "list":
        return tuple(v.strip() for v in value.split(",") if v.strip())
    return value


def _split_config_tokens(line: str) -> list[str]:
    """Split on whitespace, keeping single-quoted spans intact."""
    tokens: list[str] = []
    cur: list[str] = []
    in_quote = False
    for ch in line:
        if ch == "'":
            in_quote = not in_quote
            continue
        if ch.isspace() and not in_quote:
            if cur:
                tokens.append("".join(cur))
                cur = []
            continue
        cur.append(ch)
    if in_quote:
        raise ConfigError("unterminated quote")
    if cur:
        tokens.append("".join(cur))
    if not tokens:
        raise ConfigError("empty entry")
    return tokens


# ---------------------------------------------------------------------------
# Reporting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ReportEntry:
    index: int
    rule_id: str
    status: str  # applied | no-match | error
    matched: int = 0
    locations: tuple[Location, ...] = ()
    diff_summary: tuple[tuple[str, int, int], ...] = ()  # (rule, lines before, lines after)
    lines_changed: int = 0
    message: str | None = None


@dataclass(frozen=True)
class ApplicationReport:
    entries: tuple[ReportEntry, ...] = ()

    @property
    def rules_touched(self) -> int:
        return len({name for e in self.entries for name, _, _ in e.diff_summary})

    @property
    def lines_changed(self) -> int:
        return sum(e.lines_changed for e in self.entries)

    def counts(self) -> dict[str, int]:
        out = {"applied": 0, "no-match": 0, "error": 0}
        for e in self.entries:
            out[e.status] += 1
        return out

    def to_dict(self) -> dict:
        return {
            "entries": [
                {
                    "index": e.index,
                    "rule_id": e.rule_id,
                    "status": e.status,
                    "matched": e.matched,
                    "lines_changed": e.lines_changed,
                    "diff_summary": [
                        {"rule": r, "lines_before": b, "lines_after": a}
                        for r, b, a in e.diff_summary
                    ],
                    "message": e.message,
                }
                for e in self.entries
            ],
            "totals": {
                "rules_touched": self.rules_touched,
                "lines_changed": self.lines_changed,
                **self.counts(),
            },
        }

    def render_text(self) -> str:
        lines = []
        for e in self.entries:
            detail = f"matched {e.matched}, {e.lines_changed} line(s) changed"
            if e.status == "no-match":
                detail = "no matching location"
            elif e.status == "error":
                detail = e.message or "error"
            lines.append(f"[{e.index}] {e.rule_id}: {e.status} ({detail})")
        c = self.counts()
        lines.append(
            f"totals: {len(self.entries)} entries, {c['applied']} applied, "
            f"{c['no-match']} no-match, {c['error']} error; "
            f"{self.rules_touched} rules touched, {self.lines_changed} lines changed"
        )
        return "\n".join(lines)


def _entry_diff(before: Grammar, after: Grammar) -> tuple[tuple[tuple[str, int, int], ...], int]:
    """Per-rule printed-line counts and the number of changed printed lines."""
    before_rules = {r.name: r for r in before.rules}
    after_rules = {r.name: r for r in after.rules}
    summary: list[tuple[str, int, int]] = []
    changed = 0
    for name in dict.fromkeys(list(before_rules) + list(after_rules)):
        b = _rule_lines(before, name) if name in before_rules else []
        a = _rule_lines(after, name) if name in after_rules else []
        if b == a:
            continue
        delta = 0
        for op, i1, i2, j1, j2 in difflib.SequenceMatcher(None, b, a).get_opcodes():
            if op == "equal":
                continue
            delta += max(i2 - i1, j2 - j1)
        summary.append((name, len(b), len(a)))
        changed += delta
    return tuple(summary), changed


def _rule_lines(g: Grammar, name: str) -> list[str]:
    rule = g.rule_named(name)
    if rule is None:
        return []
    sub = Grammar(name=g.name, rules=(rule,), terminals=())
    return print_grammar(sub).split("\n")[2:-1]


# ---------------------------------------------------------------------------
# Application
# ---------------------------------------------------------------------------


class _NoMatch(Exception):
    pass


class _RewriteError(Exception):
    pass


def apply_rule(g: Grammar, c: RuleConfig) -> tuple[Grammar, ReportEntry]:
    """Apply one configuration entry at every location its scope matches.

    A wildcard rule scope folds the rewrite left to right over each named
    rule in grammar order. No match leaves the grammar structurally
    unchanged; a rewrite that would break a grammar invariant reports an
    error and also leaves it unchanged. Blocks emptied by a rewrite
    normalize to their delimiter keywords (an empty block accepts the same
    programs and would not survive the text format).
    """
    try:
        new_g, matched, locations = _dispatch(g, c)
        if matched == 0:
            return g, ReportEntry(c.index, c.rule_id, "no-match")
        new_g = _normalize_empty_blocks(new_g)
        validate_grammar(new_g)
    except _NoMatch:
        return g, ReportEntry(c.index, c.rule_id, "no-match")
    except (_RewriteError, GrammarForgeError) as exc:
        return g, ReportEntry(c.index, c.rule_id, "error", message=str(exc))
    summary, changed = _entry_diff(g, new_g)
    return new_g, ReportEntry(
        c.index,
        c.rule_id,
        "applied",
        matched=matched,
        locations=tuple(locations),
        diff_summary=summary,
        lines_changed=changed,
    )


def apply_config(
    g: Grammar, cs: list[RuleConfig], strict: bool = False
) -> tuple[Grammar, ApplicationReport]:
    """Apply entries strictly in sequence; entry i+1 sees entry i's output.

    With ``strict`` the run halts after the first error entry; by default
    errors are collected and application continues.
    """
    entries: list[ReportEntry] = []
    cur = g
    for i, c in enumerate(cs):
        if c.index != i:
            c = replace(c, index=i)
        cur, entry = apply_rule(cur, c)
        entries.append(entry)
        if strict and entry.status == "error":
            break
    return cur, ApplicationReport(tuple(entries))


def _normalize_empty_blocks(g: Grammar) -> Grammar:
    def fix_lines(lines: tuple[Line, ...]) -> tuple[Line, ...]:
        out = []
        for line in lines:
            elements: list = []
            for e in line.elements:
                if isinstance(e, Block):
                    body = fix_lines(e.body)
                    if body:
                        elements.append(replace(e, body=body))
                        continue
                    # Layout markers vanish with the body; string delimiters
                    # stay behind as plain keywords.
                    for delim in (e.open, e.close):
                        if delim not in (INDENT, DEDENT):
                            elements.append(Keyword(delim))
                else:
                    elements.append(e)
            if elements:
                out.append(replace(line, elements=tuple(elements)))
        return tuple(out)

    new_rules = tuple(replace(r, body=fix_lines(r.body)) for r in g.rules)
    if new_rules == g.rules:
        return g
    return replace(g, rules=new_rules)


def _dispatch(g: Grammar, c: RuleConfig) -> tuple[Grammar, int, list[Location]]:
    handler = _HANDLERS[c.rule_id]
    if c.scope.rule == "*":
        matched_total = 0
        locations: list[Location] = []
        cur = g
        for rule in g.rules:
            scoped = replace(c, scope=replace(c.scope, rule=rule.name))
            if cur.rule_named(rule.name) is None:
                continue
            cur, matched, locs = handler(cur, scoped)
            matched_total += matched
            locations.extend(locs)
        return cur, matched_total, locations
    return handler(g, c)


def _named_rule(g: Grammar, c: RuleConfig) -> ParserRule:
    rule = g.rule_named(c.scope.rule)
    if rule is None:
        raise _NoMatch()
    return rule


def _swap_rule(g: Grammar, old: ParserRule, new: ParserRule) -> Grammar:
    return replace(g, rules=tuple(new if r is old else r for r in g.rules))


def _rewrite_lines(lines: tuple[Line, ...], fn) -> tuple[Line, ...]:
    """Depth-first rewrite: fn maps a line to a list of replacement lines."""
    out: list[Line] = []
    for line in lines:
        new_elements = []
        for e in line.elements:
            if isinstance(e, Block):
                e = replace(e, body=_rewrite_lines(e.body, fn))
            new_elements.append(e)
        line = replace(line, elements=tuple(new_elements))
        out.extend(fn(line))
    return tuple(out)


def _features_within(line: Line) -> list[str]:
    out: list[str] = []
    for e in line.elements:
        if isinstance(e, (Assignment, CrossRef)):
            out.append(e.feature)
        elif isinstance(e, Block):
            for inner in e.body:
                out.extend(_features_within(inner))
    return out


def _line_in_scope(line: Line, c: RuleConfig) -> bool:
    if c.scope.context_feature is not None and not line.has_feature(c.scope.context_feature):
        return False
    if c.scope.feature is not None:
        if c.scope.feature == "*":
            return any(isinstance(e, (Assignment, CrossRef)) for e in line.elements)
        return line.has_feature(c.scope.feature)
    return True


# --- individual rule handlers ----------------------------------------------


def _h_remove_keyword(g: Grammar, c: RuleConfig):
    rule = _named_rule(g, c)
    keyword = c.args["keyword"]
    matched = 0

    def fn(line: Line) -> list[Line]:
        nonlocal matched
        if not _line_in_scope(line, c):
            return [line]
        kept = []
        for e in line.elements:
            if isinstance(e, Keyword) and e.literal == keyword:
                matched += 1
            else:
                kept.append(e)
        if not kept:
            return []
        return [replace(line, elements=tuple(kept))]

    new_body = _rewrite_lines(rule.body, fn)
    if matched == 0:
        return g, 0, []
    if not new_body:
        raise _RewriteError(f"rule {rule.name}: removing '{keyword}' empties the rule body")
    locs = locate(g, replace(c.scope, keyword=keyword))
    return _swap_rule(g, rule, replace(rule, body=new_body)), matched, locs


def _h_add_keyword_to_attr(g: Grammar, c: RuleConfig):
    rule = _named_rule(g, c)
    keyword = c.args["keyword"]
    before = bool(c.args.get("before", False))
    matched = 0
    locations: list[Location] = []

    if c.scope.feature is None:
        # Header-line mode: append/prepend on the rule's first line. Dispatch
        # rules have no concrete syntax of their own and are skipped.
        if rule.is_dispatch:
            return g, 0, []
        line = rule.body[0]
        elements = list(line.elements)
        if before:
            if elements and elements[0] == Keyword(keyword):
                return g, 0, []
            elements.insert(0, Keyword(keyword))
        else:
            at = len(elements)
            if at and isinstance(elements[-1], Block):
                at -= 1
            if at and elements[at - 1] == Keyword(keyword):
                return g, 0, []
            elements.insert(at, Keyword(keyword))
        new_body = (replace(line, elements=tuple(elements)),) + rule.body[1:]
        return _swap_rule(g, rule, replace(rule, body=new_body)), 1, [Location(rule.name, (0,))]

    def fn(line: Line) -> list[Line]:
        nonlocal matched
        if c.scope.context_feature is not None and not line.has_feature(c.scope.context_feature):
            return [line]
        elements = list(line.elements)
        i = 0
        while i < len(elements):
            e = elements[i]
            if isinstance(e, (Assignment, CrossRef)) and (
                c.scope.feature == "*" or e.feature == c.scope.feature
            ):
                if before:
                    neighbor = elements[i - 1] if i > 0 else None
                else:
                    neighbor = elements[i + 1] if i + 1 < len(elements) else None
                if neighbor == Keyword(keyword):
                    i += 1
                    continue
                elements.insert(i if before else i + 1, Keyword(keyword))
                matched += 1
                i += 2
                continue
            i += 1
        return [replace(line, elements=tuple(elements))]

    new_body = _rewrite_lines(rule.body, fn)
    if matched == 0:
        return g, 0, []
    locations = locate(g, c.scope)
    return _swap_rule(g, rule, replace(rule, body=new_body)), matched, locations


def _h_rename_keyword(g: Grammar, c: RuleConfig):
    rule = _named_rule(g, c)
    old, new = c.args["old"], c.args["new"]
    matched = 0

    def fn(line: Line) -> list[Line]:
        nonlocal matched
        if not _line_in_scope(line, c):
            return [line]
        elements = []
        for e in line.elements:
            if isinstance(e, Keyword) and e.literal == old:
                matched += 1
                e = Keyword(new)
            elements.append(e)
        return [replace(line, elements=tuple(elements))]

    new_body = _rewrite_lines(rule.body, fn)
    if matched == 0:
        return g, 0, []
    locs = locate(g, replace(c.scope, keyword=old))
    return _swap_rule(g, rule, replace(rule, body=new_body)), matched, locs


def _h_move_attr_out_of_block(g: Grammar, c: RuleConfig):
    rule = _named_rule(g, c)
    feature = c.scope.feature
    host_idx, block_idx, block = _outermost_block(rule)
    if block is None:
        return g, 0, []
    target = None
    for i, line in enumerate(block.body):
        if line.has_feature(feature) and (
            c.scope.context_feature is None or line.has_feature(c.scope.context_feature)
        ):
            target = i
            break
    if target is None:
        return g, 0, []
    moved = block.body[target]
    new_block = replace(block, body=block.body[:target] + block.body[target + 1 :])
    host = rule.body[host_idx]
    new_elements = (
        host.elements[:block_idx] + moved.elements + (new_block,) + host.elements[block_idx + 1 :]
    )
    new_body = (
        rule.body[:host_idx]
        + (replace(host, elements=new_elements),)
        + rule.body[host_idx + 1 :]
    )
    loc = Location(rule.name, (host_idx, block_idx, target))
    return _swap_rule(g, rule, replace(rule, body=new_body)), 1, [loc]


def _outermost_block(rule: ParserRule) -> tuple[int, int, Block | None]:
    for i, line in enumerate(rule.body):
        for j, e in enumerate(line.elements):
            if isinstance(e, Block):
                return i, j, e
    return -1, -1, None


def _h_remove_block(g: Grammar, c: RuleConfig):
    rule = _named_rule(g, c)
    host_idx, block_idx, block = _outermost_block(rule)
    if block is None:
        return g, 0, []
    host = rule.body[host_idx]
    remaining = host.elements[:block_idx] + host.elements[block_idx + 1 :]
    spliced: tuple[Line, ...] = ()
    if remaining:
        spliced = (replace(host, elements=remaining),)
    new_body = rule.body[:host_idx] + spliced + block.body + rule.body[host_idx + 1 :]
    if not new_body:
        raise _RewriteError(f"rule {rule.name}: removing the block empties the rule body")
    return (
        _swap_rule(g, rule, replace(rule, body=new_body)),
        1,
        [Location(rule.name, (host_idx, block_idx))],
    )


def _h_change_block_delimiters(g: Grammar, c: RuleConfig):
    rule = _named_rule(g, c)
    old_open, old_close = c.args["open"], c.args["close"]
    new_open, new_close = c.args["new_open"], c.args["new_close"]
    matched = 0

    def rewrite_block(b: Block) -> Block:
        nonlocal matched
        body = tuple(
            replace(
                line,
                elements=tuple(
                    rewrite_block(e) if isinstance(e, Block) else e for e in line.elements
                ),
            )
            for line in b.body
        )
        b = replace(b, body=body)
        if b.open == old_open and b.close == old_close:
            matched += 1
            b = replace(b, open=new_open, close=new_close)
        return b

    new_body = tuple(
        replace(
            line,
            elements=tuple(
                rewrite_block(e) if isinstance(e, Block) else e for e in line.elements
            ),
        )
        for line in rule.body
    )
    if matched == 0:
        return g, 0, []
    return _swap_rule(g, rule, replace(rule, body=new_body)), matched, [Location(rule.name)]


def _h_set_line_cardinality(g: Grammar, c: RuleConfig):
    rule = _named_rule(g, c)
    card = c.args["card"]
    # Target the shallowest lines carrying the feature, so the repetition
    # internals of a many-containment block are not retargeted.
    depths: dict[int, list[tuple[tuple[int, ...], Line]]] = {}
    for path, line in iter_lines(rule):
        # A line is "the attribute's line" when it assigns the feature
        # directly, or is a group dedicated to it alone (the shape of a
        # generated many-containment line). The rule header, which nests
        # every feature, must never qualify.
        if (
            line.has_feature(c.scope.feature)
            or set(_features_within(line)) == {c.scope.feature}
        ) and (
            c.scope.context_feature is None or line.has_feature(c.scope.context_feature)
        ):
            depths.setdefault(len(path), []).append((path, line))
    if not depths:
        return g, 0, []
    targets = {path for path, _ in depths[min(depths)]}

    def rebuild(lines: tuple[Line, ...], prefix: tuple[int, ...]) -> tuple[Line, ...]:
        out = []
        for i, line in enumerate(lines):
            path = prefix + (i,)
            elements = tuple(
                replace(e, body=rebuild(e.body, path + (j,))) if isinstance(e, Block) else e
                for j, e in enumerate(line.elements)
            )
            line = replace(line, elements=elements)
            if path in targets:
                line = replace(line, cardinality=card)
            out.append(line)
        return tuple(out)

    new_body = rebuild(rule.body, ())
    locs = [Location(rule.name, path) for path in sorted(targets)]
    return _swap_rule(g, rule, replace(rule, body=new_body)), len(targets), locs


def _h_reorder_features(g: Grammar, c: RuleConfig):
    rule = _named_rule(g, c)
    order = list(c.args["order"])
    host_idx, block_idx, block = _outermost_block(rule)
    if block is None:
        return g, 0, []
    keyed = [(line.first_feature(), line) for line in block.body]
    if not any(k in order for k, _ in keyed):
        return g, 0, []
    mentioned = [line for name in order for k, line in keyed if k == name]
    rest = [line for k, line in keyed if k not in order]
    new_block = replace(block, body=tuple(mentioned + rest))
    host = rule.body[host_idx]
    new_elements = host.elements[:block_idx] + (new_block,) + host.elements[block_idx + 1 :]
    new_body = (
        rule.body[:host_idx]
        + (replace(host, elements=new_elements),)
        + rule.body[host_idx + 1 :]
    )
    return (
        _swap_rule(g, rule, replace(rule, body=new_body)),
        len(mentioned),
        [Location(rule.name, (host_idx, block_idx))],
    )


def _h_remove_rule(g: Grammar, c: RuleConfig):
    rule = _named_rule(g, c)
    for other in g.rules:
        if other is rule:
            continue
        for line in _walk_lines(other.body):
            for e in line.elements:
                if isinstance(e, Assignment) and e.callee == rule.name:
                    raise _RewriteError(
                        f"cannot remove rule {rule.name}: assignment "
                        f"'{other.name}.{e.feature}' still targets it"
                    )

    def strip_refs(lines: tuple[Line, ...]) -> tuple[Line, ...]:
        out = []
        for line in lines:
            elements = []
            for e in line.elements:
                if isinstance(e, Alternatives):
                    options = tuple(o for o in e.options if o != rule.name)
                    if not options:
                        continue
                    e = replace(e, options=options)
                elif isinstance(e, Block):
                    e = replace(e, body=strip_refs(e.body))
                elements.append(e)
            if elements:
                out.append(replace(line, elements=tuple(elements)))
        return tuple(out)

    new_rules = []
    for other in g.rules:
        if other is rule:
            continue
        new_rules.append(replace(other, body=strip_refs(other.body)))
    for r in new_rules:
        if not r.body:
            raise _RewriteError(
                f"cannot remove rule {rule.name}: rule {r.name} would become empty"
            )
    return replace(g, rules=tuple(new_rules)), 1, [Location(rule.name)]


def _h_rename_rule(g: Grammar, c: RuleConfig):
    rule = _named_rule(g, c)
    new_name = c.args["new_name"]
    if new_name == rule.name:
        return g, 0, []
    if g.rule_named(new_name) is not None or g.terminal_named(new_name) is not None:
        raise _RewriteError(f"cannot rename {rule.name}: '{new_name}' already exists")

    def rewrite(lines: tuple[Line, ...]) -> tuple[Line, ...]:
        out = []
        for line in lines:
            elements = []
            for e in line.elements:
                if isinstance(e, Assignment) and e.callee == rule.name:
                    e = replace(e, callee=new_name)
                elif isinstance(e, Alternatives) and rule.name in e.options:
                    e = replace(
                        e, options=tuple(new_name if o == rule.name else o for o in e.options)
                    )
                elif isinstance(e, Block):
                    e = replace(e, body=rewrite(e.body))
                elements.append(e)
            out.append(replace(line, elements=tuple(elements)))
        return tuple(out)

    new_rules = []
    for other in g.rules:
        renamed = replace(other, body=rewrite(other.body))
        if other is rule:
            renamed = replace(renamed, name=new_name)
        new_rules.append(renamed)
    return replace(g, rules=tuple(new_rules)), 1, [Location(rule.name)]


def _h_add_list_separator(g: Grammar, c: RuleConfig):
    rule = _named_rule(g, c)
    sep = c.args["sep"]
    matched = 0

    def fn(line: Line) -> list[Line]:
        nonlocal matched
        if line.cardinality not in ("star", "plus"):
            return [line]
        first = line.elements[0]
        if not (
            isinstance(first, Assignment)
            and first.operator == "+="
            and (c.scope.feature == "*" or first.feature == c.scope.feature)
        ):
            return [line]
        matched += 1
        return [replace(line, elements=(Keyword(sep),) + line.elements)]

    new_body = _rewrite_lines(rule.body, fn)
    if matched == 0:
        return g, 0, []
    return _swap_rule(g, rule, replace(rule, body=new_body)), matched, [Location(rule.name)]


def _h_remove_attr_keyword_everywhere(g: Grammar, c: RuleConfig):
    return _h_remove_keyword(g, c)


def _walk_lines(lines: tuple[Line, ...]):
    for line in lines:
        yield line
        for e in line.elements:
            if isinstance(e, Block):
                yield from _walk_lines(e.body)


_HANDLERS = {
    "remove_keyword": _h_remove_keyword,
    "add_keyword_to_attr": _h_add_keyword_to_attr,
    "rename_keyword": _h_rename_keyword,
    "move_attr_out_of_block": _h_move_attr_out_of_block,
    "remove_block": _h_remove_block,
    "change_block_delimiters": _h_change_block_delimiters,
    "set_line_cardinality": _h_set_line_cardinality,
    "reorder_features": _h_reorder_features,
    "remove_rule": _h_remove_rule,
    "rename_rule": _h_rename_rule,
    "add_list_separator": _h_add_list_separator,
    "remove_attr_keyword_everywhere": _h_remove_attr_keyword_everywhere,
}

assert set(_HANDLERS) == set(CATALOG)
