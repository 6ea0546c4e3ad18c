"""Grammar and metamodel inference from a single annotated example program.

The user marks text spans with labels (keyword, attr-name, attr-value with
a primitive type, object-class, block-open, block-close, reference); block
pairing implies object nesting. Inference is per-example and conservative:
attribute lines become optional, values and keywords seen before a block
stay on the rule's header line, and repeated sibling objects of one class
become a many-containment. The inducing example always parses under the
inferred grammar.

Annotation files (``.ann.json``): ``{"text": ..., "spans": [{"start",
"end", "label", "type"?}]}``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import InferenceError
from .generate import attach_metamodel
from .grammar import (
    Assignment,
    Block,
    CrossRef,
    Grammar,
    Keyword,
    Line,
    ParserRule,
    TerminalRule,
    iter_lines,
    validate_grammar,
)
from .instances import parse_program
from .metamodel import MClass, MFeature, Metamodel, UNBOUNDED

LABELS = (
    "keyword",
    "attr-name",
    "attr-value",
    "object-class",
    "block-open",
    "block-close",
    "reference",
)

_VALUE_TYPES = ("string", "int", "float", "bool")

_TERMINAL_FOR = {"string": "EString", "int": "EInt", "float": "EFloat", "bool": "EBoolean"}


@dataclass(frozen=True)
class Span:
    start: int
    end: int
    label: str
    type: str | None = None


@dataclass(frozen=True)
class AnnotatedExample:
    text: str
    spans: tuple[Span, ...]


def load_annotation(doc: str) -> AnnotatedExample:
    try:
        data = json.loads(doc)
    except json.JSONDecodeError as exc:
        raise InferenceError(f"annotation syntax error: {exc.msg} (line {exc.lineno})") from None
    if not isinstance(data, dict) or "text" not in data or "spans" not in data:
        raise InferenceError("annotation must carry 'text' and 'spans'")
    spans = []
    for i, s in enumerate(data["spans"]):
        try:
            spans.append(Span(int(s["start"]), int(s["end"]), s["label"], s.get("type")))
        except (KeyError, TypeError, ValueError):
            raise InferenceError(f"spans[{i}]: expected start, end, label") from None
    return AnnotatedExample(data["text"], tuple(spans))


def validate_example(ex: AnnotatedExample) -> None:
    prev_end = 0
    depth = 0
    for i, s in enumerate(ex.spans):
        if not (0 <= s.start < s.end <= len(ex.text)):
            raise InferenceError(f"spans[{i}]: out of bounds")
        if s.start < prev_end:
            raise InferenceError(f"spans[{i}]: overlaps or is out of order")
        prev_end = s.end
        if s.label not in LABELS:
            raise InferenceError(f"spans[{i}]: unknown label '{s.label}'")
        if s.label == "attr-value":
            if s.type not in _VALUE_TYPES:
                raise InferenceError(
                    f"spans[{i}]: attr-value needs a type in {_VALUE_TYPES}"
                )
        if s.label == "block-open":
            depth += 1
        elif s.label == "block-close":
            depth -= 1
            if depth < 0:
                raise InferenceError(f"spans[{i}]: unbalanced block-close")
    if depth != 0:
        raise InferenceError("unbalanced block-open")
    if not any(s.label == "object-class" for s in ex.spans):
        raise InferenceError("example declares no object-class span")


# --- observation collection -------------------------------------------------


@dataclass
class _Obs:
    """What one object occurrence showed us."""

    cls: str
    header: list = field(default_factory=list)  # observations before the block
    body: list = field(default_factory=list)  # observations inside the block
    has_block: bool = False
    open_delim: str = "{"
    close_delim: str = "}"


def _collect(ex: AnnotatedExample) -> tuple[_Obs, list[_Obs]]:
    """Build the object-occurrence tree; returns (root, all occurrences)."""
    all_obs: list[_Obs] = []
    root: _Obs | None = None
    stack: list[_Obs] = []
    pending: _Obs | None = None  # class seen, block not yet opened

    for i, s in enumerate(ex.spans):
        text = ex.text[s.start : s.end]
        if s.label == "object-class":
            obs = _Obs(cls=text)
            all_obs.append(obs)
            pending = None  # the previous leaf, if any, is complete
            holder = stack[-1] if stack else None
            if holder is None:
                if root is not None:
                    raise InferenceError(
                        f"spans[{i}]: a second root object '{text}' (exactly one expected)"
                    )
                root = obs
            else:
                holder.body.append(("child", obs))
            pending = obs
        elif s.label == "block-open":
            if pending is None:
                raise InferenceError(f"spans[{i}]: block-open without a preceding object-class")
            pending.has_block = True
            pending.open_delim = text
            stack.append(pending)
            pending = None
        elif s.label == "block-close":
            pending = None
            if not stack:
                raise InferenceError(f"spans[{i}]: unbalanced block-close")
            stack[-1].close_delim = text
            stack.pop()
        else:
            holder = pending if pending is not None else (stack[-1] if stack else None)
            if holder is None:
                raise InferenceError(f"spans[{i}]: '{text}' appears outside any object")
            bucket = holder.body if holder.has_block else holder.header
            bucket.append((s.label, text, s.type))
    if root is None:
        raise InferenceError("example declares no object-class span")
    return root, all_obs


# --- inference ---------------------------------------------------------------


@dataclass
class _ClassInfo:
    name: str
    order: list[str] = field(default_factory=list)  # feature order
    features: dict[str, dict] = field(default_factory=dict)
    header_shape: list | None = None  # list of ('keyword', lit) / ('feature', name)
    body_shape: list | None = None
    has_block: bool | None = None
    open_delim: str = "{"
    close_delim: str = "}"
    positional: int = 0


def infer_grammar(ex: AnnotatedExample) -> tuple[Metamodel, Grammar]:
    """Construct a metamodel and grammar from one annotated example.

    Raises InferenceError on invalid annotations, conflicting attribute
    types, or structurally inconsistent repeated objects of one class.
    """
    validate_example(ex)
    root, all_obs = _collect(ex)

    classes: dict[str, _ClassInfo] = {}
    order: list[str] = []

    def info_for(cls: str) -> _ClassInfo:
        if cls not in classes:
            classes[cls] = _ClassInfo(cls)
            order.append(cls)
        return classes[cls]

    def feed(obs: _Obs) -> None:
        info = info_for(obs.cls)
        if info.has_block is None:
            info.has_block = obs.has_block
            info.open_delim = obs.open_delim
            info.close_delim = obs.close_delim
        elif info.has_block != obs.has_block:
            raise InferenceError(
                f"class {obs.cls}: inconsistent structure (with and without a block)"
            )
        header_shape = _shape(info, obs.header, positional_ok=True)
        body_shape = _shape(info, obs.body, positional_ok=False)
        if info.header_shape is None:
            info.header_shape = header_shape
        elif info.header_shape != header_shape:
            raise InferenceError(f"class {obs.cls}: inconsistent header structure")
        if info.body_shape is None:
            info.body_shape = body_shape
        else:
            info.body_shape = _merge_body(obs.cls, info.body_shape, body_shape)
        for _, child in (item for item in obs.body if item[0] == "child"):
            feed(child)

    def _shape(info: _ClassInfo, items: list, positional_ok: bool) -> list:
        shape: list = []
        i = 0
        child_counts: dict[str, int] = {}
        while i < len(items):
            item = items[i]
            if item[0] == "child":
                child = item[1]
                child_counts[child.cls] = child_counts.get(child.cls, 0) + 1
                i += 1
                continue
            label, text, vtype = item
            if label == "keyword" or label == "attr-name":
                nxt = items[i + 1] if i + 1 < len(items) else None
                if nxt is not None and nxt[0] in ("attr-value", "reference"):
                    feature = text
                    _, vtext, nvtype = nxt
                    kind = "reference" if nxt[0] == "reference" else "attribute"
                    _record_feature(info, feature, kind, nvtype, vtext)
                    shape.append(("feature", feature, text))
                    i += 2
                    continue
                if label == "attr-name":
                    raise InferenceError(
                        f"class {info.name}: attr-name '{text}' is not followed by a value"
                    )
                shape.append(("keyword", text))
                i += 1
                continue
            if label in ("attr-value", "reference"):
                if not positional_ok:
                    raise InferenceError(
                        f"class {info.name}: value '{text}' inside a block needs a "
                        f"keyword or attr-name"
                    )
                info.positional += 1
                feature = f"value{info.positional}"
                kind = "reference" if label == "reference" else "attribute"
                _record_feature(info, feature, kind, vtype, text)
                shape.append(("feature", feature, None))
                i += 1
                continue
            raise InferenceError(f"class {info.name}: unexpected '{label}' here")
        for cls, n in child_counts.items():
            shape.append(("children", cls, n))
        return shape

    def _record_feature(info: _ClassInfo, name: str, kind: str, vtype, vtext: str) -> None:
        if kind == "attribute":
            ftype = vtype
        else:
            ftype = ("__ref__", vtext)
        existing = info.features.get(name)
        if existing is None:
            info.features[name] = {"kind": kind, "type": ftype}
            info.order.append(name)
            return
        if existing["kind"] != kind:
            raise InferenceError(f"class {info.name}: feature '{name}' has conflicting kinds")
        if kind == "attribute" and existing["type"] != ftype:
            raise InferenceError(
                f"class {info.name}: attribute '{name}' has conflicting types "
                f"{existing['type']} and {ftype}"
            )

    def _merge_body(cls: str, a: list, b: list) -> list:
        # Occurrences may omit optional parts; keep the union in first-seen
        # order, upgrading repeated children counts to the max.
        out = list(a)
        for item in b:
            if item[0] == "children":
                match = next(
                    (k for k, o in enumerate(out) if o[0] == "children" and o[1] == item[1]),
                    None,
                )
                if match is None:
                    out.append(item)
                elif out[match][2] < item[2]:
                    out[match] = item
            elif item not in out:
                out.append(item)
        return out

    feed(root)

    # Resolve reference targets against sibling objects' identifying values.
    id_values: dict[str, str] = {}
    for obs in all_obs:
        value = _first_string_value(classes[obs.cls], obs)
        if value is not None and value not in id_values:
            id_values[value] = obs.cls

    metamodel = _build_metamodel(ex, order, classes, id_values)
    grammar = _build_grammar(order, classes, metamodel)
    return metamodel, grammar


def _first_string_value(info: _ClassInfo, obs: _Obs) -> str | None:
    for bucket in (obs.header, obs.body):
        for item in bucket:
            if item[0] == "attr-value" and item[2] == "string":
                return json.loads(item[1]) if item[1].startswith('"') else item[1]
    return None


def _build_metamodel(
    ex: AnnotatedExample,
    order: list[str],
    classes: dict[str, _ClassInfo],
    id_values: dict[str, str],
) -> Metamodel:
    mclasses = []
    for cls in order:
        info = classes[cls]
        feats = []
        for name in info.order:
            spec = info.features[name]
            if spec["kind"] == "reference":
                _, vtext = spec["type"]
                target = id_values.get(vtext)
                if target is None:
                    raise InferenceError(
                        f"class {cls}: reference '{name}' target '{vtext}' does not "
                        f"match any object's identifying value"
                    )
                feats.append(MFeature(name, "reference", target, 0, 1))
            else:
                feats.append(MFeature(name, "attribute", spec["type"], 0, 1))
        shape = (info.header_shape or []) + (info.body_shape or [])
        for item in shape:
            if item[0] == "children":
                _, child_cls, n = item
                feats.append(
                    MFeature(
                        _containment_name(child_cls),
                        "containment",
                        child_cls,
                        0,
                        UNBOUNDED if n > 1 else 1,
                    )
                )
        mclasses.append(MClass(cls, features=tuple(feats)))
    return Metamodel(name=order[0], classes=tuple(mclasses))


def _containment_name(cls: str) -> str:
    return cls[0].lower() + cls[1:]


def _build_grammar(
    order: list[str], classes: dict[str, _ClassInfo], m: Metamodel
) -> Grammar:
    rules = []
    used_terminals: set[str] = set()
    for cls in order:
        info = classes[cls]
        mclass = m.class_named(cls)
        assert mclass is not None
        feats = {f.name: f for f in mclass.features}

        header: list = [Keyword(cls)]
        for item in info.header_shape or []:
            header.extend(_shape_elements(item, feats, used_terminals, header=True))
        body_lines: list[Line] = []
        for item in info.body_shape or []:
            body_lines.extend(_shape_lines(item, feats, used_terminals))
        if info.has_block:
            if body_lines:
                header.append(Block(info.open_delim, info.close_delim, tuple(body_lines)))
            else:
                # Empty blocks normalize to their delimiter keywords.
                header.append(Keyword(info.open_delim))
                header.append(Keyword(info.close_delim))
        rules.append(ParserRule(cls, cls, (Line(tuple(header), "required"),)))

    terminal_order = ("EString", "EInt", "EBoolean", "EFloat", "ID")
    terminals = tuple(
        TerminalRule(n, {"EString": "STRING", "EInt": "INT", "EBoolean": "BOOL", "EFloat": "FLOAT", "ID": "ID"}[n])
        for n in terminal_order
        if n in used_terminals
    )
    g = Grammar(name=order[0], rules=tuple(rules), terminals=terminals)
    validate_grammar(g)
    return attach_metamodel(g, m)


def _shape_elements(item, feats: dict[str, MFeature], used: set[str], header: bool) -> list:
    kind = item[0]
    if kind == "keyword":
        return [Keyword(item[1])]
    if kind == "feature":
        _, name, kw = item
        f = feats[name]
        out = [Keyword(kw)] if kw is not None else []
        if f.kind == "reference":
            used.add("ID")
            out.append(CrossRef(name, f.type, "ID"))
        else:
            terminal = _TERMINAL_FOR[f.type]
            used.add(terminal)
            out.append(Assignment(name, "=", terminal))
        return out
    raise InferenceError(f"children cannot appear on a header line")


def _shape_lines(item, feats: dict[str, MFeature], used: set[str]) -> list[Line]:
    kind = item[0]
    if kind == "keyword":
        return [Line((Keyword(item[1]),), "required")]
    if kind == "feature":
        return [Line(tuple(_shape_elements(item, feats, used, header=False)), "optional")]
    if kind == "children":
        _, cls, n = item
        feature = _containment_name(cls)
        op = "+=" if n > 1 else "="
        card = "star" if n > 1 else "optional"
        return [Line((Assignment(feature, op, cls),), card)]
    raise InferenceError(f"unexpected shape item {item!r}")


def verify_inference(g: Grammar, ex: AnnotatedExample):
    """Parse the inducing example under the inferred grammar."""
    return parse_program(g, ex.text)


def coverage_gaps(g: Grammar, ex: AnnotatedExample) -> list[str]:
    """Rules and lines never exercised when parsing the example (the
    minimality check: an inferred grammar should have no dead productions)."""
    result = parse_program(g, ex.text)
    if not result.is_ok:
        return [f"example does not parse: {result}"]
    covered_rules = {t[1] for t in result.coverage if t[0] == "rule"}
    covered_lines = {(t[1], t[2]) for t in result.coverage if t[0] == "line"}
    gaps = []
    for rule in g.rules:
        if rule.name not in covered_rules:
            gaps.append(f"rule {rule.name} never used")
            continue
        for path, line in iter_lines(rule):
            if (rule.name, path) not in covered_lines:
                gaps.append(f"rule {rule.name}: line {path} never used")
    return gaps
