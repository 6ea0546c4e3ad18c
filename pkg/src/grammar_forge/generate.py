"""Grammar generation from a metamodel, following the fixed conventions of
generated Xtext grammars.

One parser rule per concrete class, in metamodel order: the class name as
keyword, then a curly-brace block with one optional line per feature.
Abstract classes with concrete subclasses become alternatives-only dispatch
rules; inherited features are inlined into each concrete subclass rule.
Every feature line is optional regardless of its lower bound (lower bounds
are enforced by instance validation, not by the grammar).
"""

from __future__ import annotations

from dataclasses import replace

from .errors import GenerationError, GrammarValidationError
from .grammar import (
    Alternatives,
    Assignment,
    Block,
    CrossRef,
    Grammar,
    Keyword,
    Line,
    PRIMITIVE_TERMINALS,
    ParserRule,
    TERMINAL_DEFINITIONS,
    TerminalRule,
    validate_grammar,
)
from .metamodel import MClass, MFeature, Metamodel, UNBOUNDED, validate_metamodel


def generate_grammar(m: Metamodel) -> Grammar:
    """Generate the conventional grammar for a valid metamodel.

    Raises GenerationError when the metamodel is invalid or an abstract
    class has no concrete subclass (its dispatch rule would be unreachable).
    """
    diagnostics = validate_metamodel(m)
    if diagnostics:
        raise GenerationError(
            "metamodel invalid: " + "; ".join(str(d) for d in diagnostics)
        )

    rules: list[ParserRule] = []
    used_terminals: set[str] = set()
    for cls in m.classes:
        if cls.abstract:
            options = tuple(c.name for c in m.classes if cls.name in c.supertypes)
            if not options:
                raise GenerationError(
                    f"abstract class {cls.name} has no concrete subclass: unreachable rule"
                )
            rules.append(
                ParserRule(
                    cls.name,
                    cls.name,
                    (Line((Alternatives(options),), "required"),),
                )
            )
        else:
            rules.append(_class_rule(m, cls, used_terminals))

    terminals = tuple(
        TerminalRule(name, TERMINAL_DEFINITIONS[name])
        for name in ("EString", "EInt", "EBoolean", "EFloat", "ID")
        if name in used_terminals
    )
    g = Grammar(name=m.name, rules=tuple(rules), terminals=terminals, metamodel=m)
    validate_grammar(g)
    return g


def _class_rule(m: Metamodel, cls: MClass, used_terminals: set[str]) -> ParserRule:
    feature_lines = tuple(
        _feature_line(m, f, used_terminals) for f in m.all_features(cls)
    )
    if feature_lines:
        elements = (Keyword(cls.name), Block("{", "}", feature_lines))
    else:
        # A featureless class keeps its braces as plain delimiter keywords;
        # an empty block node would not survive the text format.
        elements = (Keyword(cls.name), Keyword("{"), Keyword("}"))
    return ParserRule(cls.name, cls.name, (Line(elements, "required"),))


def _feature_line(m: Metamodel, f: MFeature, used_terminals: set[str]) -> Line:
    if f.kind == "attribute":
        if m.enum_named(f.type) is not None:
            callee = "ID"
        else:
            callee = PRIMITIVE_TERMINALS[f.type]
        used_terminals.add(callee)
        return Line((Keyword(f.name), Assignment(f.name, "=", callee)), "optional")
    if f.kind == "containment":
        if f.upper == UNBOUNDED:
            inner = (
                Line((Assignment(f.name, "+=", f.type),), "required"),
                Line((Assignment(f.name, "+=", f.type),), "star"),
            )
            return Line((Keyword(f.name), Block("{", "}", inner)), "optional")
        return Line((Keyword(f.name), Assignment(f.name, "=", f.type)), "optional")
    if f.kind == "reference":
        used_terminals.add("ID")
        return Line((Keyword(f.name), CrossRef(f.name, f.type, "ID")), "optional")
    raise GenerationError(f"unknown feature kind '{f.kind}'")


def attach_metamodel(g: Grammar, m: Metamodel) -> Grammar:
    """Annotate a grammar with its source metamodel.

    Raises GrammarValidationError naming the first unresolved class or
    feature: every rule's returns class and every assignment feature must
    resolve in the metamodel.
    """
    failures = resolution_failures(g, m)
    if failures:
        raise GrammarValidationError("; ".join(failures))
    return replace(g, metamodel=m)


def resolution_failures(g: Grammar, m: Metamodel) -> list[str]:
    """All class/feature resolution failures of a grammar against a metamodel."""
    out: list[str] = []
    for rule in g.rules:
        cls = m.class_named(rule.returns)
        if cls is None:
            out.append(f"rule {rule.name}: unresolved class '{rule.returns}'")
            continue
        feature_names = {f.name for f in m.all_features(cls)}
        for line in _all_lines(rule.body):
            for e in line.elements:
                feature = getattr(e, "feature", None)
                if feature is not None and feature not in feature_names:
                    out.append(
                        f"rule {rule.name}: unresolved feature '{feature}' on class {rule.returns}"
                    )
                if isinstance(e, CrossRef) and m.class_named(e.target_class) is None:
                    out.append(
                        f"rule {rule.name}: cross-reference to unknown class '{e.target_class}'"
                    )
    return out


def _all_lines(lines):
    for line in lines:
        yield line
        for e in line.elements:
            if isinstance(e, Block):
                yield from _all_lines(e.body)


def unreachable_classes(m: Metamodel) -> list[str]:
    """Concrete classes not reachable from the first concrete class through
    containment features and dispatch alternatives."""
    concrete = [c for c in m.classes if not c.abstract]
    if not concrete:
        return []
    root = concrete[0]
    reached: set[str] = set()
    stack = [root.name]
    while stack:
        name = stack.pop()
        if name in reached:
            continue
        reached.add(name)
        cls = m.class_named(name)
        if cls is None:
            continue
        if cls.abstract:
            stack.extend(c.name for c in m.subclasses(name))
            continue
        for f in m.all_features(cls):
            if f.kind == "containment":
                stack.append(f.type)
                stack.extend(c.name for c in m.concrete_descendants(f.type))
    return [c.name for c in concrete if c.name not in reached]


def derive_metamodel(g: Grammar) -> Metamodel:
    """Reconstruct a minimal metamodel from a grammar's rules.

    Used when a grammar file is handled without its source metamodel (e.g.
    CLI previews): attribute types come from terminal callees, containments
    from rule callees, references from cross-references. Lower bounds are
    unknowable and default to 0.
    """
    rule_names = {r.name for r in g.rules}
    terminal_types = {
        "EString": "string",
        "EInt": "int",
        "EBoolean": "bool",
        "EFloat": "float",
        "ID": "string",
    }
    classes: list[MClass] = []
    dispatch_parents: dict[str, str] = {}
    for rule in g.rules:
        if rule.is_dispatch:
            alt = rule.body[0].elements[0]
            assert isinstance(alt, Alternatives)
            for opt in alt.options:
                dispatch_parents.setdefault(opt, rule.returns)

    for rule in g.rules:
        if rule.is_dispatch:
            classes.append(MClass(rule.returns, abstract=True))
            continue
        features: list[MFeature] = []
        seen: set[str] = set()
        for line in _all_lines(rule.body):
            for e in line.elements:
                if isinstance(e, Assignment) and e.feature not in seen:
                    seen.add(e.feature)
                    many = UNBOUNDED if e.operator == "+=" else 1
                    if e.callee in rule_names:
                        features.append(MFeature(e.feature, "containment", e.callee, 0, many))
                    else:
                        ftype = terminal_types.get(e.callee, "string")
                        features.append(MFeature(e.feature, "attribute", ftype, 0, many))
                elif isinstance(e, CrossRef) and e.feature not in seen:
                    seen.add(e.feature)
                    features.append(MFeature(e.feature, "reference", e.target_class, 0, 1))
        supertypes = (dispatch_parents[rule.returns],) if rule.returns in dispatch_parents else ()
        classes.append(
            MClass(rule.returns, abstract=False, supertypes=supertypes, features=tuple(features))
        )
    return Metamodel(name=g.name, classes=tuple(classes))
