"""Metamodel loading, validation, and structural diffing.

The metamodel drives grammar generation and instance typing. Documents use
the ``.mm.json`` format: top-level ``name``, ``classes``, ``enums``, with
classes carrying ordered feature lists. A class in a new document may declare
``renamed_from`` to mark an explicit rename for diffing purposes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Iterable

from .errors import Diagnostic, MetamodelError

PRIMITIVES = ("string", "int", "bool", "float")

FEATURE_KINDS = ("attribute", "containment", "reference")

UNBOUNDED = -1

_CLASS_KEYS = {"name", "abstract", "supertypes", "features", "renamed_from"}
_FEATURE_KEYS = {"name", "kind", "type", "lower", "upper"}


@dataclass(frozen=True)
class MFeature:
    name: str
    kind: str  # attribute | containment | reference
    type: str
    lower: int = 0
    upper: int = 1  # 1 or UNBOUNDED

    @property
    def many(self) -> bool:
        return self.upper == UNBOUNDED


@dataclass(frozen=True)
class MClass:
    name: str
    abstract: bool = False
    supertypes: tuple[str, ...] = ()
    features: tuple[MFeature, ...] = ()
    renamed_from: str | None = None


@dataclass(frozen=True)
class MEnum:
    name: str
    literals: tuple[str, ...]


@dataclass(frozen=True)
class Metamodel:
    name: str
    classes: tuple[MClass, ...] = ()
    enums: tuple[MEnum, ...] = ()

    def class_named(self, name: str) -> MClass | None:
        for c in self.classes:
            if c.name == name:
                return c
        return None

    def enum_named(self, name: str) -> MEnum | None:
        for e in self.enums:
            if e.name == name:
                return e
        return None

    def all_features(self, cls: MClass) -> tuple[MFeature, ...]:
        """Features of cls including inherited ones, supertype-first."""
        seen: list[MFeature] = []
        chain: list[MClass] = []
        cur: MClass | None = cls
        guard = 0
        while cur is not None and guard <= len(self.classes):
            chain.append(cur)
            cur = self.class_named(cur.supertypes[0]) if cur.supertypes else None
            guard += 1
        for c in reversed(chain):
            seen.extend(c.features)
        return tuple(seen)

    def subclasses(self, name: str) -> tuple[MClass, ...]:
        return tuple(c for c in self.classes if name in c.supertypes)

    def concrete_descendants(self, name: str) -> tuple[MClass, ...]:
        """Concrete classes equal to or transitively below the named class."""
        out: list[MClass] = []
        stack = [name]
        visited = set()
        while stack:
            n = stack.pop(0)
            if n in visited:
                continue
            visited.add(n)
            c = self.class_named(n)
            if c is None:
                continue
            if not c.abstract:
                out.append(c)
            stack.extend(s.name for s in self.subclasses(n))
        return tuple(out)

    def is_subtype(self, sub: str, sup: str) -> bool:
        cur = self.class_named(sub)
        guard = 0
        while cur is not None and guard <= len(self.classes):
            if cur.name == sup:
                return True
            cur = self.class_named(cur.supertypes[0]) if cur.supertypes else None
            guard += 1
        return False


@dataclass(frozen=True)
class MetamodelDelta:
    """Minimal difference between two metamodel versions, name-matched.

    Feature-level entries are qualified by the owning class (named as in the
    new version). Renames are only recorded for classes explicitly annotated
    with ``renamed_from`` whose structure matches modulo the rename.
    """

    added_classes: tuple[MClass, ...] = ()
    removed_classes: tuple[str, ...] = ()
    renamed_classes: tuple[tuple[str, str], ...] = ()  # (old, new)
    added_features: tuple[tuple[str, MFeature], ...] = ()
    removed_features: tuple[tuple[str, str], ...] = ()
    retyped_features: tuple[tuple[str, str, str, str], ...] = ()  # (class, feature, old, new)

    @property
    def empty(self) -> bool:
        return not (
            self.added_classes
            or self.removed_classes
            or self.renamed_classes
            or self.added_features
            or self.removed_features
            or self.retyped_features
        )


# ---------------------------------------------------------------------------
# Loading
# ---------------------------------------------------------------------------


def load_metamodel(doc: str) -> Metamodel:
    """Parse a ``.mm.json`` document and validate the resulting metamodel.

    Raises MetamodelError on syntax errors (position-reported), unresolved
    type names, duplicate names, or any other invariant violation.
    """
    try:
        data = json.loads(doc)
    except json.JSONDecodeError as exc:
        raise MetamodelError(f"syntax error: {exc.msg}", line=exc.lineno, column=exc.colno) from exc
    if not isinstance(data, dict):
        raise MetamodelError("document root must be an object")
    unknown = set(data) - {"name", "classes", "enums"}
    if unknown:
        raise MetamodelError(f"unknown top-level keys: {sorted(unknown)}")
    name = data.get("name")
    if not isinstance(name, str) or not name:
        raise MetamodelError("missing or invalid 'name'")

    classes = tuple(_load_class(entry, i) for i, entry in enumerate(data.get("classes", [])))
    enums = tuple(_load_enum(entry, i) for i, entry in enumerate(data.get("enums", [])))
    model = Metamodel(name=name, classes=classes, enums=enums)

    diagnostics = validate_metamodel(model)
    if diagnostics:
        raise MetamodelError("; ".join(str(d) for d in diagnostics))
    return model


def _load_class(entry: object, index: int) -> MClass:
    if not isinstance(entry, dict):
        raise MetamodelError(f"classes[{index}] must be an object")
    unknown = set(entry) - _CLASS_KEYS
    if unknown:
        raise MetamodelError(f"classes[{index}]: unknown keys {sorted(unknown)}")
    name = entry.get("name")
    if not isinstance(name, str) or not name:
        raise MetamodelError(f"classes[{index}]: missing or invalid 'name'")
    supertypes = entry.get("supertypes", [])
    if not isinstance(supertypes, list) or not all(isinstance(s, str) for s in supertypes):
        raise MetamodelError(f"class {name}: 'supertypes' must be a list of names")
    features = tuple(
        _load_feature(f, name, i) for i, f in enumerate(entry.get("features", []))
    )
    renamed_from = entry.get("renamed_from")
    if renamed_from is not None and not isinstance(renamed_from, str):
        raise MetamodelError(f"class {name}: 'renamed_from' must be a name")
    return MClass(
        name=name,
        abstract=bool(entry.get("abstract", False)),
        supertypes=tuple(supertypes),
        features=features,
        renamed_from=renamed_from,
    )


def _load_feature(entry: object, owner: str, index: int) -> MFeature:
    if not isinstance(entry, dict):
        raise MetamodelError(f"class {owner}: features[{index}] must be an object")
    unknown = set(entry) - _FEATURE_KEYS
    if unknown:
        raise MetamodelError(f"class {owner}: features[{index}]: unknown keys {sorted(unknown)}")
    for key in ("name", "kind", "type"):
        if not isinstance(entry.get(key), str) or not entry.get(key):
            raise MetamodelError(f"class {owner}: features[{index}]: missing or invalid '{key}'")
    lower = entry.get("lower", 0)
    upper = entry.get("upper", 1)
    if lower not in (0, 1) or upper not in (1, UNBOUNDED):
        raise MetamodelError(
            f"class {owner}: feature {entry['name']}: multiplicity must be one of 0..1, 1..1, 0..*, 1..*"
        )
    return MFeature(
        name=entry["name"], kind=entry["kind"], type=entry["type"], lower=lower, upper=upper
    )


def metamodel_to_document(m: Metamodel) -> str:
    """Render a metamodel back to its ``.mm.json`` document form."""
    data = {
        "name": m.name,
        "classes": [
            {
                "name": c.name,
                **({"abstract": True} if c.abstract else {}),
                **({"supertypes": list(c.supertypes)} if c.supertypes else {}),
                **({"renamed_from": c.renamed_from} if c.renamed_from else {}),
                "features": [
                    {
                        "name": f.name,
                        "kind": f.kind,
                        "type": f.type,
                        "lower": f.lower,
                        "upper": f.upper,
                    }
                    for f in c.features
                ],
            }
            for c in m.classes
        ],
        "enums": [{"name": e.name, "literals": list(e.literals)} for e in m.enums],
    }
    return json.dumps(data, indent=2) + "\n"


def _load_enum(entry: object, index: int) -> MEnum:
    if not isinstance(entry, dict):
        raise MetamodelError(f"enums[{index}] must be an object")
    unknown = set(entry) - {"name", "literals"}
    if unknown:
        raise MetamodelError(f"enums[{index}]: unknown keys {sorted(unknown)}")
    name = entry.get("name")
    literals = entry.get("literals", [])
    if not isinstance(name, str) or not name:
        raise MetamodelError(f"enums[{index}]: missing or invalid 'name'")
    if not isinstance(literals, list) or not all(isinstance(l, str) for l in literals):
        raise MetamodelError(f"enum {name}: 'literals' must be a list of names")
    return MEnum(name=name, literals=tuple(literals))


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def validate_metamodel(m: Metamodel) -> list[Diagnostic]:
    """Return one diagnostic per violated invariant; empty when valid."""
    out: list[Diagnostic] = []
    class_names = [c.name for c in m.classes]
    enum_names = [e.name for e in m.enums]

    for name in _duplicates(class_names):
        out.append(Diagnostic("duplicate-class", "class name declared more than once", name))
    for name in _duplicates(enum_names):
        out.append(Diagnostic("duplicate-enum", "enum name declared more than once", name))
    for name in set(class_names) & set(enum_names):
        out.append(Diagnostic("name-clash", "enum name collides with a class name", name))

    known_types = set(PRIMITIVES) | set(class_names) | set(enum_names)
    for c in m.classes:
        if len(c.supertypes) > 1:
            out.append(
                Diagnostic(
                    "multiple-inheritance",
                    "multiple supertypes are unsupported (single-inheritance chains only)",
                    c.name,
                )
            )
        for s in c.supertypes:
            if s not in class_names:
                out.append(Diagnostic("unresolved-supertype", f"supertype '{s}' is not a class", c.name))
        for f in c.features:
            if f.kind not in FEATURE_KINDS:
                out.append(Diagnostic("bad-kind", f"unknown feature kind '{f.kind}'", f"{c.name}.{f.name}"))
                continue
            if f.type not in known_types:
                out.append(
                    Diagnostic("unresolved-type", f"type '{f.type}' is not declared", f"{c.name}.{f.name}")
                )
            elif f.kind == "attribute" and f.type in class_names:
                out.append(
                    Diagnostic(
                        "bad-attribute-type",
                        f"attribute type must be a primitive or enum, found class '{f.type}'",
                        f"{c.name}.{f.name}",
                    )
                )
            elif f.kind in ("containment", "reference") and f.type not in class_names:
                out.append(
                    Diagnostic(
                        "bad-target-type",
                        f"{f.kind} type must be a class, found '{f.type}'",
                        f"{c.name}.{f.name}",
                    )
                )

    out.extend(_supertype_cycles(m))

    # Feature-name uniqueness includes inherited features; only meaningful on
    # classes whose supertype chain is acyclic and resolved.
    flagged = {d.element for d in out if d.code in ("cyclic-supertype", "unresolved-supertype")}
    for c in m.classes:
        if c.name in flagged:
            continue
        names = [f.name for f in m.all_features(c)]
        for name in _duplicates(names):
            out.append(
                Diagnostic(
                    "duplicate-feature",
                    "feature name declared more than once (including inherited features)",
                    f"{c.name}.{name}",
                )
            )
    return out


def _duplicates(names: Iterable[str]) -> list[str]:
    seen: set[str] = set()
    dup: list[str] = []
    for n in names:
        if n in seen and n not in dup:
            dup.append(n)
        seen.add(n)
    return dup


def _supertype_cycles(m: Metamodel) -> list[Diagnostic]:
    out = []
    for c in m.classes:
        visited = {c.name}
        cur = c
        while cur.supertypes:
            nxt = m.class_named(cur.supertypes[0])
            if nxt is None:
                break
            if nxt.name in visited:
                out.append(Diagnostic("cyclic-supertype", "supertype chain forms a cycle", c.name))
                break
            visited.add(nxt.name)
            cur = nxt
    return out


# ---------------------------------------------------------------------------
# Diffing
# ---------------------------------------------------------------------------


def diff_metamodels(old: Metamodel, new: Metamodel) -> MetamodelDelta:
    """Structural delta between two valid metamodels under name identity.

    A class counts as renamed only when the new version carries an explicit
    ``renamed_from`` annotation and its structure matches the old class
    modulo the rename; otherwise it is reported as removed plus added.
    """
    old_by_name = {c.name: c for c in old.classes}
    new_by_name = {c.name: c for c in new.classes}

    rename_map: dict[str, str] = {}
    for c in new.classes:
        if (
            c.renamed_from
            and c.renamed_from in old_by_name
            and c.renamed_from not in new_by_name
            and c.name not in old_by_name
        ):
            if _same_structure(old_by_name[c.renamed_from], c, {c.renamed_from: c.name}):
                rename_map[c.renamed_from] = c.name

    renamed = tuple(sorted(rename_map.items()))
    rename_targets = set(rename_map.values())

    removed = tuple(
        c.name for c in old.classes if c.name not in new_by_name and c.name not in rename_map
    )
    added = tuple(
        c for c in new.classes if c.name not in old_by_name and c.name not in rename_targets
    )

    added_features: list[tuple[str, MFeature]] = []
    removed_features: list[tuple[str, str]] = []
    retyped: list[tuple[str, str, str, str]] = []
    for name, new_cls in new_by_name.items():
        old_cls = old_by_name.get(name)
        if old_cls is None:
            continue
        old_feats = {f.name: f for f in old_cls.features}
        new_feats = {f.name: f for f in new_cls.features}
        for f in new_cls.features:
            if f.name not in old_feats:
                added_features.append((name, f))
            else:
                old_type = rename_map.get(old_feats[f.name].type, old_feats[f.name].type)
                if old_type != f.type:
                    retyped.append((name, f.name, old_feats[f.name].type, f.type))
        for f in old_cls.features:
            if f.name not in new_feats:
                removed_features.append((name, f.name))

    return MetamodelDelta(
        added_classes=added,
        removed_classes=removed,
        renamed_classes=renamed,
        added_features=tuple(added_features),
        removed_features=tuple(removed_features),
        retyped_features=tuple(retyped),
    )


def _same_structure(old: MClass, new: MClass, rename: dict[str, str]) -> bool:
    if old.abstract != new.abstract:
        return False
    if tuple(rename.get(s, s) for s in old.supertypes) != new.supertypes:
        return False
    if len(old.features) != len(new.features):
        return False
    for fo, fn in zip(old.features, new.features):
        if (fo.name, fo.kind, rename.get(fo.type, fo.type), fo.lower, fo.upper) != (
            fn.name,
            fn.kind,
            fn.type,
            fn.lower,
            fn.upper,
        ):
            return False
    return True


def apply_delta(delta: MetamodelDelta, old: Metamodel) -> Metamodel:
    """Replay a delta onto the old metamodel, reproducing the new version.

    Added classes and features are appended in delta order; renames rewrite
    type references throughout the model.
    """
    rename = dict(delta.renamed_classes)
    classes: list[MClass] = []
    for c in old.classes:
        new_name = rename.get(c.name, c.name)
        feats = tuple(
            replace(f, type=rename.get(f.type, f.type)) for f in c.features
        )
        classes.append(
            replace(
                c,
                name=new_name,
                supertypes=tuple(rename.get(s, s) for s in c.supertypes),
                features=feats,
                renamed_from=c.name if c.name in rename else c.renamed_from,
            )
        )

    removed = set(delta.removed_classes)
    classes = [c for c in classes if c.name not in removed]
    classes.extend(delta.added_classes)

    by_name = {c.name: i for i, c in enumerate(classes)}
    for cls_name, feat_name in delta.removed_features:
        i = by_name[cls_name]
        classes[i] = replace(
            classes[i], features=tuple(f for f in classes[i].features if f.name != feat_name)
        )
    for cls_name, feat in delta.added_features:
        i = by_name[cls_name]
        classes[i] = replace(classes[i], features=classes[i].features + (feat,))
    for cls_name, feat_name, _old_type, new_type in delta.retyped_features:
        i = by_name[cls_name]
        classes[i] = replace(
            classes[i],
            features=tuple(
                replace(f, type=new_type) if f.name == feat_name else f
                for f in classes[i].features
            ),
        )
    return replace(old, classes=tuple(classes))
