from __future__ import annotations

import json

import pytest

import grammar_forge as gf
from grammar_forge.metamodel import MClass, MFeature, apply_delta

from conftest import fixture_text


def test_load_paper_example_class():
    doc = json.dumps(
        {
            "name": "M",
            "classes": [
                {
                    "name": "EAPackage",
                    "features": [
                        {"name": "shortName", "kind": "attribute", "type": "string"}
                    ],
                }
            ],
        }
    )
    m = gf.load_metamodel(doc)
    assert len(m.classes) == 1
    cls = m.classes[0]
    assert cls.name == "EAPackage"
    assert [f.name for f in cls.features] == ["shortName"]


def test_load_empty_class_list():
    m = gf.load_metamodel('{"name": "Empty", "classes": []}')
    assert m.classes == ()
    assert gf.validate_metamodel(m) == []


def test_unresolved_feature_type_rejected():
    doc = json.dumps(
        {
            "name": "M",
            "classes": [
                {"name": "A", "features": [{"name": "b", "kind": "containment", "type": "B"}]}
            ],
        }
    )
    with pytest.raises(gf.MetamodelError, match="unresolved-type"):
        gf.load_metamodel(doc)


def test_syntax_error_reports_position():
    with pytest.raises(gf.MetamodelError, match=r"line 2"):
        gf.load_metamodel('{\n  "name": }')


def test_duplicate_class_name():
    doc = json.dumps({"name": "M", "classes": [{"name": "X"}, {"name": "X"}]})
    with pytest.raises(gf.MetamodelError, match="duplicate-class"):
        gf.load_metamodel(doc)


def test_validate_fixture_is_clean(mini_v1):
    assert gf.validate_metamodel(mini_v1) == []


def test_cyclic_supertypes_diagnosed():
    m = gf.Metamodel(
        name="M",
        classes=(
            MClass("A", supertypes=("B",)),
            MClass("B", supertypes=("A",)),
        ),
    )
    codes = {d.code for d in gf.validate_metamodel(m)}
    assert "cyclic-supertype" in codes


def test_multiple_inheritance_unsupported():
    m = gf.Metamodel(
        name="M",
        classes=(MClass("A"), MClass("B"), MClass("C", supertypes=("A", "B"))),
    )
    codes = {d.code for d in gf.validate_metamodel(m)}
    assert "multiple-inheritance" in codes


def test_inherited_feature_name_clash_diagnosed():
    m = gf.Metamodel(
        name="M",
        classes=(
            MClass("A", features=(MFeature("x", "attribute", "string"),)),
            MClass("B", supertypes=("A",), features=(MFeature("x", "attribute", "int"),)),
        ),
    )
    codes = {d.code for d in gf.validate_metamodel(m)}
    assert "duplicate-feature" in codes


def test_load_is_deterministic(mini_v1):
    again = gf.load_metamodel(fixture_text("mini_eatxt_v1.mm.json"))
    assert again == mini_v1


class TestDiff:
    def test_identical_metamodels_give_empty_delta(self, mini_v1):
        assert gf.diff_metamodels(mini_v1, mini_v1).empty

    def test_added_class_detected(self, mini_v1):
        data = json.loads(fixture_text("mini_eatxt_v1.mm.json"))
        data["classes"].append(
            {
                "name": "FunctionBehavior",
                "features": [
                    {"name": "shortName", "kind": "attribute", "type": "string"}
                ],
            }
        )
        new = gf.load_metamodel(json.dumps(data))
        delta = gf.diff_metamodels(mini_v1, new)
        assert [c.name for c in delta.added_classes] == ["FunctionBehavior"]
        assert delta.removed_classes == ()
        assert delta.renamed_classes == ()

    def test_retyped_feature_detected(self, mini_v1):
        data = json.loads(fixture_text("mini_eatxt_v1.mm.json"))
        for cls in data["classes"]:
            if cls["name"] == "Requirement":
                for f in cls["features"]:
                    if f["name"] == "priority":
                        f["type"] = "string"
        new = gf.load_metamodel(json.dumps(data))
        delta = gf.diff_metamodels(mini_v1, new)
        assert delta.retyped_features == (("Requirement", "priority", "int", "string"),)

    def test_rename_needs_annotation(self, mini_v1):
        data = json.loads(fixture_text("mini_eatxt_v1.mm.json"))
        data["classes"][0]["name"] = "EAPkg"
        # No renamed_from annotation: EAPackage had containment of itself, so
        # fix the self reference to keep the document valid.
        data["classes"][0]["features"][2]["type"] = "EAPkg"
        new = gf.load_metamodel(json.dumps(data))
        delta = gf.diff_metamodels(mini_v1, new)
        assert delta.renamed_classes == ()
        assert "EAPackage" in delta.removed_classes
        assert "EAPkg" in [c.name for c in delta.added_classes]

    def test_annotated_rename_detected(self, mini_v1, mini_v2):
        delta = gf.diff_metamodels(mini_v1, mini_v2)
        assert delta.renamed_classes == (("EAPackage", "EAPkg"),)
        assert sorted(c.name for c in delta.added_classes) == [
            "HardwareComponentType",
            "HardwarePin",
            "Mode",
        ]

    def test_apply_delta_roundtrip(self, mini_v1, mini_v2):
        delta = gf.diff_metamodels(mini_v1, mini_v2)
        assert apply_delta(delta, mini_v1) == mini_v2

    def test_apply_delta_roundtrip_random_append_evolutions(self, mini_v1):
        import random

        rng = random.Random(13)
        base = json.loads(fixture_text("mini_eatxt_v1.mm.json"))
        for trial in range(50):
            data = json.loads(json.dumps(base))
            for _ in range(rng.randint(1, 4)):
                op = rng.randrange(4)
                if op == 0:
                    data["classes"].append(
                        {
                            "name": f"New{trial}_{rng.randrange(100)}",
                            "features": [
                                {"name": "shortName", "kind": "attribute", "type": "string"}
                            ],
                        }
                    )
                elif op == 1:
                    cls = rng.choice(data["classes"])
                    cls.setdefault("features", []).append(
                        {"name": f"extra{rng.randrange(100)}", "kind": "attribute", "type": "int"}
                    )
                elif op == 2:
                    cls = rng.choice(data["classes"])
                    attrs = [f for f in cls.get("features", []) if f["kind"] == "attribute"]
                    if attrs:
                        rng.choice(attrs)["type"] = rng.choice(["string", "int", "float"])
                else:
                    cls = rng.choice(data["classes"])
                    feats = cls.get("features", [])
                    removable = [
                        f for f in feats if f["kind"] == "attribute" and f["name"] != "shortName"
                    ]
                    if removable:
                        feats.remove(rng.choice(removable))
            try:
                new = gf.load_metamodel(json.dumps(data))
            except gf.MetamodelError:
                continue  # a duplicate name rolled; skip the trial
            delta = gf.diff_metamodels(mini_v1, new)
            assert apply_delta(delta, mini_v1) == new

    def test_apply_delta_roundtrip_with_removals(self, mini_v1):
        data = json.loads(fixture_text("mini_eatxt_v1.mm.json"))
        data["classes"] = [c for c in data["classes"] if c["name"] != "Requirement"]
        for cls in data["classes"]:
            cls["features"] = [
                f for f in cls.get("features", []) if f["type"] != "Requirement"
            ]
        new = gf.load_metamodel(json.dumps(data))
        delta = gf.diff_metamodels(mini_v1, new)
        assert "Requirement" in delta.removed_classes
        assert apply_delta(delta, mini_v1) == new
