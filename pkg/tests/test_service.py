from __future__ import annotations

import pytest
from fastapi.testclient import TestClient

import grammar_forge as gf
from grammar_forge.service.app import create_app

from conftest import fixture_text


@pytest.fixture()
def client(tmp_path):
    app = create_app(styles_dir=str(tmp_path / "styles"))
    with TestClient(app) as c:
        yield c


@pytest.fixture()
def session(client):
    r = client.post(
        "/api/sessions", json={"metamodel": fixture_text("mini_eatxt_v1.mm.json")}
    )
    assert r.status_code == 200
    return r.json()


def add_entry(client, session, line, revision=None):
    sid = session["session_id"]
    rev = session["revision"] if revision is None else revision
    r = client.post(
        f"/api/sessions/{sid}/config/entries", json={"revision": rev, "line": line}
    )
    return r


def test_create_session(session):
    assert session["metamodel_name"] == "MiniEATXT"
    assert session["revision"] == 0


def test_invalid_metamodel_is_structured_error(client):
    r = client.post("/api/sessions", json={"metamodel": "{not json"})
    assert r.status_code == 400
    body = r.json()
    assert body["error"]["module"] == "metamodel"
    assert "syntax error" in body["error"]["message"]


def test_unknown_session_is_404(client):
    assert client.get("/api/sessions/nope/generated").status_code == 404


def test_generated_window_has_selectable_elements(client, session):
    sid = session["session_id"]
    r = client.get(f"/api/sessions/{sid}/generated")
    data = r.json()
    assert data["text"] == fixture_text("golden_generated_v1.gxt")
    kinds = {e["kind"] for e in data["elements"]}
    assert {"rule", "line", "keyword", "assignment", "crossref", "block", "alternatives"} <= kinds


def test_optimized_window_starts_as_generated(client, session):
    sid = session["session_id"]
    optimized = client.get(f"/api/sessions/{sid}/optimized").json()
    generated = client.get(f"/api/sessions/{sid}/generated").json()
    assert optimized["text"] == generated["text"]


def test_add_entry_updates_optimized_and_previews(client, session):
    r = add_entry(client, session, "remove_keyword rule=* keyword=shortName")
    assert r.status_code == 200
    data = r.json()
    assert data["revision"] == 1
    assert "'shortName'" not in data["optimized"]
    assert data["report"]["entries"][0]["status"] == "applied"
    assert len(data["previews"]["samples"]) == 3


def test_previews_parse_under_current_grammar(client, session):
    sid = session["session_id"]
    add_entry(client, session, "remove_keyword rule=* keyword=shortName")
    optimized = client.get(f"/api/sessions/{sid}/optimized").json()["text"]
    previews = client.get(f"/api/sessions/{sid}/previews").json()
    g = gf.attach_metamodel(
        gf.parse_grammar(optimized),
        gf.load_metamodel(fixture_text("mini_eatxt_v1.mm.json")),
    )
    for sample in previews["samples"]:
        assert gf.parse_program(g, sample).is_ok


def test_stale_revision_rejected_and_state_unchanged(client, session):
    sid = session["session_id"]
    add_entry(client, session, "remove_keyword rule=* keyword=shortName")
    before = client.get(f"/api/sessions/{sid}/optimized").json()
    r = add_entry(client, session, "remove_keyword rule=* keyword=comment", revision=0)
    assert r.status_code == 409
    after = client.get(f"/api/sessions/{sid}/optimized").json()
    assert after == before


def test_malformed_entry_rejected(client, session):
    r = add_entry(client, session, "frobnicate rule=X")
    assert r.status_code == 400
    assert "unknown rule" in r.json()["error"]["message"]


def test_config_crud_cycle(client, session):
    sid = session["session_id"]
    r = add_entry(client, session, "remove_keyword rule=* keyword=shortName")
    r = add_entry(client, session, "rename_keyword rule=* old=comment new=doc", revision=1)
    entries = client.get(f"/api/sessions/{sid}/config").json()
    assert [e["rule_id"] for e in entries] == ["remove_keyword", "rename_keyword"]

    r = client.post(
        f"/api/sessions/{sid}/config/reorder", json={"revision": 2, "order": [1, 0]}
    )
    assert r.status_code == 200
    entries = client.get(f"/api/sessions/{sid}/config").json()
    assert [e["rule_id"] for e in entries] == ["rename_keyword", "remove_keyword"]

    r = client.put(
        f"/api/sessions/{sid}/config/entries/0",
        json={"revision": 3, "line": "rename_keyword rule=* old=comment new=note"},
    )
    assert r.status_code == 200
    assert "'note'" in r.json()["optimized"]

    r = client.delete(f"/api/sessions/{sid}/config/entries/0", params={"revision": 4})
    assert r.status_code == 200
    entries = client.get(f"/api/sessions/{sid}/config").json()
    assert [e["rule_id"] for e in entries] == ["remove_keyword"]


def test_delete_all_entries_restores_generated(client, session):
    sid = session["session_id"]
    add_entry(client, session, "remove_keyword rule=* keyword=shortName")
    client.delete(f"/api/sessions/{sid}/config/entries/0", params={"revision": 1})
    optimized = client.get(f"/api/sessions/{sid}/optimized").json()["text"]
    generated = client.get(f"/api/sessions/{sid}/generated").json()["text"]
    assert optimized == generated


def test_window2_matches_cli_optimize(client, session, tmp_path):
    from grammar_forge.cli import main

    sid = session["session_id"]
    add_entry(client, session, "remove_keyword rule=* keyword=shortName")
    add_entry(client, session, "move_attr_out_of_block rule=* attr=shortName", revision=1)

    generated = client.get(f"/api/sessions/{sid}/export/generated").text
    config = client.get(f"/api/sessions/{sid}/export/config").text
    window2 = client.get(f"/api/sessions/{sid}/export/grammar").text

    gen_path = tmp_path / "g.gxt"
    conf_path = tmp_path / "c.goc"
    out_path = tmp_path / "out.gxt"
    gen_path.write_text(generated)
    conf_path.write_text(config)
    assert main(["optimize", "-g", str(gen_path), "-c", str(conf_path), "-o", str(out_path)]) == 0
    assert out_path.read_text() == window2


def test_selection_candidates_for_assignment(client, session):
    sid = session["session_id"]
    elements = client.get(f"/api/sessions/{sid}/generated").json()["elements"]
    target = next(
        e
        for e in elements
        if e["kind"] == "assignment" and e["rule"] == "EAPackage" and e["feature"] == "shortName"
    )
    r = client.post(f"/api/sessions/{sid}/selection", json={"element_id": target["id"]})
    assert r.status_code == 200
    candidates = {c["rule_id"]: c for c in r.json()}
    assert {"remove_keyword", "add_keyword_to_attr", "move_attr_out_of_block"} <= set(candidates)
    for c in candidates.values():
        assert c["rule"] == "EAPackage"
        assert c["attr"] == "shortName"
    assert candidates["remove_keyword"]["prefilled_args"]["keyword"] == "shortName"


def test_selection_candidates_for_keyword(client, session):
    sid = session["session_id"]
    elements = client.get(f"/api/sessions/{sid}/generated").json()["elements"]
    target = next(
        e for e in elements if e["kind"] == "keyword" and e["keyword"] == "shortName"
    )
    r = client.post(f"/api/sessions/{sid}/selection", json={"element_id": target["id"]})
    candidates = {c["rule_id"] for c in r.json()}
    assert "remove_keyword" in candidates
    assert "rename_keyword" in candidates


def test_style_apply_appends_entries(client, session):
    sid = session["session_id"]
    r = client.post(
        f"/api/sessions/{sid}/style", json={"revision": 0, "name": "python_style"}
    )
    assert r.status_code == 200
    assert "INDENT" in r.json()["optimized"]
    entries = client.get(f"/api/sessions/{sid}/config").json()
    assert len(entries) == 2


def test_styles_list_and_install(client):
    names = {s["name"] for s in client.get("/api/styles").json()}
    assert {"python_style", "c_style"} <= names
    doc = "name: webby\ndescription: test\nversion: 1\n\nremove_keyword rule=* keyword=comment\n"
    r = client.post("/api/styles", json={"doc": doc, "force": False})
    assert r.status_code == 200
    names = {s["name"] for s in client.get("/api/styles").json()}
    assert "webby" in names


def test_import_program_and_migrated_preview(client, session):
    sid = session["session_id"]
    program = 'EAPackage {\n    shortName "P1"\n}\n'
    r = client.post(
        f"/api/sessions/{sid}/programs",
        json={"revision": 0, "name": "demo", "text": program},
    )
    assert r.status_code == 200
    r = add_entry(client, session, "remove_keyword rule=* keyword=shortName", revision=1)
    r = add_entry(client, session, "move_attr_out_of_block rule=* attr=shortName", revision=2)
    programs = r.json()["previews"]["programs"]
    assert len(programs) == 1
    assert programs[0]["text"] == 'EAPackage "P1" {\n}\n'
    assert programs[0]["dropped"] == []


def test_import_prog_file_fixture(client, session):
    sid = session["session_id"]
    r = client.post(
        f"/api/sessions/{sid}/programs",
        json={"revision": 0, "name": "example.prog", "text": fixture_text("example.prog")},
    )
    assert r.status_code == 200
    (program,) = r.json()["previews"]["programs"]
    assert 'text "shall parse"' in program["text"]


def test_import_rejects_unparseable_program(client, session):
    sid = session["session_id"]
    r = client.post(
        f"/api/sessions/{sid}/programs",
        json={"revision": 0, "name": "bad", "text": "garbage !!"},
    )
    assert r.status_code == 400


def test_infer_endpoint(client, session):
    import json as json_mod

    sid = session["session_id"]
    ann = json_mod.loads(fixture_text("ann_basic.ann.json"))
    r = client.post(f"/api/sessions/{sid}/infer", json=ann)
    assert r.status_code == 200
    data = r.json()
    assert data["parse_ok"] is True
    assert "EAPackage returns EAPackage" in data["grammar"]
    assert data["message"] is None


def test_evolve_endpoint(client, session):
    sid = session["session_id"]
    add_entry(client, session, "rename_keyword rule=EAPackage old=subPackages new=packages")
    r = client.post(
        f"/api/sessions/{sid}/evolve",
        json={"revision": 1, "metamodel": fixture_text("mini_eatxt_v2.mm.json")},
    )
    assert r.status_code == 200
    data = r.json()
    summary = data["reuse"]["summary"]
    assert summary["stale-no-target"] == 1
    assert data["reuse"]["entries"][0]["suggestion"] == "EAPkg"
    assert "EAPkg" in data["optimized"]
    session_view = client.get(f"/api/sessions/{sid}").json()
    assert session_view["metamodel_name"] == "MiniEATXT"
    assert session_view["revision"] == 2


def test_catalog_endpoint(client):
    data = client.get("/api/catalog").json()
    assert len(data) == 12
    assert "remove_keyword" in data
    assert data["move_attr_out_of_block"]["needs_attr"] is True


def test_concurrent_mutations_are_serialized():
    import threading

    from grammar_forge.service.sessions import SessionStore, StaleRevisionError

    store = SessionStore()
    session = store.create(fixture_text("mini_eatxt_v1.mm.json"))
    outcomes = []

    def writer(line):
        def fn(s):
            s.config.append(gf.parse_config_line(line))

        try:
            store.mutate(session.id, 0, fn)
            outcomes.append("ok")
        except StaleRevisionError:
            outcomes.append("stale")

    threads = [
        threading.Thread(target=writer, args=("remove_keyword rule=* keyword=shortName",))
        for _ in range(8)
    ]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    # Exactly one revision-0 write wins; the rest are rejected cleanly.
    assert outcomes.count("ok") == 1
    assert outcomes.count("stale") == 7
    assert session.revision == 1
    assert len(session.config) == 1
