from __future__ import annotations

from pathlib import Path

import pytest

import grammar_forge as gf

FIXTURES = Path(__file__).parent / "fixtures"

ACCEPTANCE_CRITERIA = {
    "test_c1_motivating_example_reproduction": "motivating-example reproduction (byte-exact golden)",
    "test_c2_config_leverage": "config leverage (lines changed >= 3x entries)",
    "test_c3_round_trip_suite": "round-trip suite (200 seeds x 4 grammars)",
    "test_c4_realtime_consistency": "real-time consistency (service window 2 == CLI optimize)",
    "test_c5_evolution_reuse": "evolution reuse (1 stale entry, suggestion, <= 4 adjustments)",
    "test_c6_inference_soundness": "inference soundness (5 examples, no dead productions)",
    "test_c7_rewrite_engine_properties": "rewrite-engine properties (>= 100 randomized cases)",
    "test_c8_parser_totality_fuzz": "parser totality fuzz (10,000 byte strings)",
}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = []
    for outcome in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(outcome, []):
            name = getattr(report, "location", ("", "", ""))[2]
            base = name.split("[")[0]
            if base in ACCEPTANCE_CRITERIA:
                verdict = "PASS" if outcome == "passed" else "FAIL"
                lines.append((base, f"{verdict}  {ACCEPTANCE_CRITERIA[base]}"))
    if lines:
        terminalreporter.write_sep("-", "acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)


def fixture_text(name: str) -> str:
    return (FIXTURES / name).read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def mini_v1() -> gf.Metamodel:
    return gf.load_metamodel(fixture_text("mini_eatxt_v1.mm.json"))


@pytest.fixture(scope="session")
def mini_v2() -> gf.Metamodel:
    return gf.load_metamodel(fixture_text("mini_eatxt_v2.mm.json"))


@pytest.fixture(scope="session")
def mini_grammar(mini_v1) -> gf.Grammar:
    return gf.generate_grammar(mini_v1)


@pytest.fixture(scope="session")
def mini_config() -> list[gf.RuleConfig]:
    return gf.parse_config(fixture_text("mini_eatxt_v1.goc"))


@pytest.fixture(scope="session")
def mini_optimized(mini_grammar, mini_config) -> gf.Grammar:
    optimized, _ = gf.apply_config(mini_grammar, mini_config)
    return optimized


@pytest.fixture()
def styles_dir(tmp_path, monkeypatch) -> Path:
    directory = tmp_path / "styles"
    monkeypatch.setenv("GRAMMAR_FORGE_STYLES", str(directory))
    return directory


ONE_CLASS_MM = """\
{
  "name": "One",
  "classes": [
    {
      "name": "EAPackage",
      "features": [
        {"name": "shortName", "kind": "attribute", "type": "string", "lower": 1, "upper": 1}
      ]
    }
  ]
}
"""


@pytest.fixture(scope="session")
def one_class() -> gf.Metamodel:
    return gf.load_metamodel(ONE_CLASS_MM)
