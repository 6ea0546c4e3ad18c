from __future__ import annotations

import pytest

import grammar_forge as gf
from grammar_forge.grammar import Block, Keyword
from grammar_forge.styles import StyleRegistry, parse_style


MY_STYLE = """\
name: my_style
description: Parenthesized blocks.
version: 1

change_block_delimiters rule=* open='{' new_open='(' close='}' new_close=')'
"""


def test_builtins_listed(styles_dir):
    names = [n for n, _ in gf.list_styles()]
    assert "python_style" in names
    assert "c_style" in names


def test_install_grows_list(styles_dir):
    before = len(gf.list_styles())
    gf.install_style(MY_STYLE)
    names = [n for n, _ in gf.list_styles()]
    assert len(names) == before + 1
    assert "my_style" in names


def test_duplicate_install_rejected(styles_dir):
    gf.install_style(MY_STYLE)
    with pytest.raises(gf.StyleError, match="already installed"):
        gf.install_style(MY_STYLE)
    assert [n for n, _ in gf.list_styles()].count("my_style") == 1


def test_force_reinstall_needs_higher_version(styles_dir):
    gf.install_style(MY_STYLE)
    with pytest.raises(gf.StyleError, match="supersede"):
        gf.install_style(MY_STYLE, force=True)
    v2 = MY_STYLE.replace("version: 1", "version: 2").replace(
        "Parenthesized", "Fully parenthesized"
    )
    style = gf.install_style(v2, force=True)
    assert style.version == 2
    registry = StyleRegistry()
    assert registry.get("my_style").version == 2


def test_unknown_rule_id_rejected_with_line(styles_dir):
    bad = MY_STYLE + "frobnicate rule=*\n"
    with pytest.raises(gf.StyleError, match="line 6"):
        gf.install_style(bad)


def test_builtin_cannot_be_replaced(styles_dir):
    doc = MY_STYLE.replace("my_style", "python_style")
    with pytest.raises(gf.StyleError, match="built-in"):
        gf.install_style(doc)


def test_unknown_style_errors(styles_dir, mini_grammar):
    with pytest.raises(gf.StyleError, match="unknown style"):
        gf.apply_style(mini_grammar, "no_such_style")


def test_apply_equals_apply_config(styles_dir, mini_grammar):
    registry = StyleRegistry()
    style = registry.get("python_style")
    via_style, style_report = gf.apply_style(mini_grammar, "python_style")
    via_config, config_report = gf.apply_config(mini_grammar, list(style.entries))
    assert via_style == via_config
    assert gf.print_grammar(via_style) == gf.print_grammar(via_config)
    assert style_report == config_report


def test_python_style_on_one_class_fixture(styles_dir, one_class):
    # Hand-applied oracle: ':' appended to the header, braces become layout.
    g = gf.generate_grammar(one_class)
    styled, report = gf.apply_style(g, "python_style")
    assert report.counts()["applied"] == 2
    header = styled.rule_named("EAPackage").body[0]
    assert header.elements[1] == Keyword(":")
    block = header.elements[2]
    assert isinstance(block, Block)
    assert (block.open, block.close) == ("INDENT", "DEDENT")
    assert styled.uses_layout


def test_python_style_fixture_roundtrip(styles_dir, mini_grammar):
    styled, _ = gf.apply_style(mini_grammar, "python_style")
    for m in gf.sample_models(styled, seed=21, count=10, max_depth=4):
        text = gf.serialize_instance(styled, m)
        result = gf.parse_program(styled, text)
        assert result.is_ok and result.model == m


def test_c_style_fixture_roundtrip(styles_dir, mini_grammar):
    styled, _ = gf.apply_style(mini_grammar, "c_style")
    for m in gf.sample_models(styled, seed=22, count=10, max_depth=4):
        text = gf.serialize_instance(styled, m)
        result = gf.parse_program(styled, text)
        assert result.is_ok and result.model == m


def test_c_style_idempotent_at_fixed_point(styles_dir, mini_grammar):
    once, _ = gf.apply_style(mini_grammar, "c_style")
    twice, report = gf.apply_style(once, "c_style")
    assert twice == once
    assert all(e.status == "no-match" or e.lines_changed == 0 for e in report.entries)


def test_parse_style_requires_header():
    with pytest.raises(gf.StyleError, match="missing 'version:'"):
        parse_style("name: x\ndescription: y\n\nremove_keyword rule=* keyword=k\n")
