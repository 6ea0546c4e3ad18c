"""Named bundles of pre-configured optimization rules (language styles).

A style is data, never code: a ``.style`` document is a header (name,
description, version) followed by a ``.goc`` body. Built-in styles ship
with the package; user bundles install into the styles directory named by
``GRAMMAR_FORGE_STYLES`` (default ``./styles``) and are immediately
listable. Installation is guarded by a single-writer lock; reads work on
immutable snapshots.
"""

from __future__ import annotations

import os
import threading
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError, StyleError
from .grammar import Grammar
from .optimize import ApplicationReport, RuleConfig, apply_config, parse_config

STYLES_ENV_VAR = "GRAMMAR_FORGE_STYLES"

_PYTHON_STYLE = """\
name: python_style
description: Colon-terminated headers with indentation-delimited blocks.
version: 1

add_keyword_to_attr rule=* keyword=':' before=false
change_block_delimiters rule=* open='{' new_open=INDENT close='}' new_close=DEDENT
"""

_C_STYLE = """\
name: c_style
description: Curly-brace blocks with semicolon-terminated attribute lines.
version: 1

change_block_delimiters rule=* open=INDENT new_open='{' close=DEDENT new_close='}'
add_keyword_to_attr rule=* attr=* keyword=';' before=false
"""

_BUILTINS = (_PYTHON_STYLE, _C_STYLE)


@dataclass(frozen=True)
class StyleLibrary:
    name: str
    description: str
    entries: tuple[RuleConfig, ...]
    version: int = 1
    builtin: bool = False


def parse_style(doc: str) -> StyleLibrary:
    """Parse a ``.style`` bundle: header lines then a ``.goc`` body."""
    header: dict[str, str] = {}
    body_lines: list[str] = []
    in_header = True
    for raw in doc.split("\n"):
        stripped = raw.strip()
        if in_header:
            if not stripped:
                if header:
                    in_header = False
                body_lines.append("")  # keep body line numbers document-relative
                continue
            key, sep, value = stripped.partition(":")
            if sep and key.strip() in ("name", "description", "version"):
                header[key.strip()] = value.strip()
                body_lines.append("")
                continue
            in_header = False
        body_lines.append(raw)
    for key in ("name", "description", "version"):
        if key not in header:
            raise StyleError(f"style bundle missing '{key}:' header")
    try:
        version = int(header["version"])
    except ValueError:
        raise StyleError("style version must be an integer") from None
    try:
        entries = parse_config("\n".join(body_lines))
    except ConfigError as exc:
        raise StyleError(f"invalid style body: {exc}") from None
    if not entries:
        raise StyleError("style bundle has no entries")
    return StyleLibrary(
        name=header["name"],
        description=header["description"],
        entries=tuple(entries),
        version=version,
    )


class StyleRegistry:
    """Built-in styles plus user bundles persisted in the styles directory."""

    def __init__(self, directory: str | os.PathLike | None = None):
        if directory is None:
            directory = os.environ.get(STYLES_ENV_VAR, "./styles")
        self.directory = Path(directory)
        self._write_lock = threading.Lock()

    def _snapshot(self) -> dict[str, StyleLibrary]:
        styles: dict[str, StyleLibrary] = {}
        for doc in _BUILTINS:
            style = parse_style(doc)
            styles[style.name] = StyleLibrary(
                style.name, style.description, style.entries, style.version, builtin=True
            )
        if self.directory.is_dir():
            for path in sorted(self.directory.glob("*.style")):
                try:
                    style = parse_style(path.read_text(encoding="utf-8"))
                except StyleError:
                    continue  # a broken bundle must not take down listing
                styles[style.name] = style
        return styles

    def list_styles(self) -> list[tuple[str, str]]:
        return [(s.name, s.description) for s in self._snapshot().values()]

    def get(self, name: str) -> StyleLibrary:
        style = self._snapshot().get(name)
        if style is None:
            raise StyleError(f"unknown style '{name}'")
        return style

    def apply_style(self, g: Grammar, name: str) -> tuple[Grammar, ApplicationReport]:
        style = self.get(name)
        return apply_config(g, list(style.entries))

    def install_style(self, doc: str, force: bool = False) -> StyleLibrary:
        style = parse_style(doc)
        with self._write_lock:
            existing = self._snapshot().get(style.name)
            if existing is not None:
                if existing.builtin:
                    raise StyleError(f"cannot replace built-in style '{style.name}'")
                if not force:
                    raise StyleError(f"style '{style.name}' is already installed")
                if style.version <= existing.version:
                    raise StyleError(
                        f"style '{style.name}' version {style.version} does not "
                        f"supersede installed version {existing.version}"
                    )
            self.directory.mkdir(parents=True, exist_ok=True)
            (self.directory / f"{style.name}.style").write_text(doc, encoding="utf-8")
        return style


def default_registry() -> StyleRegistry:
    return StyleRegistry()


def list_styles() -> list[tuple[str, str]]:
    return default_registry().list_styles()


def apply_style(g: Grammar, name: str) -> tuple[Grammar, ApplicationReport]:
    return default_registry().apply_style(g, name)


def install_style(doc: str, force: bool = False) -> StyleLibrary:
    return default_registry().install_style(doc, force=force)
