"""Command-line interface: a thin client over the core package.

Subcommands mirror the workbench operations: generate, optimize, preview,
style (list/apply/install), infer, evolve, and serve. All diagnosable input
errors exit with status 2 and a message on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .errors import GrammarForgeError
from .evolve import regenerate_and_reapply
from .generate import attach_metamodel, derive_metamodel, generate_grammar
from .gxt import parse_grammar, print_grammar
from .infer import coverage_gaps, infer_grammar, load_annotation
from .instances import sample_instances, sampling_diagnostic
from .metamodel import load_metamodel, metamodel_to_document
from .optimize import apply_config, parse_config
from .styles import StyleRegistry


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="grammar-forge",
        description="Grammar-optimization workbench for metamodel-based textual DSLs.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a grammar from a metamodel")
    p.add_argument("-m", "--metamodel", required=True, help="metamodel document (.mm.json)")
    p.add_argument("-o", "--output", required=True, help="output grammar file (.gxt)")

    p = sub.add_parser("optimize", help="apply an optimization configuration to a grammar")
    p.add_argument("-g", "--grammar", required=True, help="input grammar file (.gxt)")
    p.add_argument("-c", "--config", required=True, help="configuration file (.goc)")
    p.add_argument("-o", "--output", required=True, help="output grammar file (.gxt)")
    p.add_argument("--report", help="write the application report to this file")
    p.add_argument("--strict", action="store_true", help="halt on the first error entry")

    p = sub.add_parser("preview", help="print sampled example programs for a grammar")
    p.add_argument("-g", "--grammar", required=True, help="grammar file (.gxt)")
    p.add_argument("-m", "--metamodel", help="metamodel document for typing (.mm.json)")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--count", type=int, default=3)
    p.add_argument("--depth", type=int, default=3, help="maximum containment depth")

    p = sub.add_parser("style", help="list, apply, or install style bundles")
    style_sub = p.add_subparsers(dest="style_command", required=True)
    style_sub.add_parser("list", help="list installed styles")
    sp = style_sub.add_parser("apply", help="apply a style to a grammar")
    sp.add_argument("-g", "--grammar", required=True)
    sp.add_argument("-s", "--style", required=True, help="style name")
    sp.add_argument("-o", "--output", required=True)
    sp.add_argument("--report", help="write the application report to this file")
    sp = style_sub.add_parser("install", help="install a style bundle")
    sp.add_argument("-f", "--file", required=True, help="bundle file (.style)")
    sp.add_argument("--force", action="store_true", help="replace an installed version")

    p = sub.add_parser("infer", help="infer a grammar from an annotated example")
    p.add_argument("-a", "--annotation", required=True, help="annotation file (.ann.json)")
    p.add_argument("-o", "--output", required=True, help="output grammar file (.gxt)")
    p.add_argument("--metamodel-out", help="also write the inferred metamodel (.mm.json)")

    p = sub.add_parser("evolve", help="regenerate for a new metamodel and re-apply a config")
    p.add_argument("-m", "--metamodel", required=True, help="new metamodel version (.mm.json)")
    p.add_argument("-c", "--config", required=True, help="saved configuration (.goc)")
    p.add_argument("--old", help="previous metamodel version, enables rename suggestions")
    p.add_argument("-o", "--output", help="write the re-optimized grammar here")
    p.add_argument("--report", help="write the reuse report here")
    p.add_argument("--json", action="store_true", help="print the reuse report as JSON")

    p = sub.add_parser("serve", help="run the local workbench service")
    p.add_argument("--port", type=int, default=7341)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--ui-dir", help="directory with the built web UI (default ./frontend/dist)")

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except GrammarForgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _read(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def _load_grammar(path: str, metamodel_path: str | None):
    g = parse_grammar(_read(path))
    if metamodel_path:
        return attach_metamodel(g, load_metamodel(_read(metamodel_path)))
    return attach_metamodel(g, derive_metamodel(g))


def _cmd_generate(args) -> int:
    m = load_metamodel(_read(args.metamodel))
    g = generate_grammar(m)
    Path(args.output).write_text(print_grammar(g), encoding="utf-8")
    print(f"wrote {args.output} ({len(g.rules)} rules)")
    return 0


def _cmd_optimize(args) -> int:
    g = parse_grammar(_read(args.grammar))
    cs = parse_config(_read(args.config))
    optimized, report = apply_config(g, cs, strict=args.strict)
    Path(args.output).write_text(print_grammar(optimized), encoding="utf-8")
    text = report.render_text()
    if args.report:
        Path(args.report).write_text(text + "\n", encoding="utf-8")
    print(text)
    return 0 if report.counts()["error"] == 0 else 2


def _cmd_preview(args) -> int:
    g = _load_grammar(args.grammar, args.metamodel)
    diagnostic = sampling_diagnostic(g)
    if diagnostic is not None:
        print(f"error: {diagnostic}", file=sys.stderr)
        return 2
    for i, text in enumerate(sample_instances(g, args.seed, args.count, args.depth)):
        if i:
            print("---")
        print(text, end="")
    return 0


def _cmd_style(args) -> int:
    registry = StyleRegistry()
    if args.style_command == "list":
        for name, description in registry.list_styles():
            print(f"{name}\t{description}")
        return 0
    if args.style_command == "apply":
        g = parse_grammar(_read(args.grammar))
        styled, report = registry.apply_style(g, args.style)
        Path(args.output).write_text(print_grammar(styled), encoding="utf-8")
        text = report.render_text()
        if args.report:
            Path(args.report).write_text(text + "\n", encoding="utf-8")
        print(text)
        return 0
    style = registry.install_style(_read(args.file), force=args.force)
    print(f"installed style '{style.name}' version {style.version}")
    return 0


def _cmd_infer(args) -> int:
    ex = load_annotation(_read(args.annotation))
    metamodel, grammar = infer_grammar(ex)
    Path(args.output).write_text(print_grammar(grammar), encoding="utf-8")
    if args.metamodel_out:
        Path(args.metamodel_out).write_text(metamodel_to_document(metamodel), encoding="utf-8")
    gaps = coverage_gaps(grammar, ex)
    if gaps:
        print("warning: dead productions: " + "; ".join(gaps), file=sys.stderr)
    print(f"wrote {args.output} ({len(grammar.rules)} rules)")
    return 0


def _cmd_evolve(args) -> int:
    m_new = load_metamodel(_read(args.metamodel))
    cs = parse_config(_read(args.config))
    m_old = load_metamodel(_read(args.old)) if args.old else None
    grammar, _app_report, reuse = regenerate_and_reapply(m_new, cs, m_old=m_old)
    if args.output:
        Path(args.output).write_text(print_grammar(grammar), encoding="utf-8")
    text = json.dumps(reuse.to_dict(), indent=2) if args.json else reuse.render_text()
    if args.report:
        Path(args.report).write_text(text + "\n", encoding="utf-8")
    print(text)
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service.app import create_app

    app = create_app(ui_dir=args.ui_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


_COMMANDS = {
    "generate": _cmd_generate,
    "optimize": _cmd_optimize,
    "preview": _cmd_preview,
    "style": _cmd_style,
    "infer": _cmd_infer,
    "evolve": _cmd_evolve,
    "serve": _cmd_serve,
}


if __name__ == "__main__":
    sys.exit(main())
