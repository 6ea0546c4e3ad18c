"""Grammar-optimization workbench for metamodel-based textual DSLs.

Core pipeline: load a metamodel, generate a conventional grammar from it,
rewrite the grammar with declaratively configured optimization rules, and
preview conforming example programs in real time. Style bundles package
reusable rule configurations; grammars can also be inferred from annotated
example programs, and configurations survive metamodel evolution with a
reuse report.
"""

from .errors import (
    ConfigError,
    Diagnostic,
    GenerationError,
    GrammarForgeError,
    GrammarSyntaxError,
    GrammarValidationError,
    InferenceError,
    MetamodelError,
    MigrationError,
    SerializeError,
    StyleError,
)
from .metamodel import (
    Metamodel,
    MClass,
    MEnum,
    MFeature,
    MetamodelDelta,
    UNBOUNDED,
    apply_delta,
    diff_metamodels,
    load_metamodel,
    metamodel_to_document,
    validate_metamodel,
)
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
    TerminalRule,
    locate,
    validate_grammar,
)
from .gxt import parse_grammar, print_grammar
from .generate import attach_metamodel, derive_metamodel, generate_grammar, unreachable_classes
from .optimize import (
    CATALOG,
    ApplicationReport,
    RuleConfig,
    apply_config,
    apply_rule,
    parse_config,
    parse_config_line,
)
from .styles import StyleLibrary, StyleRegistry, apply_style, install_style, list_styles
from .instances import (
    InstanceModel,
    InstanceObject,
    MigrationResult,
    ParseFailure,
    ParseOk,
    Ref,
    migrate_program,
    parse_program,
    sample_instances,
    sample_models,
    serialize_instance,
    validate_instance,
)
from .infer import AnnotatedExample, Span, coverage_gaps, infer_grammar, load_annotation, verify_inference
from .evolve import ReuseEntry, ReuseReport, regenerate_and_reapply

__version__ = "0.1.0"
