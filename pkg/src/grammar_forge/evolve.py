"""Metamodel-evolution support: regenerate the grammar from a new metamodel
version, re-apply the saved optimization configuration, and report which
entries still apply, which went stale, and what likely needs adjustment.

Suggestions are advisory only; configurations are never auto-rewritten.
"""

from __future__ import annotations

from dataclasses import dataclass

from .generate import generate_grammar
from .grammar import Assignment, Block, CrossRef, Grammar, Line, Selector
from .metamodel import Metamodel, MetamodelDelta, diff_metamodels
from .optimize import ApplicationReport, RuleConfig, apply_config

_STATUS_APPLIED = "applied"
_STATUS_NO_TARGET = "stale-no-target"
_STATUS_NO_MATCH = "stale-no-match"
_STATUS_ERROR = "error"


@dataclass(frozen=True)
class ReuseEntry:
    index: int
    rule_id: str
    scope: Selector
    status: str
    suggestion: str | None = None


@dataclass(frozen=True)
class ReuseReport:
    entries: tuple[ReuseEntry, ...]
    added_classes: tuple[str, ...] = ()
    renamed_classes: tuple[tuple[str, str], ...] = ()

    def counts(self) -> dict[str, int]:
        out = {
            _STATUS_APPLIED: 0,
            _STATUS_NO_TARGET: 0,
            _STATUS_NO_MATCH: 0,
            _STATUS_ERROR: 0,
        }
        for e in self.entries:
            out[e.status] += 1
        return out

    @property
    def stale_total(self) -> int:
        c = self.counts()
        return c[_STATUS_NO_TARGET] + c[_STATUS_NO_MATCH]

    @property
    def adjustments_needed(self) -> int:
        """Stale entries plus new entries likely needed for added classes."""
        return self.stale_total + len(self.added_classes)

    def to_dict(self) -> dict:
        return {
            "entries": [
                {
                    "index": e.index,
                    "rule_id": e.rule_id,
                    "scope": {
                        "rule": e.scope.rule,
                        "attr": e.scope.feature,
                        "context": e.scope.context_feature,
                    },
                    "status": e.status,
                    "suggestion": e.suggestion,
                }
                for e in self.entries
            ],
            "summary": {
                **self.counts(),
                "adjustments_needed": self.adjustments_needed,
                "added_classes": list(self.added_classes),
                "renamed_classes": [list(pair) for pair in self.renamed_classes],
            },
        }

    def render_text(self) -> str:
        lines = []
        for e in self.entries:
            scope = e.scope.rule + (f".{e.scope.feature}" if e.scope.feature else "")
            suffix = f" (did you mean '{e.suggestion}'?)" if e.suggestion else ""
            lines.append(f"[{e.index}] {e.rule_id} @ {scope}: {e.status}{suffix}")
        c = self.counts()
        lines.append(
            f"summary: {c[_STATUS_APPLIED]} applied, "
            f"{c[_STATUS_NO_TARGET]} stale-no-target, "
            f"{c[_STATUS_NO_MATCH]} stale-no-match, {c[_STATUS_ERROR]} error"
        )
        if self.added_classes:
            lines.append("new classes: " + ", ".join(self.added_classes))
        lines.append(f"adjustments needed: {self.adjustments_needed}")
        return "\n".join(lines)


def regenerate_and_reapply(
    m_new: Metamodel,
    cs: list[RuleConfig],
    m_old: Metamodel | None = None,
) -> tuple[Grammar, ApplicationReport, ReuseReport]:
    """Regenerate the grammar for the new metamodel version and re-apply the
    saved configuration; the returned grammar is exactly
    ``apply_config(generate_grammar(m_new), cs)``.

    With ``m_old`` given, stale entries scoped to a renamed class carry the
    candidate new name as a suggestion.
    """
    generated = generate_grammar(m_new)
    optimized, app_report = apply_config(generated, cs)
    delta = diff_metamodels(m_old, m_new) if m_old is not None else MetamodelDelta()
    rename_map = dict(delta.renamed_classes)

    entries = []
    for c, report_entry in zip(cs, app_report.entries):
        status = _classify(generated, c, report_entry.status)
        suggestion = None
        if status == _STATUS_NO_TARGET and c.scope.rule in rename_map:
            suggestion = rename_map[c.scope.rule]
        entries.append(ReuseEntry(report_entry.index, c.rule_id, c.scope, status, suggestion))
    reuse = ReuseReport(
        entries=tuple(entries),
        added_classes=tuple(c.name for c in delta.added_classes),
        renamed_classes=delta.renamed_classes,
    )
    return optimized, app_report, reuse


def _classify(generated: Grammar, c: RuleConfig, status: str) -> str:
    if status == "applied":
        return _STATUS_APPLIED
    if status == "error":
        return _STATUS_ERROR
    # no-match: the target (rule or feature) is gone, or just the content
    # (e.g. a keyword) no longer appears.
    if c.scope.rule != "*":
        rule = generated.rule_named(c.scope.rule)
        if rule is None:
            return _STATUS_NO_TARGET
        if c.scope.feature not in (None, "*") and not _rule_has_feature(rule, c.scope.feature):
            return _STATUS_NO_TARGET
        return _STATUS_NO_MATCH
    if c.scope.feature not in (None, "*"):
        if not any(_rule_has_feature(r, c.scope.feature) for r in generated.rules):
            return _STATUS_NO_TARGET
    return _STATUS_NO_MATCH


def _rule_has_feature(rule, feature: str) -> bool:
    def walk(lines: tuple[Line, ...]) -> bool:
        for line in lines:
            for e in line.elements:
                if isinstance(e, (Assignment, CrossRef)) and e.feature == feature:
                    return True
                if isinstance(e, Block) and walk(e.body):
                    return True
        return False

    return walk(rule.body)
