"""In-memory workbench sessions.

A session holds a metamodel, the grammar generated from it, and the ordered
rule configuration; the optimized grammar is always recomputed from those
two on every mutation, so window 2 can never drift from the CLI's batch
result. Mutations are serialized per session and guarded by an optimistic
revision counter.
"""

from __future__ import annotations

import threading
import uuid
from dataclasses import dataclass, field

from ..errors import GrammarForgeError
from ..generate import generate_grammar
from ..grammar import Grammar
from ..metamodel import Metamodel, load_metamodel
from ..optimize import ApplicationReport, RuleConfig, apply_config, parse_config_line


class StaleRevisionError(GrammarForgeError):
    """The mutation was based on an outdated revision."""


class UnknownSessionError(GrammarForgeError):
    pass


@dataclass
class ImportedProgram:
    name: str
    text: str
    grammar: Grammar  # optimized grammar at import time


@dataclass
class Session:
    id: str
    metamodel: Metamodel
    generated: Grammar
    config: list[RuleConfig] = field(default_factory=list)
    optimized: Grammar = None  # type: ignore[assignment]
    report: ApplicationReport = field(default_factory=ApplicationReport)
    programs: list[ImportedProgram] = field(default_factory=list)
    seed: int = 42
    revision: int = 0
    lock: threading.Lock = field(default_factory=threading.Lock)

    def recompute(self) -> None:
        self.optimized, self.report = apply_config(self.generated, list(self.config))

    def export_config(self) -> str:
        return "\n".join(c.to_line() for c in self.config) + ("\n" if self.config else "")


class SessionStore:
    def __init__(self) -> None:
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    def create(self, metamodel_doc: str, seed: int = 42) -> Session:
        m = load_metamodel(metamodel_doc)
        g = generate_grammar(m)
        session = Session(id=uuid.uuid4().hex[:12], metamodel=m, generated=g, seed=seed)
        session.recompute()
        with self._lock:
            self._sessions[session.id] = session
        return session

    def get(self, session_id: str) -> Session:
        session = self._sessions.get(session_id)
        if session is None:
            raise UnknownSessionError(f"unknown session '{session_id}'")
        return session

    def mutate(self, session_id: str, revision: int, fn) -> Session:
        """Run ``fn(session)`` under the session lock after a revision check;
        recomputes the optimized grammar and bumps the revision."""
        session = self.get(session_id)
        with session.lock:
            if revision != session.revision:
                raise StaleRevisionError(
                    f"revision {revision} is stale (current {session.revision})"
                )
            fn(session)
            session.recompute()
            session.revision += 1
        return session


def parse_entry(line: str, index: int) -> RuleConfig:
    return parse_config_line(line, index)
