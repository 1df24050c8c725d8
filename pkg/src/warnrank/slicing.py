"""Warning-context extraction by bidirectional slicing over the SDG.

A context is the ordered set of statements reachable backward and forward
from the reported statement over a selectable edge subset. Call and
parameter edges stay traversable in every slicing mode so contexts remain
inter-procedural; `raw_function` skips slicing and returns the whole
containing function.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING

from .dependence import EdgeKind, Node, NodeKind, SystemDependenceGraph
from .minic.lexer import LexToken

if TYPE_CHECKING:
    from .warnings_io import Warning

log = logging.getLogger(__name__)


class UnknownNode(Exception):
    pass


class UnresolvedWarning(Exception):
    pass


class ContextMode(Enum):
    RAW_FUNCTION = "raw_function"
    CONTROL_ONLY = "control_only"
    DATA_ONLY = "data_only"
    CONTROL_AND_DATA = "control_and_data"


_ALWAYS = {EdgeKind.CALL, EdgeKind.PARAM_IN, EdgeKind.PARAM_OUT}

_MODE_EDGES = {
    ContextMode.CONTROL_ONLY: _ALWAYS | {EdgeKind.CONTROL},
    ContextMode.DATA_ONLY: _ALWAYS | {EdgeKind.DATA},
    ContextMode.CONTROL_AND_DATA: _ALWAYS | {EdgeKind.CONTROL, EdgeKind.DATA},
}


@dataclass
class WarningContext:
    warning: "Warning"
    mode: ContextMode
    statements: list[Node]  # ascending (source file, line)
    reported: Node


def slice_nodes(sdg: SystemDependenceGraph, criterion: Node, mode: ContextMode) -> set[Node]:
    """Union of backward and forward reachability from the criterion."""
    if mode is ContextMode.RAW_FUNCTION:
        raise ValueError("raw_function is not a slicing mode")
    if criterion not in sdg.node_set:
        raise UnknownNode(f"{criterion.render()} is not an SDG node")
    enabled = _MODE_EDGES[mode]
    result = {criterion}
    for adj, pick in ((sdg.out_adj, lambda e: e.dst), (sdg.in_adj, lambda e: e.src)):
        seen = {criterion}
        work = [criterion]
        while work:
            n = work.pop()
            for e in adj[n]:
                if e.kind not in enabled:
                    continue
                m = pick(e)
                if m not in seen:
                    seen.add(m)
                    work.append(m)
        result |= seen
    return result


def resolve_reported(sdg: SystemDependenceGraph, warning: "Warning") -> Node:
    """Map a (file, line) report to its statement node; first statement wins."""
    hits = sdg.resolve_line(warning.file, warning.line)
    if not hits:
        raise UnresolvedWarning(
            f"no statement at {warning.file}:{warning.line} for warning {warning.id}"
        )
    if len(hits) > 1:
        log.warning(
            "line %s:%d holds %d statements; using the first",
            warning.file,
            warning.line,
            len(hits),
        )
    return hits[0]


def extract_context(
    sdg: SystemDependenceGraph, warning: "Warning", mode: ContextMode
) -> WarningContext:
    reported = resolve_reported(sdg, warning)
    if mode is ContextMode.RAW_FUNCTION:
        stmts = sdg.statement_nodes(reported.function)
    else:
        nodes = slice_nodes(sdg, reported, mode)
        stmts = [n for n in nodes if n.kind is NodeKind.STMT]
    ordered = sorted(stmts, key=lambda n: (*sdg.location(n), n.stmt))
    return WarningContext(warning=warning, mode=mode, statements=ordered, reported=reported)


def context_token_lists(
    sdg: SystemDependenceGraph, context: WarningContext
) -> tuple[list[list[LexToken]], int]:
    """Per-statement token lists plus the index of the reported statement."""
    token_lists = [sdg.stmt_of(n).tokens for n in context.statements]
    reported_index = context.statements.index(context.reported)
    return token_lists, reported_index
