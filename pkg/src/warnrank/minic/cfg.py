"""Per-function control-flow graphs over flat statement ids.

Nodes are StmtIds plus the synthetic ENTRY/EXIT markers. If/while/for produce
the standard branch and loop edge shapes; statements that cannot execute, or
cannot reach the function exit, are rejected outright so the statement
universe is identical for every analysis.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .parser import (
    BlockItem,
    BodyItem,
    ForItem,
    FunctionAst,
    IfItem,
    SimpleItem,
    StmtKind,
    WhileItem,
)

ENTRY = -1
EXIT = -2


class CfgError(Exception):
    pass


@dataclass
class Cfg:
    function: str
    nodes: list[int]
    edges: set[tuple[int, int]]
    succ: dict[int, list[int]] = field(default_factory=dict)
    pred: dict[int, list[int]] = field(default_factory=dict)

    def finalize(self) -> "Cfg":
        self.succ = {n: [] for n in self.nodes}
        self.pred = {n: [] for n in self.nodes}
        for a, b in sorted(self.edges):
            self.succ[a].append(b)
            self.pred[b].append(a)
        return self


def build_cfg(function: FunctionAst) -> Cfg:
    """Build the CFG; raises CfgError on unreachable statements."""
    edges: set[tuple[int, int]] = set()
    stmts = function.stmts

    def add(frontier: set[int], target: int) -> None:
        for src in frontier:
            edges.add((src, target))

    def walk(items: list[BodyItem], frontier: set[int]) -> set[int]:
        for item in items:
            sid = _item_head(item)
            if not frontier:
                raise CfgError(
                    f"unreachable statement at line {stmts[sid].line} in {function.name!r}"
                )
            if isinstance(item, SimpleItem):
                add(frontier, item.stmt)
                if stmts[item.stmt].kind is StmtKind.RETURN:
                    edges.add((item.stmt, EXIT))
                    frontier = set()
                else:
                    frontier = {item.stmt}
            elif isinstance(item, IfItem):
                add(frontier, item.cond)
                out_then = walk(item.then, {item.cond})
                out_else = walk(item.orelse, {item.cond}) if item.orelse else {item.cond}
                frontier = out_then | out_else
            elif isinstance(item, (WhileItem, ForItem)):
                head = item.cond if isinstance(item, WhileItem) else item.header
                add(frontier, head)
                body_out = walk(item.body, {head})
                add(body_out, head)
                frontier = {head}
            elif isinstance(item, BlockItem):
                add(frontier, item.enter)
                frontier = walk(item.body, {item.enter})
        return frontier

    tail = walk(function.body, {ENTRY})
    add(tail, EXIT)

    nodes = [ENTRY, EXIT] + [s.id for s in stmts]
    cfg = Cfg(function.name, nodes, edges).finalize()
    _check_connected(cfg, function)
    return cfg


def _item_head(item: BodyItem) -> int:
    if isinstance(item, SimpleItem):
        return item.stmt
    if isinstance(item, IfItem):
        return item.cond
    if isinstance(item, WhileItem):
        return item.cond
    if isinstance(item, ForItem):
        return item.header
    return item.enter


def _check_connected(cfg: Cfg, function: FunctionAst) -> None:
    reached = _closure(cfg.succ, ENTRY)
    for n in cfg.nodes:
        if n not in reached:
            line = function.stmts[n].line if n >= 0 else "?"
            raise CfgError(f"unreachable statement at line {line} in {function.name!r}")
    reaches_exit = _closure(cfg.pred, EXIT)
    for n in cfg.nodes:
        if n not in reaches_exit:
            line = function.stmts[n].line if n >= 0 else "?"
            raise CfgError(
                f"statement at line {line} in {function.name!r} cannot reach the function exit"
            )


def _closure(adj: dict[int, list[int]], start: int) -> set[int]:
    seen = {start}
    work = [start]
    while work:
        n = work.pop()
        for m in adj[n]:
            if m not in seen:
                seen.add(m)
                work.append(m)
    return seen
