"""Dependence analyses and the inter-procedural system dependence graph.

Per function: post-dominators, Ferrante–Ottenstein control dependence,
reaching definitions (forward may-analysis), and data dependence. Per
program: function PDGs joined by call edges, per-call-site actual-argument
nodes wired to formal-parameter nodes (param-in), and return statements
wired back to call sites (param-out). Globals are modeled as definitions at
one synthetic global-init node; parameters as definitions at their formal
nodes. The closure is context-insensitive: slices may enter and leave any
call site.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterable, Optional

from .minic.cfg import ENTRY, EXIT, Cfg, build_cfg
from .minic.parser import FunctionAst, Stmt, StmtKind, TranslationUnit


class SdgError(Exception):
    pass


class NodeKind(IntEnum):
    STMT = 0
    ENTRY = 1
    FORMAL = 2
    ACTUAL = 3
    GLOBAL = 4


class EdgeKind(IntEnum):
    CONTROL = 0
    DATA = 1
    CALL = 2
    PARAM_IN = 3
    PARAM_OUT = 4

    @property
    def label(self) -> str:
        return _EDGE_LABELS[self]


_EDGE_LABELS = {
    EdgeKind.CONTROL: "control",
    EdgeKind.DATA: "data",
    EdgeKind.CALL: "call",
    EdgeKind.PARAM_IN: "param-in",
    EdgeKind.PARAM_OUT: "param-out",
}


@dataclass(frozen=True, order=True)
class Node:
    """A reference into the SDG: a statement or a synthetic anchor."""

    function: str
    kind: NodeKind
    stmt: int = -1
    site: int = -1
    index: int = -1

    def render(self) -> str:
        if self.kind is NodeKind.STMT:
            return f"{self.function}:{self.stmt}"
        if self.kind is NodeKind.ENTRY:
            return f"{self.function}:ENTRY"
        if self.kind is NodeKind.FORMAL:
            return f"{self.function}:formal{self.index}"
        if self.kind is NodeKind.ACTUAL:
            return f"{self.function}:{self.stmt}.{self.site}.arg{self.index}"
        return "GLOBALS"


def stmt_node(function: str, stmt_id: int) -> Node:
    return Node(function, NodeKind.STMT, stmt_id)


def entry_node(function: str) -> Node:
    return Node(function, NodeKind.ENTRY)


def formal_node(function: str, index: int) -> Node:
    return Node(function, NodeKind.FORMAL, index=index)


def actual_node(function: str, stmt_id: int, site: int, index: int) -> Node:
    return Node(function, NodeKind.ACTUAL, stmt=stmt_id, site=site, index=index)


GLOBAL_INIT = Node("", NodeKind.GLOBAL)


@dataclass(frozen=True, order=True)
class DependenceEdge:
    src: Node
    dst: Node
    kind: EdgeKind
    var: str = ""


def post_dominators(cfg: Cfg) -> dict[int, set[int]]:
    """pdom(n) = nodes on every path from n to EXIT, including n itself."""
    universe = set(cfg.nodes)
    pdom = {n: set(universe) for n in cfg.nodes}
    pdom[EXIT] = {EXIT}
    changed = True
    while changed:
        changed = False
        for n in cfg.nodes:
            if n == EXIT:
                continue
            succs = cfg.succ[n]
            new = set(universe)
            for s in succs:
                new &= pdom[s]
            new |= {n}
            if new != pdom[n]:
                pdom[n] = new
                changed = True
    return pdom


def control_dependence(cfg: Cfg) -> list[DependenceEdge]:
    """Edges m→n where n post-dominates some but not all successors of m."""
    pdom = post_dominators(cfg)
    edges = []
    for m in cfg.nodes:
        if m < 0 or len(cfg.succ[m]) < 2:
            continue
        for n in cfg.nodes:
            if n < 0:
                continue
            hit = sum(1 for s in cfg.succ[m] if n in pdom[s])
            if 0 < hit < len(cfg.succ[m]):
                edges.append(
                    DependenceEdge(stmt_node(cfg.function, m), stmt_node(cfg.function, n), EdgeKind.CONTROL)
                )
    return sorted(edges)


Definition = tuple[int, str]  # (defining node, variable); ENTRY marks params/globals


def reaching_definitions(
    function: FunctionAst, cfg: Cfg, entry_vars: Iterable[str] = ()
) -> tuple[dict[int, set[Definition]], dict[int, set[Definition]]]:
    """Classic worklist fixpoint; returns (in, out) sets of (node, var) pairs."""
    gen: dict[int, set[Definition]] = {n: set() for n in cfg.nodes}
    defs_of_var: dict[str, set[int]] = {}
    gen[ENTRY] = {(ENTRY, v) for v in entry_vars}
    for v in entry_vars:
        defs_of_var.setdefault(v, set()).add(ENTRY)
    for s in function.stmts:
        for v in s.defs:
            gen[s.id].add((s.id, v))
            defs_of_var.setdefault(v, set()).add(s.id)

    def kill(n: int) -> set[Definition]:
        if n < 0:
            return set()
        killed = set()
        for v in function.stmts[n].defs:
            for d in defs_of_var[v]:
                if d != n:
                    killed.add((d, v))
        return killed

    in_sets: dict[int, set[Definition]] = {n: set() for n in cfg.nodes}
    out_sets: dict[int, set[Definition]] = {n: set(gen[n]) for n in cfg.nodes}
    work = list(cfg.nodes)
    while work:
        n = work.pop(0)
        new_in = set()
        for p in cfg.pred[n]:
            new_in |= out_sets[p]
        new_out = gen[n] | (new_in - kill(n))
        in_sets[n] = new_in
        if new_out != out_sets[n]:
            out_sets[n] = new_out
            for s in cfg.succ[n]:
                if s not in work:
                    work.append(s)
    return in_sets, out_sets


def data_dependence(
    function: FunctionAst, cfg: Cfg, in_sets: Optional[dict[int, set[Definition]]] = None
) -> list[DependenceEdge]:
    """Edges d→u where d's definition of a variable reaches u's use of it."""
    if in_sets is None:
        in_sets, _ = reaching_definitions(function, cfg)
    edges = []
    for u in function.stmts:
        for d, v in in_sets[u.id]:
            if d >= 0 and v in u.uses:
                edges.append(
                    DependenceEdge(
                        stmt_node(cfg.function, d), stmt_node(cfg.function, u.id), EdgeKind.DATA, v
                    )
                )
    return sorted(edges)


@dataclass
class SystemDependenceGraph:
    units: list[TranslationUnit]
    nodes: list[Node]
    edges: list[DependenceEdge]
    call_graph: dict[str, set[str]]
    functions: dict[str, tuple[str, FunctionAst]]  # name -> (source_id, ast)
    out_adj: dict[Node, list[DependenceEdge]] = field(default_factory=dict)
    in_adj: dict[Node, list[DependenceEdge]] = field(default_factory=dict)
    node_set: set[Node] = field(default_factory=set)

    def finalize(self) -> "SystemDependenceGraph":
        self.node_set = set(self.nodes)
        self.out_adj = {n: [] for n in self.nodes}
        self.in_adj = {n: [] for n in self.nodes}
        for e in self.edges:
            self.out_adj[e.src].append(e)
            self.in_adj[e.dst].append(e)
        return self

    def source_of(self, function: str) -> str:
        return self.functions[function][0]

    def stmt_of(self, node: Node) -> Stmt:
        return self.functions[node.function][1].stmts[node.stmt]

    def location(self, node: Node) -> tuple[str, int]:
        src, ast = self.functions[node.function]
        return src, ast.stmts[node.stmt].line

    def statement_nodes(self, function: str) -> list[Node]:
        _, ast = self.functions[function]
        return [stmt_node(function, s.id) for s in ast.stmts]

    def resolve_line(self, source_id: str, line: int) -> list[Node]:
        """All statement nodes at (file, line), in statement order."""
        hits = []
        for name, (src, ast) in self.functions.items():
            if src != source_id:
                continue
            for s in ast.stmts:
                if s.line == line:
                    hits.append((s.id, name))
        return [stmt_node(name, sid) for sid, name in sorted(hits)]


def build_sdg(units: list[TranslationUnit]) -> SystemDependenceGraph:
    functions: dict[str, tuple[str, FunctionAst]] = {}
    unit_globals: dict[str, set[str]] = {}
    for unit in units:
        unit_globals[unit.source_id] = {g.decl.name for g in unit.globals}
        for f in unit.functions:
            if f.name in functions:
                raise SdgError(
                    f"duplicate function {f.name!r} in {unit.source_id!r} "
                    f"and {functions[f.name][0]!r}"
                )
            functions[f.name] = (unit.source_id, f)

    edges: set[DependenceEdge] = set()
    nodes: set[Node] = set()
    call_graph: dict[str, set[str]] = {name: set() for name in functions}

    in_sets_by_fn: dict[str, dict[int, set[Definition]]] = {}

    for name, (source_id, f) in functions.items():
        cfg = build_cfg(f)
        nodes.add(entry_node(name))
        for s in f.stmts:
            nodes.add(stmt_node(name, s.id))
        for i, _p in enumerate(f.params):
            nodes.add(formal_node(name, i))

        cd = control_dependence(cfg)
        edges.update(cd)
        # statements under no branch hang off the function entry
        controlled = {e.dst for e in cd}
        for s in f.stmts:
            n = stmt_node(name, s.id)
            if n not in controlled:
                edges.add(DependenceEdge(entry_node(name), n, EdgeKind.CONTROL))

        param_names = {p.name: i for i, p in enumerate(f.params)}
        entry_vars = set(param_names) | unit_globals[source_id]
        in_sets, _ = reaching_definitions(f, cfg, sorted(entry_vars))
        in_sets_by_fn[name] = in_sets
        edges.update(data_dependence(f, cfg, in_sets))

        # entry-reaching uses of parameters and globals
        for u in f.stmts:
            for d, v in in_sets[u.id]:
                if d != ENTRY or v not in u.uses:
                    continue
                if v in param_names:
                    src = formal_node(name, param_names[v])
                else:
                    src = GLOBAL_INIT
                    nodes.add(GLOBAL_INIT)
                edges.add(DependenceEdge(src, stmt_node(name, u.id), EdgeKind.DATA, v))

    # inter-procedural wiring
    for name, (_, f) in functions.items():
        in_sets = in_sets_by_fn[name]
        param_names = {p.name: i for i, p in enumerate(f.params)}
        for s in f.stmts:
            for site_idx, site in enumerate(s.calls):
                callee = site.callee
                if callee not in functions:
                    continue
                call_graph[name].add(callee)
                _, g = functions[callee]
                s_node = stmt_node(name, s.id)
                edges.add(DependenceEdge(s_node, entry_node(callee), EdgeKind.CALL))
                for i in range(min(len(site.arg_vars), len(g.params))):
                    a = actual_node(name, s.id, site_idx, i)
                    nodes.add(a)
                    edges.add(DependenceEdge(s_node, a, EdgeKind.CONTROL))
                    edges.add(DependenceEdge(a, formal_node(callee, i), EdgeKind.PARAM_IN))
                    for v in sorted(site.arg_vars[i]):
                        for d, dv in in_sets[s.id]:
                            if dv != v:
                                continue
                            if d == ENTRY:
                                if v in param_names:
                                    src = formal_node(name, param_names[v])
                                else:
                                    src = GLOBAL_INIT
                            else:
                                src = stmt_node(name, d)
                            edges.add(DependenceEdge(src, a, EdgeKind.DATA, v))
                for r in g.stmts:
                    if r.kind is StmtKind.RETURN:
                        edges.add(
                            DependenceEdge(stmt_node(callee, r.id), s_node, EdgeKind.PARAM_OUT)
                        )

    sdg = SystemDependenceGraph(
        units=list(units),
        nodes=sorted(nodes),
        edges=sorted(edges),
        call_graph=call_graph,
        functions=functions,
    )
    return sdg.finalize()


def edge_list_text(sdg: SystemDependenceGraph) -> str:
    """Debug export: one edge per line (src, dst, kind, variable)."""
    lines = [
        f"{e.src.render()} -> {e.dst.render()} {e.kind.label} {e.var}".rstrip()
        for e in sdg.edges
    ]
    return "\n".join(lines) + "\n"
