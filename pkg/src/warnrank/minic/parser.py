"""Recursive-descent parser for the mini-C subset.

Produces one `TranslationUnit` per source file: function ASTs with a flat,
densely numbered statement list, and per-statement def/use/callee sets that
feed the dependence analyses. The subset covers int/char/pointer/array
declarations, assignment, arithmetic/comparison/logical operators, calls,
if/else, while, for, return, address-of and dereference. No structs,
typedefs, preprocessor, or gotos.

Writes through a pointer def the pointed-to buffer when the pointer was
syntactically bound earlier in the same function (`p = &buf` or `p = arr`),
otherwise the pointer name itself stands in.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Union

from .lexer import LexToken, TokenKind, lex


class ParseError(Exception):
    def __init__(self, message: str, token: Optional[LexToken] = None):
        if token is not None:
            message = f"{message} (found {token.text!r} at line {token.line}, col {token.col})"
        else:
            message = f"{message} (at end of input)"
        super().__init__(message)
        self.token = token


class StmtKind(Enum):
    DECL = "decl"
    ASSIGN = "assign"
    CALL = "call"
    IF_COND = "if-cond"
    WHILE_COND = "while-cond"
    FOR_HEADER = "for-header"
    RETURN = "return"
    BLOCK_ENTER = "block-enter"


@dataclass(frozen=True)
class VarDecl:
    name: str
    base: str
    ptr: int = 0
    array: Optional[int] = None

    @property
    def is_pointer(self) -> bool:
        return self.ptr > 0

    @property
    def is_array(self) -> bool:
        return self.array is not None

    def type_text(self) -> str:
        return self.base + " " + "*" * self.ptr if self.ptr else self.base


@dataclass(frozen=True)
class CallSite:
    callee: str
    arg_vars: tuple[frozenset[str], ...]
    arg_targets: tuple[Optional[str], ...]  # base name an argument resolves to, for effects


@dataclass(frozen=True)
class Write:
    target: str
    via_deref: bool
    rhs: str  # "null" | "malloc" | "addr" | "alias" | "other" | "none"
    bound_to: Optional[str] = None  # for rhs addr/alias: the named buffer


@dataclass
class Stmt:
    id: int
    line: int
    kind: StmtKind
    tokens: list[LexToken]
    defs: frozenset[str] = frozenset()
    uses: frozenset[str] = frozenset()
    callees: tuple[str, ...] = ()
    calls: tuple[CallSite, ...] = ()
    derefs: frozenset[str] = frozenset()
    guards: frozenset[str] = frozenset()
    writes: tuple[Write, ...] = ()

    def text(self) -> str:
        return " ".join(t.text for t in self.tokens)


# Body tree items; `stmt` fields are StmtIds into FunctionAst.stmts.
@dataclass
class SimpleItem:
    stmt: int


@dataclass
class IfItem:
    cond: int
    then: list["BodyItem"]
    orelse: list["BodyItem"]


@dataclass
class WhileItem:
    cond: int
    body: list["BodyItem"]


@dataclass
class ForItem:
    header: int
    body: list["BodyItem"]


@dataclass
class BlockItem:
    enter: int
    body: list["BodyItem"]


BodyItem = Union[SimpleItem, IfItem, WhileItem, ForItem, BlockItem]


@dataclass
class FunctionAst:
    name: str
    params: list[VarDecl]
    ret_base: str
    ret_ptr: int
    body: list[BodyItem]
    stmts: list[Stmt]
    scope: dict[str, VarDecl]
    line: int


@dataclass
class GlobalDecl:
    decl: VarDecl
    tokens: list[LexToken]
    line: int


@dataclass
class TranslationUnit:
    functions: list[FunctionAst]
    globals: list[GlobalDecl]
    source_id: str

    def function(self, name: str) -> FunctionAst:
        for f in self.functions:
            if f.name == name:
                return f
        raise KeyError(name)


@dataclass(frozen=True)
class LibEffect:
    def_args: tuple[int, ...]
    use_args: Optional[tuple[int, ...]] = None  # None = uses every argument


# Known standard-library call effects on arguments; doubles as the
# identifier-abstraction allowlist.
LIBRARY_EFFECTS: dict[str, LibEffect] = {
    "strcat": LibEffect(def_args=(0,)),
    "strcpy": LibEffect(def_args=(0,), use_args=(1,)),
    "strncpy": LibEffect(def_args=(0,), use_args=(1, 2)),
    "sprintf": LibEffect(def_args=(0,)),
    "snprintf": LibEffect(def_args=(0,)),
    "memcpy": LibEffect(def_args=(0,), use_args=(1, 2)),
    "memset": LibEffect(def_args=(0,), use_args=(1, 2)),
    "malloc": LibEffect(def_args=()),
    "free": LibEffect(def_args=()),
    "strlen": LibEffect(def_args=()),
    "printf": LibEffect(def_args=()),
    "puts": LibEffect(def_args=()),
    "exit": LibEffect(def_args=()),
    "atoi": LibEffect(def_args=()),
}

DEFAULT_EFFECT = LibEffect(def_args=())

TYPE_NAMES = ("int", "char", "void")


# --- expression mini-AST -----------------------------------------------------


@dataclass
class Expr:
    pass


@dataclass
class Num(Expr):
    text: str


@dataclass
class StrLit(Expr):
    text: str


@dataclass
class CharLit(Expr):
    text: str


@dataclass
class Null(Expr):
    pass


@dataclass
class Name(Expr):
    name: str


@dataclass
class Unary(Expr):
    op: str
    operand: Expr


@dataclass
class Binary(Expr):
    op: str
    left: Expr
    right: Expr


@dataclass
class Call(Expr):
    callee: str
    args: list[Expr]


@dataclass
class Index(Expr):
    base: str
    index: Expr


_BINARY_LEVELS = [
    ("||",),
    ("&&",),
    ("|",),
    ("^",),
    ("&",),
    ("==", "!="),
    ("<", ">", "<=", ">="),
    ("<<", ">>"),
    ("+", "-"),
    ("*", "/", "%"),
]

_UNARY_OPS = ("!", "-", "*", "&", "~")


class _Cursor:
    def __init__(self, tokens: list[LexToken]):
        self.tokens = tokens
        self.pos = 0

    def peek(self, ahead: int = 0) -> Optional[LexToken]:
        i = self.pos + ahead
        return self.tokens[i] if i < len(self.tokens) else None

    def at(self, text: str) -> bool:
        t = self.peek()
        return t is not None and t.text == text

    def at_kind(self, kind: TokenKind) -> bool:
        t = self.peek()
        return t is not None and t.kind == kind

    def next(self) -> LexToken:
        t = self.peek()
        if t is None:
            raise ParseError("unexpected end of input")
        self.pos += 1
        return t

    def expect(self, text: str) -> LexToken:
        t = self.peek()
        if t is None or t.text != text:
            raise ParseError(f"expected {text!r}", t)
        return self.next()

    def done(self) -> bool:
        return self.pos >= len(self.tokens)


class _FunctionParser:
    """Parses one function body and assembles its flat statement list."""

    def __init__(self, cur: _Cursor, scope: dict[str, VarDecl], globals_: dict[str, VarDecl]):
        self.cur = cur
        self.scope = scope
        self.globals = globals_
        self.stmts: list[Stmt] = []
        # raw per-stmt analysis stashed for the def/use resolution pass
        self._raw: list[dict] = []

    # -- expressions --

    def parse_expr(self, level: int = 0) -> Expr:
        if level >= len(_BINARY_LEVELS):
            return self.parse_unary()
        expr = self.parse_expr(level + 1)
        ops = _BINARY_LEVELS[level]
        while True:
            t = self.cur.peek()
            if t is None or t.kind != TokenKind.OPERATOR or t.text not in ops:
                return expr
            op = self.cur.next().text
            rhs = self.parse_expr(level + 1)
            expr = Binary(op, expr, rhs)

    def parse_unary(self) -> Expr:
        t = self.cur.peek()
        if t is not None and t.kind == TokenKind.OPERATOR and t.text in _UNARY_OPS:
            self.cur.next()
            return Unary(t.text, self.parse_unary())
        return self.parse_postfix()

    def parse_postfix(self) -> Expr:
        expr = self.parse_primary()
        while True:
            if self.cur.at("["):
                if not isinstance(expr, Name):
                    raise ParseError("can only index a named variable", self.cur.peek())
                self.cur.expect("[")
                idx = self.parse_expr()
                self.cur.expect("]")
                expr = Index(expr.name, idx)
            elif self.cur.at("(") and isinstance(expr, Name):
                self.cur.expect("(")
                args: list[Expr] = []
                if not self.cur.at(")"):
                    args.append(self.parse_expr())
                    while self.cur.at(","):
                        self.cur.next()
                        args.append(self.parse_expr())
                self.cur.expect(")")
                expr = Call(expr.name, args)
            else:
                return expr

    def parse_primary(self) -> Expr:
        t = self.cur.peek()
        if t is None:
            raise ParseError("unexpected end of input")
        if t.kind == TokenKind.NUMBER:
            self.cur.next()
            return Num(t.text)
        if t.kind == TokenKind.STRING:
            self.cur.next()
            return StrLit(t.text)
        if t.kind == TokenKind.CHAR:
            self.cur.next()
            return CharLit(t.text)
        if t.kind == TokenKind.KEYWORD and t.text == "NULL":
            self.cur.next()
            return Null()
        if t.kind == TokenKind.IDENT:
            self.cur.next()
            return Name(t.text)
        if t.text == "(":
            self.cur.next()
            inner = self.parse_expr()
            self.cur.expect(")")
            return inner
        raise ParseError("expected an expression", t)

    # -- expression analysis --

    def _lookup(self, name: str) -> Optional[VarDecl]:
        if name in self.scope:
            return self.scope[name]
        return self.globals.get(name)

    def _require_var(self, name: str, tok_hint: Optional[LexToken]) -> VarDecl:
        decl = self._lookup(name)
        if decl is None:
            raise ParseError(f"undeclared identifier {name!r}", tok_hint)
        return decl

    def analyze(self, expr: Expr, out: dict, tok_hint: Optional[LexToken]) -> None:
        """Collect uses / calls / derefs from an expression tree."""
        if isinstance(expr, (Num, StrLit, CharLit, Null)):
            return
        if isinstance(expr, Name):
            self._require_var(expr.name, tok_hint)
            out["uses"].add(expr.name)
            return
        if isinstance(expr, Unary):
            if expr.op == "*" and isinstance(expr.operand, Name):
                decl = self._require_var(expr.operand.name, tok_hint)
                if decl.is_pointer:
                    out["derefs"].add(expr.operand.name)
            self.analyze(expr.operand, out, tok_hint)
            return
        if isinstance(expr, Binary):
            self.analyze(expr.left, out, tok_hint)
            self.analyze(expr.right, out, tok_hint)
            return
        if isinstance(expr, Index):
            decl = self._require_var(expr.base, tok_hint)
            out["uses"].add(expr.base)
            if decl.is_pointer:
                out["derefs"].add(expr.base)
            self.analyze(expr.index, out, tok_hint)
            return
        if isinstance(expr, Call):
            arg_vars = []
            arg_targets = []
            for a in expr.args:
                sub = {"uses": set(), "derefs": set(), "calls": []}
                self.analyze(a, sub, tok_hint)
                out["uses"] |= sub["uses"]
                out["derefs"] |= sub["derefs"]
                out["calls"].extend(sub["calls"])
                arg_vars.append(frozenset(sub["uses"]))
                arg_targets.append(self._arg_target(a))
            out["calls"].append(
                CallSite(expr.callee, tuple(arg_vars), tuple(arg_targets))
            )
            return
        raise AssertionError(f"unhandled expression node {expr!r}")

    @staticmethod
    def _arg_target(arg: Expr) -> Optional[str]:
        if isinstance(arg, Name):
            return arg.name
        if isinstance(arg, Index):
            return arg.base
        if isinstance(arg, Unary) and arg.op in ("&", "*") and isinstance(arg.operand, Name):
            return arg.operand.name
        return None

    @staticmethod
    def null_guards(cond: Expr) -> set[str]:
        """Variables whose null-ness this condition directly tests."""
        found: set[str] = set()

        def walk(e: Expr) -> None:
            if isinstance(e, Name):
                found.add(e.name)
            elif isinstance(e, Unary) and e.op == "!":
                if isinstance(e.operand, Name):
                    found.add(e.operand.name)
            elif isinstance(e, Binary):
                if e.op in ("==", "!="):
                    if isinstance(e.left, Name) and isinstance(e.right, Null):
                        found.add(e.left.name)
                    elif isinstance(e.right, Name) and isinstance(e.left, Null):
                        found.add(e.right.name)
                elif e.op in ("&&", "||"):
                    walk(e.left)
                    walk(e.right)

        walk(cond)
        return found

    @staticmethod
    def rhs_class(expr: Expr) -> tuple[str, Optional[str]]:
        if isinstance(expr, Null):
            return "null", None
        if isinstance(expr, Call) and expr.callee == "malloc":
            return "malloc", None
        if isinstance(expr, Unary) and expr.op == "&" and isinstance(expr.operand, Name):
            return "addr", expr.operand.name
        if isinstance(expr, Name):
            return "alias", expr.name
        return "other", None

    # -- statements --

    def new_stmt(self, kind: StmtKind, tokens: list[LexToken], raw: dict) -> int:
        sid = len(self.stmts)
        self.stmts.append(Stmt(id=sid, line=tokens[0].line, kind=kind, tokens=tokens))
        raw.setdefault("uses", set())
        raw.setdefault("derefs", set())
        raw.setdefault("calls", [])
        raw.setdefault("writes", [])
        raw.setdefault("guards", set())
        self._raw.append(raw)
        return sid

    def parse_type(self) -> tuple[str, int]:
        t = self.cur.next()
        if t.text not in TYPE_NAMES:
            raise ParseError("expected a type name", t)
        ptr = 0
        while self.cur.at("*"):
            self.cur.next()
            ptr += 1
        return t.text, ptr

    def at_type(self) -> bool:
        t = self.cur.peek()
        return t is not None and t.kind == TokenKind.KEYWORD and t.text in TYPE_NAMES

    def parse_body(self) -> list[BodyItem]:
        self.cur.expect("{")
        items: list[BodyItem] = []
        while not self.cur.at("}"):
            items.append(self.parse_statement())
        self.cur.expect("}")
        return items

    def parse_branch_body(self) -> list[BodyItem]:
        if self.cur.at("{"):
            return self.parse_body()
        return [self.parse_statement()]

    def parse_statement(self) -> BodyItem:
        t = self.cur.peek()
        if t is None:
            raise ParseError("unexpected end of input")
        if t.text == "{":
            start = self.cur.pos
            open_tok = self.cur.tokens[start]
            self.cur.expect("{")
            sid = self.new_stmt(StmtKind.BLOCK_ENTER, [open_tok], {})
            items: list[BodyItem] = []
            while not self.cur.at("}"):
                items.append(self.parse_statement())
            self.cur.expect("}")
            return BlockItem(sid, items)
        if self.at_type():
            return self.parse_decl()
        if t.text == "if":
            return self.parse_if()
        if t.text == "while":
            return self.parse_while()
        if t.text == "for":
            return self.parse_for()
        if t.text == "return":
            return self.parse_return()
        return self.parse_simple_stmt()

    def parse_decl(self) -> SimpleItem:
        start = self.cur.pos
        base, ptr = self.parse_type()
        name_tok = self.cur.next()
        if name_tok.kind != TokenKind.IDENT:
            raise ParseError("expected a variable name", name_tok)
        array = None
        if self.cur.at("["):
            self.cur.next()
            size_tok = self.cur.next()
            if size_tok.kind != TokenKind.NUMBER:
                raise ParseError("array size must be a number literal", size_tok)
            array = int(size_tok.text, 0)
            self.cur.expect("]")
        decl = VarDecl(name_tok.text, base, ptr, array)
        if decl.name in self.scope:
            raise ParseError(f"redeclaration of {decl.name!r}", name_tok)
        if decl.name in self.globals:
            raise ParseError(f"local {decl.name!r} shadows a global", name_tok)
        raw: dict = {"uses": set(), "derefs": set(), "calls": [], "writes": [], "guards": set()}
        rhs_tag, bound = "none", None
        if self.cur.at("="):
            self.cur.next()
            init = self.parse_expr()
            # the declared name enters scope after its initializer is analyzed
            self.analyze(init, raw, name_tok)
            rhs_tag, bound = self.rhs_class(init)
        self.scope[decl.name] = decl
        self.cur.expect(";")
        raw["writes"] = [Write(decl.name, False, rhs_tag, bound)]
        tokens = self.cur.tokens[start : self.cur.pos]
        sid = self.new_stmt(StmtKind.DECL, tokens, raw)
        return SimpleItem(sid)

    def parse_if(self) -> IfItem:
        start = self.cur.pos
        self.cur.expect("if")
        self.cur.expect("(")
        cond = self.parse_expr()
        self.cur.expect(")")
        tokens = self.cur.tokens[start : self.cur.pos]
        raw: dict = {"uses": set(), "derefs": set(), "calls": [], "writes": [], "guards": set()}
        self.analyze(cond, raw, tokens[0])
        raw["guards"] = self.null_guards(cond)
        sid = self.new_stmt(StmtKind.IF_COND, tokens, raw)
        then = self.parse_branch_body()
        orelse: list[BodyItem] = []
        if self.cur.at("else"):
            self.cur.next()
            orelse = self.parse_branch_body()
        return IfItem(sid, then, orelse)

    def parse_while(self) -> WhileItem:
        start = self.cur.pos
        self.cur.expect("while")
        self.cur.expect("(")
        cond = self.parse_expr()
        self.cur.expect(")")
        tokens = self.cur.tokens[start : self.cur.pos]
        raw: dict = {"uses": set(), "derefs": set(), "calls": [], "writes": [], "guards": set()}
        self.analyze(cond, raw, tokens[0])
        raw["guards"] = self.null_guards(cond)
        sid = self.new_stmt(StmtKind.WHILE_COND, tokens, raw)
        body = self.parse_branch_body()
        return WhileItem(sid, body)

    def parse_for(self) -> ForItem:
        start = self.cur.pos
        self.cur.expect("for")
        self.cur.expect("(")
        raw: dict = {"uses": set(), "derefs": set(), "calls": [], "writes": [], "guards": set()}
        if not self.cur.at(";"):
            self.parse_simple_into(raw)
        self.cur.expect(";")
        if not self.cur.at(";"):
            cond = self.parse_expr()
            self.analyze(cond, raw, self.cur.peek())
        self.cur.expect(";")
        if not self.cur.at(")"):
            self.parse_simple_into(raw)
        self.cur.expect(")")
        tokens = self.cur.tokens[start : self.cur.pos]
        sid = self.new_stmt(StmtKind.FOR_HEADER, tokens, raw)
        body = self.parse_branch_body()
        return ForItem(sid, body)

    def parse_return(self) -> SimpleItem:
        start = self.cur.pos
        ret_tok = self.cur.expect("return")
        raw: dict = {"uses": set(), "derefs": set(), "calls": [], "writes": [], "guards": set()}
        if not self.cur.at(";"):
            value = self.parse_expr()
            self.analyze(value, raw, ret_tok)
        self.cur.expect(";")
        tokens = self.cur.tokens[start : self.cur.pos]
        sid = self.new_stmt(StmtKind.RETURN, tokens, raw)
        return SimpleItem(sid)

    def parse_simple_stmt(self) -> SimpleItem:
        start = self.cur.pos
        raw: dict = {"uses": set(), "derefs": set(), "calls": [], "writes": [], "guards": set()}
        is_call = self.parse_simple_into(raw)
        self.cur.expect(";")
        tokens = self.cur.tokens[start : self.cur.pos]
        kind = StmtKind.CALL if is_call else StmtKind.ASSIGN
        sid = self.new_stmt(kind, tokens, raw)
        return SimpleItem(sid)

    def parse_simple_into(self, raw: dict) -> bool:
        """Parse an assignment / inc-dec / call expression; returns True for a bare call."""
        tok = self.cur.peek()
        if tok is not None and tok.kind == TokenKind.OPERATOR and tok.text in ("++", "--"):
            self.cur.next()
            target = self.cur.next()
            if target.kind != TokenKind.IDENT:
                raise ParseError("expected a variable after ++/--", target)
            self._require_var(target.text, target)
            raw["uses"].add(target.text)
            raw["writes"].append(Write(target.text, False, "other", None))
            return False
        expr = self.parse_unary()
        nxt = self.cur.peek()
        if nxt is not None and nxt.kind == TokenKind.OPERATOR and nxt.text in ("++", "--"):
            self.cur.next()
            if not isinstance(expr, Name):
                raise ParseError("++/-- target must be a variable", nxt)
            self._require_var(expr.name, nxt)
            raw["uses"].add(expr.name)
            raw["writes"].append(Write(expr.name, False, "other", None))
            return False
        if nxt is not None and nxt.kind == TokenKind.OPERATOR and nxt.text in (
            "=", "+=", "-=", "*=", "/=", "%=",
        ):
            op = self.cur.next().text
            rhs = self.parse_expr()
            self.analyze(rhs, raw, nxt)
            self._record_write(expr, op, rhs, raw, nxt)
            return False
        # plain expression statement: must be a call
        self.analyze(expr, raw, nxt)
        if not isinstance(expr, Call):
            raise ParseError("expression statement must be a call", nxt)
        return True

    def _record_write(self, lhs: Expr, op: str, rhs: Expr, raw: dict, tok: LexToken) -> None:
        rhs_tag, bound = self.rhs_class(rhs) if op == "=" else ("other", None)
        if isinstance(lhs, Name):
            self._require_var(lhs.name, tok)
            if op != "=":
                raw["uses"].add(lhs.name)
            raw["writes"].append(Write(lhs.name, False, rhs_tag, bound))
            return
        if isinstance(lhs, Unary) and lhs.op == "*" and isinstance(lhs.operand, Name):
            decl = self._require_var(lhs.operand.name, tok)
            raw["uses"].add(lhs.operand.name)
            if decl.is_pointer:
                raw["derefs"].add(lhs.operand.name)
            raw["writes"].append(Write(lhs.operand.name, True, rhs_tag, bound))
            return
        if isinstance(lhs, Index):
            decl = self._require_var(lhs.base, tok)
            raw["uses"].add(lhs.base)
            if decl.is_pointer:
                raw["derefs"].add(lhs.base)
            self.analyze(lhs.index, raw, tok)
            via_deref = not decl.is_array
            raw["writes"].append(Write(lhs.base, via_deref, rhs_tag, bound))
            return
        raise ParseError("invalid assignment target", tok)

    # -- def/use resolution (source-order pass) --

    def resolve(self) -> None:
        """Fill final defs/uses on every statement, resolving pointer writes."""
        bindings: dict[str, str] = {}
        for stmt, raw in zip(self.stmts, self._raw):
            defs: set[str] = set()
            uses: set[str] = set(raw["uses"])
            writes: list[Write] = []
            for w in raw["writes"]:
                decl = self._lookup(w.target)
                target = w.target
                if w.via_deref and decl is not None and decl.is_pointer:
                    target = bindings.get(w.target, w.target)
                writes.append(Write(target, w.via_deref, w.rhs, w.bound_to))
                defs.add(target)
                if not w.via_deref and decl is not None and decl.is_pointer:
                    if w.rhs in ("addr", "alias") and w.bound_to is not None:
                        bound_decl = self._lookup(w.bound_to)
                        if w.rhs == "addr" or (bound_decl is not None and bound_decl.is_array):
                            bindings[w.target] = w.bound_to
                        else:
                            bindings.pop(w.target, None)
                    else:
                        bindings.pop(w.target, None)
            callees = []
            for site in raw["calls"]:
                callees.append(site.callee)
                effect = LIBRARY_EFFECTS.get(site.callee, DEFAULT_EFFECT)
                for idx in effect.def_args:
                    if idx < len(site.arg_targets) and site.arg_targets[idx] is not None:
                        name = site.arg_targets[idx]
                        decl = self._lookup(name)
                        if decl is not None and decl.is_pointer:
                            name = bindings.get(name, name)
                        defs.add(name)
                        writes.append(Write(name, False, "libcall", None))
            stmt.defs = frozenset(defs)
            stmt.uses = frozenset(uses)
            stmt.callees = tuple(callees)
            stmt.calls = tuple(raw["calls"])
            stmt.derefs = frozenset(raw["derefs"])
            stmt.guards = frozenset(raw["guards"])
            stmt.writes = tuple(writes)


def parse(tokens: list[LexToken], source_id: str = "<memory>") -> TranslationUnit:
    """Parse a lexed mini-C file into a TranslationUnit."""
    cur = _Cursor(tokens)
    functions: list[FunctionAst] = []
    globals_: dict[str, VarDecl] = {}
    global_decls: list[GlobalDecl] = []
    names_seen: set[str] = set()
    while not cur.done():
        start = cur.pos
        head = cur.peek()
        if head is None or head.text not in TYPE_NAMES:
            raise ParseError("expected a declaration or function definition", head)
        cur.next()
        ptr = 0
        while cur.at("*"):
            cur.next()
            ptr += 1
        name_tok = cur.next()
        if name_tok.kind != TokenKind.IDENT:
            raise ParseError("expected a name", name_tok)
        if cur.at("("):
            if name_tok.text in names_seen:
                raise ParseError(f"duplicate function {name_tok.text!r}", name_tok)
            names_seen.add(name_tok.text)
            functions.append(
                _parse_function(cur, head.text, ptr, name_tok, globals_)
            )
        else:
            array = None
            if cur.at("["):
                cur.next()
                size_tok = cur.next()
                if size_tok.kind != TokenKind.NUMBER:
                    raise ParseError("array size must be a number literal", size_tok)
                array = int(size_tok.text, 0)
                cur.expect("]")
            if cur.at("="):
                cur.next()
                # global initializers are literals only
                lit = cur.next()
                if lit.kind not in (TokenKind.NUMBER, TokenKind.STRING, TokenKind.CHAR):
                    raise ParseError("global initializer must be a literal", lit)
            cur.expect(";")
            decl = VarDecl(name_tok.text, head.text, ptr, array)
            if decl.name in globals_:
                raise ParseError(f"redeclaration of global {decl.name!r}", name_tok)
            globals_[decl.name] = decl
            global_decls.append(
                GlobalDecl(decl, cur.tokens[start : cur.pos], head.line)
            )
    return TranslationUnit(functions, global_decls, source_id)


def _parse_function(
    cur: _Cursor,
    ret_base: str,
    ret_ptr: int,
    name_tok: LexToken,
    globals_: dict[str, VarDecl],
) -> FunctionAst:
    cur.expect("(")
    params: list[VarDecl] = []
    scope: dict[str, VarDecl] = {}
    if not cur.at(")"):
        if cur.at("void") and cur.peek(1) is not None and cur.peek(1).text == ")":
            cur.next()
        else:
            while True:
                t = cur.next()
                if t.text not in TYPE_NAMES:
                    raise ParseError("expected a parameter type", t)
                ptr = 0
                while cur.at("*"):
                    cur.next()
                    ptr += 1
                p_name = cur.next()
                if p_name.kind != TokenKind.IDENT:
                    raise ParseError("expected a parameter name", p_name)
                array = None
                if cur.at("["):
                    cur.next()
                    cur.expect("]")
                    ptr += 1  # array parameter decays to pointer
                decl = VarDecl(p_name.text, t.text, ptr, array)
                if decl.name in scope:
                    raise ParseError(f"duplicate parameter {decl.name!r}", p_name)
                if decl.name in globals_:
                    raise ParseError(f"parameter {decl.name!r} shadows a global", p_name)
                scope[decl.name] = decl
                params.append(decl)
                if cur.at(","):
                    cur.next()
                    continue
                break
    cur.expect(")")
    fp = _FunctionParser(cur, scope, globals_)
    body = fp.parse_body()
    fp.resolve()
    return FunctionAst(
        name=name_tok.text,
        params=params,
        ret_base=ret_base,
        ret_ptr=ret_ptr,
        body=body,
        stmts=fp.stmts,
        scope=scope,
        line=name_tok.line,
    )


def parse_source(source: str, source_id: str = "<memory>") -> TranslationUnit:
    return parse(lex(source), source_id)


def pretty_print(unit: TranslationUnit) -> str:
    """Render a unit back to parseable source, one statement per line."""
    out: list[str] = []
    for g in unit.globals:
        out.append(" ".join(t.text for t in g.tokens))
    for f in unit.functions:
        params = ", ".join(
            p.base + " " + "*" * p.ptr + p.name for p in f.params
        ) or "void"
        out.append(f"{f.ret_base} {'*' * f.ret_ptr}{f.name}({params}) {{")
        _pp_body(f, f.body, out, 1)
        out.append("}")
    return "\n".join(out) + "\n"


def _pp_body(f: FunctionAst, items: list[BodyItem], out: list[str], depth: int) -> None:
    pad = "    " * depth
    for item in items:
        if isinstance(item, SimpleItem):
            out.append(pad + f.stmts[item.stmt].text())
        elif isinstance(item, IfItem):
            out.append(pad + f.stmts[item.cond].text() + " {")
            _pp_body(f, item.then, out, depth + 1)
            if item.orelse:
                out.append(pad + "} else {")
                _pp_body(f, item.orelse, out, depth + 1)
            out.append(pad + "}")
        elif isinstance(item, WhileItem):
            out.append(pad + f.stmts[item.cond].text() + " {")
            _pp_body(f, item.body, out, depth + 1)
            out.append(pad + "}")
        elif isinstance(item, ForItem):
            out.append(pad + f.stmts[item.header].text() + " {")
            _pp_body(f, item.body, out, depth + 1)
            out.append(pad + "}")
        elif isinstance(item, BlockItem):
            out.append(pad + "{")
            _pp_body(f, item.body, out, depth + 1)
            out.append(pad + "}")


def _body_shape(f: FunctionAst, items: list[BodyItem]) -> tuple:
    shape = []
    for item in items:
        if isinstance(item, SimpleItem):
            shape.append(("s", _stmt_shape(f.stmts[item.stmt])))
        elif isinstance(item, IfItem):
            shape.append(
                (
                    "if",
                    _stmt_shape(f.stmts[item.cond]),
                    _body_shape(f, item.then),
                    _body_shape(f, item.orelse),
                )
            )
        elif isinstance(item, WhileItem):
            shape.append(("while", _stmt_shape(f.stmts[item.cond]), _body_shape(f, item.body)))
        elif isinstance(item, ForItem):
            shape.append(("for", _stmt_shape(f.stmts[item.header]), _body_shape(f, item.body)))
        elif isinstance(item, BlockItem):
            shape.append(("block", _body_shape(f, item.body)))
    return tuple(shape)


def _stmt_shape(s: Stmt) -> tuple:
    return (
        s.kind.value,
        tuple(t.text for t in s.tokens),
        tuple(sorted(s.defs)),
        tuple(sorted(s.uses)),
        s.callees,
    )


def structurally_equal(a: TranslationUnit, b: TranslationUnit) -> bool:
    """Equality up to source positions (lines/columns are ignored)."""
    if len(a.functions) != len(b.functions) or len(a.globals) != len(b.globals):
        return False
    for ga, gb in zip(a.globals, b.globals):
        if ga.decl != gb.decl:
            return False
        if [t.text for t in ga.tokens] != [t.text for t in gb.tokens]:
            return False
    for fa, fb in zip(a.functions, b.functions):
        if (fa.name, fa.params, fa.ret_base, fa.ret_ptr) != (
            fb.name,
            fb.params,
            fb.ret_base,
            fb.ret_ptr,
        ):
            return False
        if _body_shape(fa, fa.body) != _body_shape(fb, fb.body):
            return False
    return True
