from .lexer import LexToken, TokenKind, LexError, lex, detokenize
from .parser import (
    CallSite,
    FunctionAst,
    GlobalDecl,
    LIBRARY_EFFECTS,
    ParseError,
    Stmt,
    StmtKind,
    TranslationUnit,
    VarDecl,
    Write,
    parse,
    parse_source,
    pretty_print,
    structurally_equal,
)
from .cfg import ENTRY, EXIT, Cfg, CfgError, build_cfg

__all__ = [
    "ENTRY",
    "EXIT",
    "CallSite",
    "Cfg",
    "CfgError",
    "FunctionAst",
    "GlobalDecl",
    "LIBRARY_EFFECTS",
    "LexError",
    "LexToken",
    "ParseError",
    "Stmt",
    "StmtKind",
    "TokenKind",
    "TranslationUnit",
    "VarDecl",
    "Write",
    "build_cfg",
    "detokenize",
    "lex",
    "parse",
    "parse_source",
    "pretty_print",
    "structurally_equal",
]
