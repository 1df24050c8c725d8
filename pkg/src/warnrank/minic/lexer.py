"""Lexer for the mini-C corpus language.

Tokens are identifiers, keywords, number/string/char literals, operators, and
punctuation. Comments and whitespace are dropped; every token carries its
1-based source position.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

KEYWORDS = frozenset({"int", "char", "void", "if", "else", "while", "for", "return", "NULL"})

# Longest-match first.
OPERATORS = [
    "<<=", ">>=",
    "==", "!=", "<=", ">=", "&&", "||", "<<", ">>",
    "+=", "-=", "*=", "/=", "%=", "++", "--", "->",
    "=", "<", ">", "+", "-", "*", "/", "%", "!", "&", "|", "^", "~", "?", ":", ".",
]

PUNCTUATION = frozenset("(){}[],;")


class TokenKind(Enum):
    IDENT = "identifier"
    KEYWORD = "keyword"
    NUMBER = "number-literal"
    STRING = "string-literal"
    CHAR = "char-literal"
    OPERATOR = "operator"
    PUNCT = "punctuation"


@dataclass(frozen=True)
class LexToken:
    kind: TokenKind
    text: str
    line: int
    col: int


class LexError(Exception):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{message} at line {line}, col {col}")
        self.line = line
        self.col = col


def _is_ident_start(c: str) -> bool:
    return c.isalpha() or c == "_"


def _is_ident_char(c: str) -> bool:
    return c.isalnum() or c == "_"


def lex(source: str) -> list[LexToken]:
    """Tokenize source text, dropping comments and whitespace."""
    tokens: list[LexToken] = []
    i = 0
    line = 1
    col = 1
    n = len(source)

    def advance(text: str) -> None:
        nonlocal i, line, col
        for c in text:
            i += 1
            if c == "\n":
                line += 1
                col = 1
            else:
                col += 1

    while i < n:
        c = source[i]
        if c in " \t\r\n":
            advance(c)
            continue
        if source.startswith("//", i):
            j = source.find("\n", i)
            j = n if j < 0 else j
            advance(source[i:j])
            continue
        if source.startswith("/*", i):
            j = source.find("*/", i + 2)
            if j < 0:
                raise LexError("unterminated block comment", line, col)
            advance(source[i : j + 2])
            continue
        start_line, start_col = line, col
        if _is_ident_start(c):
            j = i
            while j < n and _is_ident_char(source[j]):
                j += 1
            text = source[i:j]
            kind = TokenKind.KEYWORD if text in KEYWORDS else TokenKind.IDENT
            tokens.append(LexToken(kind, text, start_line, start_col))
            advance(text)
            continue
        if c.isdigit():
            j = i
            if source.startswith("0x", i) or source.startswith("0X", i):
                j = i + 2
                while j < n and source[j] in "0123456789abcdefABCDEF":
                    j += 1
            else:
                while j < n and source[j].isdigit():
                    j += 1
            tokens.append(LexToken(TokenKind.NUMBER, source[i:j], start_line, start_col))
            advance(source[i:j])
            continue
        if c == '"' or c == "'":
            quote = c
            j = i + 1
            while j < n and source[j] != quote:
                if source[j] == "\\":
                    j += 1
                if source[j] == "\n":
                    raise LexError("unterminated literal", start_line, start_col)
                j += 1
            if j >= n:
                raise LexError("unterminated literal", start_line, start_col)
            text = source[i : j + 1]
            kind = TokenKind.STRING if quote == '"' else TokenKind.CHAR
            tokens.append(LexToken(kind, text, start_line, start_col))
            advance(text)
            continue
        if c in PUNCTUATION:
            tokens.append(LexToken(TokenKind.PUNCT, c, start_line, start_col))
            advance(c)
            continue
        for op in OPERATORS:
            if source.startswith(op, i):
                tokens.append(LexToken(TokenKind.OPERATOR, op, start_line, start_col))
                advance(op)
                break
        else:
            raise LexError(f"unrecognized character {c!r}", line, col)
    return tokens


def detokenize(tokens: list[LexToken]) -> str:
    """Join token texts with single spaces; lexing the result reproduces the tokens."""
    return " ".join(t.text for t in tokens)
