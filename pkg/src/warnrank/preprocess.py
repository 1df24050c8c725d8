"""Token-level preprocessing: abstraction, tokenization, length fitting.

User identifiers become VARi/FUNCi symbols numbered by first occurrence
within one context; literals collapse to NUMBER_LIT/STRING_LIT/CHAR_LIT;
names on the standard-library allowlist survive verbatim. Fitted sequences
are exactly L tokens: short streams are tail-padded, long ones are truncated
around the reported statement one whole statement at a time, so a statement
is either fully present or fully absent.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .dependence import SystemDependenceGraph
from .minic.lexer import LexToken, TokenKind, lex
from .slicing import WarningContext, context_token_lists

PAD = "<pad>"
UNK = "<unk>"

NUMBER_LIT = "NUMBER_LIT"
STRING_LIT = "STRING_LIT"
CHAR_LIT = "CHAR_LIT"

_ABSTRACT_SYMBOL = re.compile(r"^(VAR|FUNC)\d+$")
_LITERAL_SYMBOLS = frozenset({NUMBER_LIT, STRING_LIT, CHAR_LIT})

DEFAULT_ALLOWLIST = frozenset(
    {
        "strcat", "strcpy", "strncpy", "sprintf", "snprintf", "memcpy", "memset",
        "malloc", "free", "strlen", "printf", "puts", "exit", "atoi",
    }
)


class CapacityError(Exception):
    pass


@dataclass
class AbstractionTable:
    var_map: dict[str, str]
    func_map: dict[str, str]
    allowlist: frozenset[str]


@dataclass
class PreprocessConfig:
    L_slice: int = 600
    L_stmt: int = 40
    abstraction_on: bool = True

    def __post_init__(self) -> None:
        if not (self.L_slice >= self.L_stmt >= 1):
            raise ValueError("require L_slice >= L_stmt >= 1")


@dataclass
class TokenSequence:
    tokens: list[str]
    mask: list[bool]
    stmt_spans: list[tuple[int, int]]
    length: int
    reported_span: int  # index into stmt_spans

    def real_tokens(self) -> list[str]:
        return [t for t, m in zip(self.tokens, self.mask) if m]


def abstract_token_lists(
    token_lists: Sequence[Sequence[LexToken]],
    known_functions: Iterable[str] = (),
    allowlist: frozenset[str] = DEFAULT_ALLOWLIST,
) -> tuple[list[str], AbstractionTable]:
    """Abstract one context's statements; returns texts and the symbol table."""
    known = set(known_functions)
    table = AbstractionTable(var_map={}, func_map={}, allowlist=allowlist)
    texts = []
    for tokens in token_lists:
        parts = []
        for i, tok in enumerate(tokens):
            nxt = tokens[i + 1].text if i + 1 < len(tokens) else ""
            parts.append(_abstract_token(tok, nxt, known, table))
        texts.append(" ".join(parts))
    return texts, table


def _abstract_token(
    tok: LexToken, next_text: str, known: set[str], table: AbstractionTable
) -> str:
    if tok.kind is TokenKind.NUMBER:
        return NUMBER_LIT
    if tok.kind is TokenKind.STRING:
        return STRING_LIT
    if tok.kind is TokenKind.CHAR:
        return CHAR_LIT
    if tok.kind is not TokenKind.IDENT:
        return tok.text
    text = tok.text
    if text in table.allowlist:
        return text
    if _ABSTRACT_SYMBOL.match(text) or text in _LITERAL_SYMBOLS or text in (PAD, UNK):
        return text  # already abstracted: abstraction is idempotent
    if text in known or next_text == "(":
        if text not in table.func_map:
            table.func_map[text] = f"FUNC{len(table.func_map) + 1}"
        return table.func_map[text]
    if text not in table.var_map:
        table.var_map[text] = f"VAR{len(table.var_map) + 1}"
    return table.var_map[text]


def abstract_context(
    sdg: SystemDependenceGraph,
    context: WarningContext,
    allowlist: frozenset[str] = DEFAULT_ALLOWLIST,
) -> tuple[list[str], AbstractionTable, int]:
    """Abstracted statement texts for a context, plus the reported index."""
    token_lists, reported_idx = context_token_lists(sdg, context)
    texts, table = abstract_token_lists(token_lists, sdg.functions.keys(), allowlist)
    return texts, table, reported_idx


def raw_context_texts(
    sdg: SystemDependenceGraph, context: WarningContext
) -> tuple[list[str], int]:
    token_lists, reported_idx = context_token_lists(sdg, context)
    return [" ".join(t.text for t in ts) for ts in token_lists], reported_idx


def tokenize_context(texts: Sequence[str]) -> tuple[list[str], list[tuple[int, int]]]:
    """Lex statement texts and concatenate, recording per-statement spans."""
    tokens: list[str] = []
    spans: list[tuple[int, int]] = []
    for text in texts:
        stmt_tokens = [t.text for t in lex(text)]
        spans.append((len(tokens), len(tokens) + len(stmt_tokens)))
        tokens.extend(stmt_tokens)
    return tokens, spans


def fit_length(
    tokens: Sequence[str],
    stmt_spans: Sequence[tuple[int, int]],
    reported_span_index: int,
    L: int,
) -> TokenSequence:
    """Fit to exactly L tokens, keeping whole statements around the reported one.

    When truncating, whole statements are added alternately left then right of
    the reported statement; a side stops at the first statement that no longer
    fits, and the tail is padded.
    """
    spans = list(stmt_spans)
    rep_start, rep_end = spans[reported_span_index]
    rep_len = rep_end - rep_start
    if rep_len > L:
        raise CapacityError(
            f"reported statement has {rep_len} tokens, exceeding capacity {L}"
        )
    total = sum(e - s for s, e in spans)
    if total <= L:
        selected = list(range(len(spans)))
    else:
        selected = [reported_span_index]
        budget = L - rep_len
        left = reported_span_index - 1
        right = reported_span_index + 1
        left_on = left >= 0
        right_on = right < len(spans)
        while left_on or right_on:
            if left_on:
                size = spans[left][1] - spans[left][0]
                if size <= budget:
                    selected.append(left)
                    budget -= size
                    left -= 1
                    left_on = left >= 0
                else:
                    left_on = False
            if right_on:
                size = spans[right][1] - spans[right][0]
                if size <= budget:
                    selected.append(right)
                    budget -= size
                    right += 1
                    right_on = right < len(spans)
                else:
                    right_on = False
        selected.sort()
    out_tokens: list[str] = []
    out_spans: list[tuple[int, int]] = []
    reported_out = 0
    for idx in selected:
        s, e = spans[idx]
        if idx == reported_span_index:
            reported_out = len(out_spans)
        out_spans.append((len(out_tokens), len(out_tokens) + (e - s)))
        out_tokens.extend(tokens[s:e])
    n_real = len(out_tokens)
    out_tokens.extend([PAD] * (L - n_real))
    mask = [True] * n_real + [False] * (L - n_real)
    return TokenSequence(out_tokens, mask, out_spans, L, reported_out)


@dataclass
class Vocabulary:
    token_to_id: dict[str, int]

    @property
    def size(self) -> int:
        return len(self.token_to_id)

    @property
    def pad_id(self) -> int:
        return self.token_to_id[PAD]

    @property
    def unk_id(self) -> int:
        return self.token_to_id[UNK]

    def encode(self, tokens: Iterable[str]) -> list[int]:
        unk = self.token_to_id[UNK]
        return [self.token_to_id.get(t, unk) for t in tokens]

    def to_json(self) -> dict:
        return {"token_to_id": self.token_to_id}

    @classmethod
    def from_json(cls, data: dict) -> "Vocabulary":
        return cls({str(k): int(v) for k, v in data["token_to_id"].items()})


def build_vocab(token_lists: Iterable[Sequence[str]]) -> Vocabulary:
    """Dense ids from training data only; <pad> is 0, <unk> is 1."""
    counts: dict[str, int] = {}
    for tokens in token_lists:
        for t in tokens:
            if t == PAD:
                continue
            counts[t] = counts.get(t, 0) + 1
    counts.pop(UNK, None)
    vocab = {PAD: 0, UNK: 1}
    for t in sorted(counts, key=lambda t: (-counts[t], t)):
        vocab[t] = len(vocab)
    return Vocabulary(vocab)


@dataclass
class PreparedWarning:
    warning_id: str
    label: Optional[str]
    context_seq: TokenSequence
    stmt_seq: TokenSequence


def prepare_context_sequences(
    sdg: SystemDependenceGraph,
    context: WarningContext,
    config: PreprocessConfig,
    allowlist: frozenset[str] = DEFAULT_ALLOWLIST,
) -> PreparedWarning:
    """Abstract (optionally), tokenize, and fit both model inputs for a warning."""
    if config.abstraction_on:
        texts, _table, reported_idx = abstract_context(sdg, context, allowlist)
    else:
        texts, reported_idx = raw_context_texts(sdg, context)
    tokens, spans = tokenize_context(texts)
    context_seq = fit_length(tokens, spans, reported_idx, config.L_slice)
    rep_s, rep_e = spans[reported_idx]
    stmt_tokens = tokens[rep_s:rep_e]
    stmt_seq = fit_length(stmt_tokens, [(0, len(stmt_tokens))], 0, config.L_stmt)
    return PreparedWarning(
        warning_id=context.warning.id,
        label=context.warning.label,
        context_seq=context_seq,
        stmt_seq=stmt_seq,
    )


# --- prepared-dataset cache ---------------------------------------------------

CACHE_FORMAT = "warnrank-prepared"
CACHE_VERSION = 1


def write_prepared(
    path: str | Path,
    prepared: Sequence[PreparedWarning],
    config: PreprocessConfig,
    mode: str,
    corpus_hash: str,
) -> None:
    """Line-delimited cache: a header line, then one record per warning."""
    header = {
        "format": CACHE_FORMAT,
        "version": CACHE_VERSION,
        "mode": mode,
        "corpus_hash": corpus_hash,
        "config": {
            "L_slice": config.L_slice,
            "L_stmt": config.L_stmt,
            "abstraction_on": config.abstraction_on,
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for p in prepared:
            rec = {
                "id": p.warning_id,
                "label": p.label,
                "context_tokens": p.context_seq.tokens,
                "context_spans": p.context_seq.stmt_spans,
                "context_reported": p.context_seq.reported_span,
                "stmt_tokens": p.stmt_seq.tokens,
            }
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def read_prepared(path: str | Path) -> tuple[dict, list[PreparedWarning]]:
    with open(path, encoding="utf-8") as fh:
        header = json.loads(fh.readline())
        if header.get("format") != CACHE_FORMAT or header.get("version") != CACHE_VERSION:
            raise ValueError(f"not a {CACHE_FORMAT} v{CACHE_VERSION} file: {path}")
        out = []
        for raw in fh:
            rec = json.loads(raw)
            ctx_tokens = rec["context_tokens"]
            ctx_mask = [t != PAD for t in ctx_tokens]
            stmt_tokens = rec["stmt_tokens"]
            stmt_mask = [t != PAD for t in stmt_tokens]
            out.append(
                PreparedWarning(
                    warning_id=rec["id"],
                    label=rec["label"],
                    context_seq=TokenSequence(
                        ctx_tokens,
                        ctx_mask,
                        [tuple(s) for s in rec["context_spans"]],
                        len(ctx_tokens),
                        rec["context_reported"],
                    ),
                    stmt_seq=TokenSequence(
                        stmt_tokens,
                        stmt_mask,
                        [(0, sum(stmt_mask))],
                        len(stmt_tokens),
                        0,
                    ),
                )
            )
    return header, out
