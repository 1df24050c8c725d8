"""Warning generation and ingestion.

Two toy detectors stand in for real static-analysis tools: a buffer-overflow
rule that flags every risky buffer call, and a null-dereference rule that
flags dereferences whose most recent intra-procedural definition is a literal
NULL or an unchecked malloc result. Externally produced warnings are ingested
from line-delimited JSON.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .minic.parser import StmtKind, TranslationUnit, parse_source

KIND_BO = "BO"
KIND_NPD = "NPD"
KINDS = (KIND_BO, KIND_NPD)
LABELS = ("TP", "FP")

RISKY_BUFFER_CALLS = frozenset({"strcat", "strcpy", "sprintf", "memcpy"})

BO_DETECTOR = "risky-buffer-call"
NPD_DETECTOR = "unchecked-deref"


class SchemaError(Exception):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class DuplicateWarning(Exception):
    pass


@dataclass(frozen=True)
class Warning:
    id: str
    file: str
    function: str
    line: int
    kind: str
    detector: str
    label: Optional[str] = None

    @property
    def key(self) -> tuple[str, int, str, str]:
        return (self.file, self.line, self.kind, self.detector)


@dataclass
class Dataset:
    warnings: list[Warning]
    project_of: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        seen: set[tuple] = set()
        for w in self.warnings:
            if w.key in seen:
                raise DuplicateWarning(f"duplicate warning key {w.key}")
            seen.add(w.key)

    def project(self, warning: Warning) -> str:
        return self.project_of.get(warning.file, "")

    def labeled(self) -> bool:
        return all(w.label is not None for w in self.warnings)


def _warning_id(file: str, line: int, kind: str, detector: str) -> str:
    return f"{file}:{line}:{kind}:{detector}"


def detect_bo(unit: TranslationUnit) -> list[Warning]:
    """Flag every statement calling into the risky buffer API."""
    out = []
    for f in unit.functions:
        for s in f.stmts:
            if any(c in RISKY_BUFFER_CALLS for c in s.callees):
                out.append(
                    Warning(
                        id=_warning_id(unit.source_id, s.line, KIND_BO, BO_DETECTOR),
                        file=unit.source_id,
                        function=f.name,
                        line=s.line,
                        kind=KIND_BO,
                        detector=BO_DETECTOR,
                    )
                )
    return out


def detect_npd(unit: TranslationUnit) -> list[Warning]:
    """Flag dereferences of pointers last defined as NULL or unchecked malloc.

    The scan is linear over source order: a direct null test (`if (p)`,
    `p != NULL`, `p == NULL`, `!p`) clears the pointer; indirect checks do
    not, which is exactly the imprecision that produces rankable FPs.
    """
    out = []
    for f in unit.functions:
        state: dict[str, str] = {}
        flagged_lines: set[int] = set()
        for s in f.stmts:
            if s.kind in (StmtKind.IF_COND, StmtKind.WHILE_COND):
                for v in s.guards:
                    state.pop(v, None)
            for p in sorted(s.derefs):
                if state.get(p) in ("null", "malloc") and s.line not in flagged_lines:
                    flagged_lines.add(s.line)
                    out.append(
                        Warning(
                            id=_warning_id(unit.source_id, s.line, KIND_NPD, NPD_DETECTOR),
                            file=unit.source_id,
                            function=f.name,
                            line=s.line,
                            kind=KIND_NPD,
                            detector=NPD_DETECTOR,
                        )
                    )
            for w in s.writes:
                if w.via_deref or w.rhs == "libcall":
                    continue
                if w.rhs == "null":
                    state[w.target] = "null"
                elif w.rhs == "malloc":
                    state[w.target] = "malloc"
                else:
                    state.pop(w.target, None)
    return out


def detect_all(unit: TranslationUnit) -> list[Warning]:
    return detect_bo(unit) + detect_npd(unit)


_REQUIRED_FIELDS = ("id", "file", "function", "line", "kind", "detector")


def load_warnings(path: str | Path, project_of: Optional[dict[str, str]] = None) -> Dataset:
    """Read a .jsonl warning file; labels are normalized to uppercase TP/FP."""
    warnings: list[Warning] = []
    seen_keys: set[tuple] = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"invalid JSON ({exc.msg})", line_no) from exc
            if not isinstance(obj, dict):
                raise SchemaError("record must be a JSON object", line_no)
            for f_name in _REQUIRED_FIELDS:
                if f_name not in obj:
                    raise SchemaError(f"missing field {f_name!r}", line_no)
            if not isinstance(obj["line"], int) or obj["line"] < 1:
                raise SchemaError("field 'line' must be a positive integer", line_no)
            if obj["kind"] not in KINDS:
                raise SchemaError(f"unknown kind {obj['kind']!r}", line_no)
            label = obj.get("label")
            if label is not None:
                if not isinstance(label, str) or label.upper() not in LABELS:
                    raise SchemaError(f"label must be TP or FP, got {label!r}", line_no)
                label = label.upper()
            w = Warning(
                id=str(obj["id"]),
                file=str(obj["file"]),
                function=str(obj["function"]),
                line=obj["line"],
                kind=obj["kind"],
                detector=str(obj["detector"]),
                label=label,
            )
            if w.key in seen_keys:
                raise DuplicateWarning(f"line {line_no}: duplicate warning key {w.key}")
            seen_keys.add(w.key)
            warnings.append(w)
    return Dataset(warnings, dict(project_of or {}))


def save_warnings(dataset: Dataset, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for w in dataset.warnings:
            rec = dataclasses.asdict(w)
            if rec["label"] is None:
                del rec["label"]
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def load_manifest(path: str | Path) -> dict[str, str]:
    """Corpus manifest: maps corpus-relative file paths to project names."""
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    return {entry["path"]: entry["project"] for entry in data["files"]}


def save_manifest(project_of: dict[str, str], path: str | Path) -> None:
    files = [{"path": p, "project": project_of[p]} for p in sorted(project_of)]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"files": files}, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_corpus(corpus_dir: str | Path) -> tuple[list[TranslationUnit], dict[str, str]]:
    """Parse every manifest-listed file; source ids are corpus-relative paths."""
    corpus_dir = Path(corpus_dir)
    project_of = load_manifest(corpus_dir / "manifest.json")
    units = []
    for rel in sorted(project_of):
        text = (corpus_dir / rel).read_text(encoding="utf-8")
        units.append(parse_source(text, source_id=rel))
    return units, project_of
