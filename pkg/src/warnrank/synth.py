"""Planted-pattern corpus generator.

Emits mini-C projects whose detector warnings carry known TP/FP labels. The
label-deciding evidence lives in the warning's dependence slice (guards,
helper-function bodies, loop bounds) rather than in surface tokens next to
the reported statement; several families put the evidence in another
function entirely, so whole-function contexts cannot separate them.

Each site is one caller function holding exactly one detector hit, plus an
optional helper. Warnings are derived by actually running the detectors on
the generated sources, so the dataset is consistent with detector output by
construction.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .minic.parser import parse_source
from .warnings_io import (
    Dataset,
    KIND_BO,
    KIND_NPD,
    Warning,
    detect_all,
    save_manifest,
    save_warnings,
)

_THEMES = [
    ("net", ["sock", "pkt", "conn", "addr", "route", "frame", "host", "link"],
     ["link up", "socket closed", "route added", "frame sent"]),
    ("ui", ["widget", "panel", "label", "icon", "menu", "font", "view", "pane"],
     ["panel drawn", "icon loaded", "menu open", "view resized"]),
    ("db", ["row", "query", "table", "cursor", "txn", "page", "cache", "key"],
     ["row stored", "query ran", "txn commit", "page flushed"]),
    ("fs", ["inode", "path", "mount", "block", "dirent", "super", "extent", "log"],
     ["mount ok", "block read", "path walked", "log synced"]),
    ("gfx", ["pixel", "shader", "mesh", "texture", "sprite", "layer", "tile", "pal"],
     ["mesh built", "tile drawn", "layer merged", "sprite moved"]),
    ("aud", ["sample", "mixer", "codec", "chan", "voice", "gain", "tone", "clip"],
     ["clip played", "gain set", "codec init", "voice on"]),
    ("sched", ["task", "tick", "slot", "queue", "timer", "job", "worker", "lane"],
     ["task run", "tick seen", "job queued", "timer armed"]),
    ("sensor", ["probe", "gauge", "reading", "unit", "axis", "range", "pulse", "node"],
     ["probe read", "axis moved", "pulse sent", "range set"]),
    ("mail", ["msg", "inbox", "folder", "draft", "header", "body", "attach", "tag"],
     ["msg sent", "draft saved", "inbox read", "tag added"]),
    ("geo", ["point", "track", "region", "tile2", "coord", "zone", "marker", "grid"],
     ["point set", "zone hit", "track saved", "grid drawn"]),
]

_VERBS = ["emit", "scan", "apply", "update", "handle", "process", "flush", "merge"]

# Families whose deciding evidence sits outside the caller get more weight so
# whole-function contexts stay genuinely weaker than slices.
TP_FAMILIES = ["bo_cross", "bo_intra", "bo_loop", "npd_malloc", "npd_guard_helper", "npd_null"]
TP_WEIGHTS = [32, 12, 12, 8, 32, 4]
FP_FAMILIES = ["bo_cross", "bo_intra", "bo_loop", "npd_malloc", "npd_guard_helper"]
FP_WEIGHTS = [35, 12, 12, 6, 35]


@dataclass
class Site:
    family: str
    label: str
    kind: str
    caller: str
    helper: Optional[str]
    marker_function: str
    marker_text: str
    file: str = ""


@dataclass
class SynthResult:
    files: dict[str, str]  # corpus-relative path -> source text
    dataset: Dataset
    sites: list[Site]


class _Namer:
    def __init__(self, rng: random.Random, theme_idx: int):
        self.rng = rng
        self.prefix, self.words, self.phrases = _THEMES[theme_idx % len(_THEMES)]
        self.used_fns: set[str] = set()
        self.uid = 0

    def fn(self, verb: str) -> str:
        word = self.rng.choice(self.words)
        name = f"{self.prefix}_{verb}_{word}"
        while name in self.used_fns:
            self.uid += 1
            name = f"{self.prefix}_{verb}_{word}{self.uid}"
        self.used_fns.add(name)
        return name

    def global_name(self) -> str:
        while True:
            name = f"{self.prefix}_pool{self.rng.randint(10, 999)}"
            if name not in self.used_fns:
                self.used_fns.add(name)
                return name

    def var(self, used: set[str]) -> str:
        while True:
            word = self.rng.choice(self.words)
            name = f"{word}_{self.rng.choice(['len', 'buf', 'cnt', 'val', 'ptr', 'tmp', 'idx', 'sz'])}"
            if name not in used:
                used.add(name)
                return name

    def phrase(self) -> str:
        return self.rng.choice(self.phrases)


@dataclass
class _Fn:
    header: str
    lines: list[str] = field(default_factory=list)

    def text(self) -> str:
        body = "\n".join("    " + ln for ln in self.lines)
        return f"{self.header} {{\n{body}\n}}\n"


def _fillers(nm: _Namer, rng: random.Random, param: str, used: set[str]) -> tuple[list[str], list[str]]:
    """Returns (decl lines, statement lines) of detector-neutral noise."""
    decls, stmts = [], []
    for _ in range(rng.randint(0, 2)):
        v = nm.var(used)
        decls.append(f"int {v};")
        stmts.append(f"{v} = {param} * {rng.randint(2, 9)};")
        if rng.random() < 0.6:
            stmts.append(f'printf("{nm.phrase()} %d", {v});')
    if rng.random() < 0.5:
        stmts.append(f'printf("{nm.phrase()} %d", {param});')
    return decls, stmts


def _site_bo_cross(
    nm: _Namer, rng: random.Random, label: str, style: dict
) -> tuple[list[str], list[_Fn], Site]:
    used: set[str] = set()
    buf, s, n = nm.var(used), nm.var(used), "n"
    globals_: list[str] = []
    # buffer size is irrelevant here (growth is unbounded for TP, tiny for FP),
    # so it follows the project's label-correlated style: a decoy signal that
    # flips meaning across projects unless literals are abstracted away
    bufsize = rng.choice(style["tp_sizes"] if label == "TP" else style["fp_sizes"])
    if label == "TP":
        helper = nm.fn("grow")
        g = nm.global_name()
        globals_.append(f"char {g}[512];")
        i = nm.var(used)
        h = _Fn(f"char *{helper}(int m)")
        h.lines = [
            f"int {i};",
            f"for ({i} = 0; {i} < m; {i}++) {{",
            f"    {g}[{i}] = 'x';",
            "}",
            f"{g}[m] = '\\0';",
            f"return {g};",
        ]
        marker = (helper, f"for ( {i} = 0")
    else:
        helper = nm.fn("tag")
        h = _Fn(f"char *{helper}(int m)")
        lits = rng.sample(["up", "dn", "ok", "on", "off", "hi"], 3)
        h.lines = [
            "if (m == 0) {",
            f'    return "{lits[0]}";',
            "}",
            "if (m == 1) {",
            f'    return "{lits[1]}";',
            "}",
            f'return "{lits[2]}";',
        ]
        marker = (helper, "return")
    caller = nm.fn(rng.choice(_VERBS))
    fd, fs = _fillers(nm, rng, n, used)
    core = [
        f"char {buf}[{bufsize}];",
        f"char *{s};",
        *fd,
        f"{buf}[0] = '\\0';",
        f"{s} = {helper}({n});",
        *fs,
        f"strcat({buf}, {s});",
        f"puts({buf});",
    ]
    c = _Fn(f"void {caller}(int {n})")
    c.lines = core
    site = Site("bo_cross", label, KIND_BO, caller, helper, marker[0], marker[1])
    return globals_, [h, c], site


def _site_bo_intra(
    nm: _Namer, rng: random.Random, label: str, style: dict
) -> tuple[list[str], list[_Fn], Site]:
    used: set[str] = set()
    buf, src, m = nm.var(used), nm.var(used), "m"
    caller = nm.fn(rng.choice(_VERBS))
    fd, fs = _fillers(nm, rng, m, used)
    if label == "TP":
        bufsize = rng.choice([8, 12])
        lit = "x" * rng.randint(bufsize + 4, bufsize + 16)
        guard = f"if ({m} > {rng.randint(0, 3)}) {{"
        marker = (caller, f'"{lit}"')
    else:
        bufsize = rng.choice([24, 32])
        lit = "y" * rng.randint(3, 8)
        guard = f"if (strlen({src}) + 1 < {bufsize}) {{"
        marker = (caller, "strlen")
    core = [
        f"char {buf}[{bufsize}];",
        f"char *{src};",
        *fd,
        f'{src} = "{lit}";',
        guard,
        f"    strcpy({buf}, {src});",
        "}",
        f"puts({buf});",
    ]
    c = _Fn(f"void {caller}(int {m})")
    c.lines = core + fs
    site = Site("bo_intra", label, KIND_BO, caller, None, marker[0], marker[1])
    return [], [c], site


def _site_bo_loop(
    nm: _Namer, rng: random.Random, label: str, style: dict
) -> tuple[list[str], list[_Fn], Site]:
    used: set[str] = set()
    buf, i, m = nm.var(used), nm.var(used), "m"
    chunk = rng.choice(["ab", "zz", "..", "xy"])
    caller = nm.fn(rng.choice(_VERBS))
    fd, fs = _fillers(nm, rng, m, used)
    if label == "TP":
        bufsize = rng.choice([8, 12, 16])
        loop_head = f"while ({i} < {m}) {{"
        marker = (caller, f"while ( {i} < {m}")
    else:
        bound = rng.randint(2, 4)
        bufsize = bound * 2 + rng.choice([8, 12])
        loop_head = f"while ({i} < {bound}) {{"
        marker = (caller, f"while ( {i} <")
    core = [
        f"char {buf}[{bufsize}];",
        f"int {i};",
        *fd,
        f"{buf}[0] = '\\0';",
        f"{i} = 0;",
        loop_head,
        f'    strcat({buf}, "{chunk}");',
        f"    {i}++;",
        "}",
        f"puts({buf});",
    ]
    c = _Fn(f"void {caller}(int {m})")
    c.lines = core + fs
    site = Site("bo_loop", label, KIND_BO, caller, None, marker[0], marker[1])
    return [], [c], site


def _site_npd_malloc(
    nm: _Namer, rng: random.Random, label: str, style: dict
) -> tuple[list[str], list[_Fn], Site]:
    used: set[str] = set()
    p, v = nm.var(used), "v"
    caller = nm.fn(rng.choice(_VERBS))
    fd, fs = _fillers(nm, rng, v, used)
    size = rng.choice(style["tp_sizes"] if label == "TP" else style["fp_sizes"])
    if label == "FP":
        ok = nm.var(used)
        core = [
            f"int *{p};",
            f"int {ok};",
            *fd,
            f"{p} = malloc({size});",
            f"{ok} = ({p} != NULL);",
            f"if ({ok}) {{",
            f"    *{p} = {v};",
            "}",
        ]
        marker = (caller, "!= NULL")
    else:
        core = [
            f"int *{p};",
            *fd,
            f"{p} = malloc({size});",
            f"if ({v} > {rng.randint(0, 3)}) {{",
            f"    *{p} = {v};",
            "}",
        ]
        marker = (caller, "malloc")
    c = _Fn(f"void {caller}(int {v})")
    c.lines = core + fs
    site = Site("npd_malloc", label, KIND_NPD, caller, None, marker[0], marker[1])
    return [], [c], site


def _site_npd_guard_helper(
    nm: _Namer, rng: random.Random, label: str, style: dict
) -> tuple[list[str], list[_Fn], Site]:
    used: set[str] = set()
    p, v = nm.var(used), "v"
    caller = nm.fn(rng.choice(_VERBS))
    size = rng.choice(style["tp_sizes"] if label == "TP" else style["fp_sizes"])
    helper = nm.fn("vet")
    h = _Fn(f"int {helper}(int *q)")
    if label == "FP":
        h.lines = [
            "if (q == NULL) {",
            "    return 0;",
            "}",
            "return 1;",
        ]
        marker = (helper, "NULL")
    else:
        # same caller shape, but the vet helper never actually checks for null
        h.lines = [
            f'puts("{nm.phrase()}");',
            "return 1;",
        ]
        marker = (caller, "malloc")
    fd, fs = _fillers(nm, rng, v, used)
    core = [
        f"int *{p};",
        *fd,
        f"{p} = malloc({size});",
        f"if ({helper}({p})) {{",
        f"    *{p} = {v};",
        "}",
    ]
    c = _Fn(f"void {caller}(int {v})")
    c.lines = core + fs
    site = Site("npd_guard_helper", label, KIND_NPD, caller, helper, marker[0], marker[1])
    return [], [h, c], site


def _site_npd_null(
    nm: _Namer, rng: random.Random, label: str, style: dict
) -> tuple[list[str], list[_Fn], Site]:
    used: set[str] = set()
    p, v = nm.var(used), "v"
    caller = nm.fn(rng.choice(_VERBS))
    fd, fs = _fillers(nm, rng, v, used)
    core = [
        f"int *{p};",
        *fd,
        f"{p} = NULL;",
        f"*{p} = {v};",
    ]
    c = _Fn(f"void {caller}(int {v})")
    c.lines = core + fs
    site = Site("npd_null", label, KIND_NPD, caller, None, caller, "NULL ;")
    return [], [c], site


_BUILDERS = {
    "bo_cross": _site_bo_cross,
    "bo_intra": _site_bo_intra,
    "bo_loop": _site_bo_loop,
    "npd_malloc": _site_npd_malloc,
    "npd_guard_helper": _site_npd_guard_helper,
    "npd_null": _site_npd_null,
}

SITES_PER_FILE = 6


def synthesize_corpus(
    seed: int,
    n_projects: int = 6,
    tp_rate: float = 0.3,
    sites_per_project: int = 16,
) -> SynthResult:
    """Generate a labeled corpus; deterministic byte-for-byte given the seed."""
    if not 0.0 < tp_rate < 1.0:
        raise ValueError("tp_rate must be strictly between 0 and 1")
    rng = random.Random(seed)
    files: dict[str, str] = {}
    project_of: dict[str, str] = {}
    sites: list[Site] = []

    size_pools = ([8, 12, 16], [24, 32, 48])
    for proj_idx in range(n_projects):
        project = f"proj_{_THEMES[proj_idx % len(_THEMES)][0]}{proj_idx}"
        nm = _Namer(rng, proj_idx)
        # label-correlated size style flips between projects, so raw literal
        # sizes are a within-project shortcut that misleads across projects
        flip = rng.random() < 0.5
        style = {
            "tp_sizes": size_pools[0] if flip else size_pools[1],
            "fp_sizes": size_pools[1] if flip else size_pools[0],
        }
        pending: list[tuple[list[str], list[_Fn], Site]] = []
        for _ in range(sites_per_project):
            label = "TP" if rng.random() < tp_rate else "FP"
            if label == "TP":
                family = rng.choices(TP_FAMILIES, weights=TP_WEIGHTS, k=1)[0]
            else:
                family = rng.choices(FP_FAMILIES, weights=FP_WEIGHTS, k=1)[0]
            pending.append(_BUILDERS[family](nm, rng, label, style))
        for chunk_idx in range(0, len(pending), SITES_PER_FILE):
            chunk = pending[chunk_idx : chunk_idx + SITES_PER_FILE]
            rel = f"{project}/unit_{chunk_idx // SITES_PER_FILE}.mc"
            parts: list[str] = []
            for globals_, _fns, _site in chunk:
                parts.extend(globals_)
            for _globals, fns, site in chunk:
                for fn in fns:
                    parts.append(fn.text())
                site.file = rel
                sites.append(site)
            files[rel] = "\n".join(parts) + "\n"
            project_of[rel] = project

    dataset = _derive_dataset(files, project_of, sites)
    return SynthResult(files=files, dataset=dataset, sites=sites)


def _derive_dataset(
    files: dict[str, str], project_of: dict[str, str], sites: list[Site]
) -> Dataset:
    """Run the detectors over the generated sources and attach planted labels."""
    label_of_fn = {s.caller: (s.kind, s.label) for s in sites}
    site_fns = set(label_of_fn)
    warnings: list[Warning] = []
    hits_per_fn: dict[str, int] = {}
    for rel in sorted(files):
        unit = parse_source(files[rel], source_id=rel)
        for w in detect_all(unit):
            if w.function not in site_fns:
                raise AssertionError(
                    f"unplanned warning in helper/filler function {w.function!r} ({rel})"
                )
            kind, label = label_of_fn[w.function]
            if w.kind != kind:
                raise AssertionError(
                    f"site {w.function!r} tripped the {w.kind} detector, expected {kind}"
                )
            hits_per_fn[w.function] = hits_per_fn.get(w.function, 0) + 1
            warnings.append(
                Warning(
                    id=w.id,
                    file=w.file,
                    function=w.function,
                    line=w.line,
                    kind=w.kind,
                    detector=w.detector,
                    label=label,
                )
            )
    missing = site_fns - set(hits_per_fn)
    doubled = {fn for fn, c in hits_per_fn.items() if c != 1}
    if missing or doubled:
        raise AssertionError(f"sites without exactly one warning: {missing | doubled}")
    return Dataset(warnings, project_of)


def write_corpus(result: SynthResult, out_dir: str | Path) -> None:
    """Write .mc files, manifest.json, and warnings.jsonl under out_dir."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for rel, text in sorted(result.files.items()):
        path = out_dir / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    save_manifest(result.dataset.project_of, out_dir / "manifest.json")
    save_warnings(result.dataset, out_dir / "warnings.jsonl")
