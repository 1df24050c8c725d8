"""Ranked-list evaluation: Top-k% precision/recall and stratified folds.

Warnings are sorted by descending TP score with ties broken by ascending
warning id. The Top-k% head holds ceil(k% of N) entries, so any k >= 1%
yields a non-empty head. Fold assignment is label-stratified (optionally per
project) and deterministic given the seed.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Optional, Sequence

from .warnings_io import Dataset

K_GRID = (1, 5, 10, 20, 30, 40, 50, 60)


class EmptyList(Exception):
    pass


class NoActualTPs(Exception):
    pass


class TooFewSamples(Exception):
    pass


@dataclass
class RankedList:
    entries: list[tuple[str, float]]  # (warning id, p_tp), descending score

    def ids(self) -> list[str]:
        return [wid for wid, _ in self.entries]


def rank(scores: Mapping[str, float]) -> RankedList:
    """Descending by score; equal scores fall back to ascending warning id."""
    for wid, s in scores.items():
        if not (0.0 <= s <= 1.0) or s != s:
            raise ValueError(f"score for {wid!r} must be a finite value in [0, 1]")
    entries = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
    return RankedList(entries)


def _head_size(n: int, k_percent: float) -> int:
    return math.ceil(Fraction(k_percent) * n / 100)


def precision_at_k(
    ranked: RankedList, labels: Mapping[str, str], k_percent: float
) -> float:
    """TPs in the Top-k% head divided by the head size."""
    if not ranked.entries:
        raise EmptyList("cannot evaluate an empty ranked list")
    if not 0 < k_percent <= 100:
        raise ValueError("k_percent must lie in (0, 100]")
    head = _head_size(len(ranked.entries), k_percent)
    hits = sum(1 for wid, _ in ranked.entries[:head] if labels[wid] == "TP")
    return hits / head


def recall_at_k(ranked: RankedList, labels: Mapping[str, str], k_percent: float) -> float:
    """TPs in the Top-k% head divided by all actual TPs."""
    if not ranked.entries:
        raise EmptyList("cannot evaluate an empty ranked list")
    if not 0 < k_percent <= 100:
        raise ValueError("k_percent must lie in (0, 100]")
    total_tps = sum(1 for wid, _ in ranked.entries if labels[wid] == "TP")
    if total_tps == 0:
        raise NoActualTPs("the labeled list contains no TP warnings")
    head = _head_size(len(ranked.entries), k_percent)
    hits = sum(1 for wid, _ in ranked.entries[:head] if labels[wid] == "TP")
    return hits / total_tps


@dataclass
class MetricReport:
    per_k: dict[int, tuple[float, float]]  # k% -> (P@K, R@K)
    totals: tuple[int, int]  # (actual TPs, total warnings)

    def to_json(self) -> dict:
        return {
            "per_k": {str(k): {"precision": p, "recall": r} for k, (p, r) in self.per_k.items()},
            "totals": {"actual_tps": self.totals[0], "warnings": self.totals[1]},
        }

    def table(self) -> str:
        lines = [f"{'k%':>4}  {'P@K':>8}  {'R@K':>8}"]
        for k in sorted(self.per_k):
            p, r = self.per_k[k]
            lines.append(f"{k:>4}  {p:>8.4f}  {r:>8.4f}")
        lines.append(f"TPs: {self.totals[0]} / {self.totals[1]} warnings")
        return "\n".join(lines)


def evaluate_ranking(
    ranked: RankedList,
    labels: Mapping[str, str],
    k_grid: Sequence[int] = K_GRID,
) -> MetricReport:
    per_k = {
        k: (precision_at_k(ranked, labels, k), recall_at_k(ranked, labels, k))
        for k in k_grid
    }
    tps = sum(1 for wid, _ in ranked.entries if labels[wid] == "TP")
    return MetricReport(per_k=per_k, totals=(tps, len(ranked.entries)))


def mean_report(reports: Sequence[MetricReport]) -> MetricReport:
    """Unweighted mean of per-fold metrics."""
    ks = sorted(reports[0].per_k)
    per_k = {}
    for k in ks:
        p = sum(r.per_k[k][0] for r in reports) / len(reports)
        rr = sum(r.per_k[k][1] for r in reports) / len(reports)
        per_k[k] = (p, rr)
    tps = sum(r.totals[0] for r in reports)
    n = sum(r.totals[1] for r in reports)
    return MetricReport(per_k=per_k, totals=(tps, n))


GROUPINGS = ("combined", "per_project", "cross_project")


@dataclass
class FoldPlan:
    k: int
    assignments: dict[str, int]  # warning id -> fold index
    strata: str
    seed: int

    def fold_ids(self, fold: int) -> list[str]:
        return sorted(w for w, f in self.assignments.items() if f == fold)


def stratified_kfold(
    dataset: Dataset, k: int = 5, seed: int = 0, grouping: str = "combined"
) -> FoldPlan:
    """Label-stratified fold assignment.

    combined pools every project into label strata; per_project stratifies by
    (project, label) so each project's classes spread evenly over folds;
    cross_project assigns whole projects to folds (train and test never share
    a project), which cannot honor the per-stratum balance guarantee.
    """
    if grouping not in GROUPINGS:
        raise ValueError(f"grouping must be one of {GROUPINGS}")
    for w in dataset.warnings:
        if w.label is None:
            raise ValueError(f"warning {w.id} is unlabeled; folds need labels")
    rng = random.Random(seed)
    assignments: dict[str, int] = {}
    if grouping == "cross_project":
        projects = sorted({dataset.project(w) for w in dataset.warnings})
        if len(projects) < k:
            raise TooFewSamples(f"cross_project folds need >= {k} projects, got {len(projects)}")
        rng.shuffle(projects)
        fold_of_project = {p: i % k for i, p in enumerate(projects)}
        for w in dataset.warnings:
            assignments[w.id] = fold_of_project[dataset.project(w)]
        return FoldPlan(k=k, assignments=assignments, strata="project", seed=seed)

    strata: dict[tuple, list[str]] = {}
    for w in dataset.warnings:
        key = (w.label,) if grouping == "combined" else (dataset.project(w), w.label)
        strata.setdefault(key, []).append(w.id)
    for key in sorted(strata):
        ids = sorted(strata[key])
        if len(ids) < k:
            raise TooFewSamples(
                f"stratum {key} has {len(ids)} warnings, fewer than k={k}"
            )
        rng.shuffle(ids)
        for i, wid in enumerate(ids):
            assignments[wid] = i % k
    return FoldPlan(
        k=k,
        assignments=assignments,
        strata="label" if grouping == "combined" else "project-label",
        seed=seed,
    )
