"""End-to-end experiment pipeline and the ablation matrix.

Per fold: vocabulary and CBOW embeddings are fitted on the training folds
only, the ranker is trained on them, and the held-out fold is scored and
evaluated; fold metrics are averaged unweighted. All randomness derives from
one root seed through named substreams so two runs with the same config are
bit-identical and ablation cells differ only in the ablated factor.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .dependence import SystemDependenceGraph, build_sdg
from .embedding import CbowConfig, EmbeddingMatrix, embed, train_cbow
from .evaluation import (
    FoldPlan,
    K_GRID,
    MetricReport,
    RankedList,
    evaluate_ranking,
    mean_report,
    rank,
    stratified_kfold,
)
from .neural import (
    ModelConfig,
    RankerModel,
    TrainData,
    init_model,
    predict_tp_scores,
    train,
)
from .preprocess import (
    PreparedWarning,
    PreprocessConfig,
    build_vocab,
    prepare_context_sequences,
)
from .slicing import ContextMode, extract_context
from .warnings_io import Dataset, load_corpus, load_warnings


def derive_int(root_seed: int, name: str) -> int:
    """Stable 64-bit substream seed for a named purpose."""
    digest = hashlib.sha256(f"{root_seed}:{name}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def derive_rng(root_seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng(derive_int(root_seed, name))


@dataclass
class ExperimentConfig:
    corpus_dir: str = "corpus"
    warnings_path: Optional[str] = None  # defaults to <corpus_dir>/warnings.jsonl
    context_mode: str = "control_and_data"
    use_stmt_branch: bool = True
    abstraction_on: bool = True
    L_slice: int = 600
    L_stmt: int = 40
    embed_dim: int = 96
    cbow_window: int = 5
    cbow_negatives: int = 5
    cbow_epochs: int = 10
    cbow_lr: float = 0.025
    hidden: int = 256
    dense1: int = 256
    dense2: int = 64
    dropout: float = 0.1
    epochs: int = 60
    batch_size: int = 64
    lr: float = 0.002
    folds: int = 5
    split: str = "combined"
    seed: int = 0
    output_dir: str = "out"

    def preprocess_config(self) -> PreprocessConfig:
        return PreprocessConfig(self.L_slice, self.L_stmt, self.abstraction_on)

    def model_config(self, seed: int) -> ModelConfig:
        return ModelConfig(
            hidden=self.hidden,
            dense_sizes=(self.dense1, self.dense2, 2),
            dropout=self.dropout,
            use_stmt_branch=self.use_stmt_branch,
            embed_dim=self.embed_dim,
            seed=seed,
        )

    def cbow_config(self, seed: int) -> CbowConfig:
        return CbowConfig(
            dim=self.embed_dim,
            window=self.cbow_window,
            negatives=self.cbow_negatives,
            epochs=self.cbow_epochs,
            lr=self.cbow_lr,
            seed=seed,
        )


def corpus_fingerprint(corpus_dir: str | Path, warnings_path: Optional[str | Path] = None) -> str:
    corpus_dir = Path(corpus_dir)
    h = hashlib.sha256()
    names = sorted(p for p in corpus_dir.rglob("*") if p.is_file())
    for p in names:
        h.update(str(p.relative_to(corpus_dir)).encode())
        h.update(p.read_bytes())
    if warnings_path is not None and Path(warnings_path).exists():
        h.update(Path(warnings_path).read_bytes())
    return h.hexdigest()


def file_sha256(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass
class CorpusBundle:
    units: list
    dataset: Dataset
    sdg: SystemDependenceGraph


def load_bundle(config: ExperimentConfig) -> CorpusBundle:
    units, project_of = load_corpus(config.corpus_dir)
    warnings_path = config.warnings_path or str(Path(config.corpus_dir) / "warnings.jsonl")
    dataset = load_warnings(warnings_path, project_of)
    sdg = build_sdg(units)
    return CorpusBundle(units=units, dataset=dataset, sdg=sdg)


@dataclass
class ExperimentResult:
    report: MetricReport
    fold_reports: list[MetricReport]
    scores: dict[str, float]
    ranked: RankedList
    manifest: dict


def prepare_warnings(
    bundle: CorpusBundle, mode: ContextMode, pp: PreprocessConfig
) -> list[PreparedWarning]:
    out = []
    for w in bundle.dataset.warnings:
        context = extract_context(bundle.sdg, w, mode)
        out.append(prepare_context_sequences(bundle.sdg, context, pp))
    return out


def _label_to_class(label: str) -> int:
    return 0 if label == "TP" else 1


def _build_arrays(
    prepared: list[PreparedWarning], emb: EmbeddingMatrix
) -> TrainData:
    n = len(prepared)
    L_s = prepared[0].context_seq.length
    L_t = prepared[0].stmt_seq.length
    d = emb.vectors.shape[1]
    xs = np.zeros((n, L_s, d))
    ms = np.zeros((n, L_s), dtype=bool)
    xt = np.zeros((n, L_t, d))
    mt = np.zeros((n, L_t), dtype=bool)
    y = np.zeros(n, dtype=np.int64)
    for i, p in enumerate(prepared):
        xs[i] = embed(p.context_seq, emb)
        ms[i] = p.context_seq.mask
        xt[i] = embed(p.stmt_seq, emb)
        mt[i] = p.stmt_seq.mask
        y[i] = _label_to_class(p.label) if p.label is not None else 0
    return TrainData(xs, ms, xt, mt, y)


def run_fold(
    config: ExperimentConfig,
    prepared_by_id: dict[str, PreparedWarning],
    plan: FoldPlan,
    fold: int,
) -> tuple[MetricReport, dict[str, float], RankerModel, EmbeddingMatrix]:
    test_ids = set(plan.fold_ids(fold))
    train_prep = [p for wid, p in prepared_by_id.items() if wid not in test_ids]
    test_prep = [prepared_by_id[wid] for wid in sorted(test_ids)]

    train_streams_tokens = []
    for p in train_prep:
        train_streams_tokens.append(p.context_seq.real_tokens())
        train_streams_tokens.append(p.stmt_seq.real_tokens())
    vocab = build_vocab(train_streams_tokens)
    streams = [vocab.encode(toks) for toks in train_streams_tokens]
    emb = train_cbow(
        streams, vocab, config.cbow_config(derive_int(config.seed, f"cbow/{fold}"))
    )

    train_data = _build_arrays(train_prep, emb)
    test_data = _build_arrays(test_prep, emb)

    model = init_model(
        config.model_config(config.seed), derive_rng(config.seed, f"init/{fold}")
    )
    train(
        model,
        train_data,
        epochs=config.epochs,
        batch_size=config.batch_size,
        rng_shuffle=derive_rng(config.seed, f"shuffle/{fold}"),
        rng_dropout=derive_rng(config.seed, f"dropout/{fold}"),
        lr=config.lr,
    )
    tp_scores = predict_tp_scores(model, test_data)
    scores = {p.warning_id: float(s) for p, s in zip(test_prep, tp_scores)}
    labels = {p.warning_id: p.label for p in test_prep}
    ranked = rank(scores)
    report = evaluate_ranking(ranked, labels, K_GRID)
    return report, scores, model, emb


def run_experiment(
    config: ExperimentConfig, bundle: Optional[CorpusBundle] = None
) -> ExperimentResult:
    """Full pipeline per fold; returns averaged metrics and a run manifest."""
    t0 = time.time()
    if bundle is None:
        bundle = load_bundle(config)
    if not bundle.dataset.labeled():
        raise ValueError("run_experiment needs a fully labeled dataset")
    mode = ContextMode(config.context_mode)
    prepared = prepare_warnings(bundle, mode, config.preprocess_config())
    prepared_by_id = {p.warning_id: p for p in prepared}
    plan = stratified_kfold(
        bundle.dataset,
        k=config.folds,
        seed=derive_int(config.seed, "split"),
        grouping=config.split,
    )
    fold_reports = []
    all_scores: dict[str, float] = {}
    for fold in range(config.folds):
        report, scores, _model, _emb = run_fold(config, prepared_by_id, plan, fold)
        fold_reports.append(report)
        all_scores.update(scores)
    agg = mean_report(fold_reports)
    ranked_all = rank(all_scores)
    manifest = {
        "config": asdict(config),
        "corpus_hash": corpus_fingerprint(
            config.corpus_dir,
            config.warnings_path or str(Path(config.corpus_dir) / "warnings.jsonl"),
        ),
        "seed": config.seed,
        "substreams": {
            "split": derive_int(config.seed, "split"),
            "cbow/0": derive_int(config.seed, "cbow/0"),
            "init/0": derive_int(config.seed, "init/0"),
        },
        "folds": config.folds,
        "n_warnings": len(bundle.dataset.warnings),
        "wall_seconds": round(time.time() - t0, 3),
    }
    return ExperimentResult(
        report=agg,
        fold_reports=fold_reports,
        scores=all_scores,
        ranked=ranked_all,
        manifest=manifest,
    )


ABLATION_MODES = ("raw_function", "control_only", "data_only", "control_and_data")


def ablation_cells() -> list[tuple[str, bool, bool]]:
    """The 16-cell matrix: context mode x statement branch x abstraction."""
    return [
        (mode, stmt, abstraction)
        for mode in ABLATION_MODES
        for stmt in (True, False)
        for abstraction in (True, False)
    ]


def cell_key(mode: str, stmt: bool, abstraction: bool) -> str:
    return f"mode={mode},stmt={'on' if stmt else 'off'},abs={'on' if abstraction else 'off'}"


def run_ablation(
    config: ExperimentConfig,
    bundle: Optional[CorpusBundle] = None,
    cells: Optional[list[tuple[str, bool, bool]]] = None,
) -> dict[str, ExperimentResult]:
    """Run the ablation matrix; cells reuse one corpus bundle."""
    if bundle is None:
        bundle = load_bundle(config)
    results: dict[str, ExperimentResult] = {}
    for mode, stmt, abstraction in cells or ablation_cells():
        cell_cfg = replace(
            config,
            context_mode=mode,
            use_stmt_branch=stmt,
            abstraction_on=abstraction,
        )
        results[cell_key(mode, stmt, abstraction)] = run_experiment(cell_cfg, bundle)
    return results


def ablation_report_json(results: dict[str, ExperimentResult]) -> str:
    payload = {
        key: {
            "report": res.report.to_json(),
            "fold_reports": [r.to_json() for r in res.fold_reports],
            "manifest": {k: v for k, v in res.manifest.items() if k != "wall_seconds"},
        }
        for key, res in sorted(results.items())
    }
    return json.dumps(payload, sort_keys=True, indent=2)
