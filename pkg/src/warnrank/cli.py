"""Command-line interface.

Subcommands: slice | synth | prepare | train-embed | train | rank | eval |
ablate. Exit codes: 0 success, 1 internal error, 2 user/input error.
"""

from __future__ import annotations

import argparse
import json
import sys
import traceback
from dataclasses import asdict
from pathlib import Path

from .config import load_config
from .embedding import load_embedding, save_embedding, train_cbow
from .evaluation import K_GRID, evaluate_ranking, rank
from .experiment import (
    ExperimentConfig,
    ablation_report_json,
    cell_key,
    corpus_fingerprint,
    derive_int,
    derive_rng,
    file_sha256,
    load_bundle,
    prepare_warnings,
    run_ablation,
    run_experiment,
)
from .neural import init_model, load_model, predict_tp_scores, save_model, train
from .preprocess import build_vocab, read_prepared, write_prepared
from .slicing import ContextMode, UnresolvedWarning, extract_context
from .synth import synthesize_corpus, write_corpus
from .warnings_io import Dataset, Warning, load_warnings, save_warnings


class UserError(Exception):
    pass


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI config file; defaults match the published setup")
    p.add_argument("--corpus", help="corpus directory (overrides config)")
    p.add_argument("--warnings", help="warnings .jsonl path (overrides config)")
    p.add_argument("--mode", choices=[m.value for m in ContextMode], help="context mode")
    p.add_argument("--no-stmt-branch", action="store_true", help="disable the statement branch")
    p.add_argument("--no-abstraction", action="store_true", help="disable identifier abstraction")
    p.add_argument("--epochs", type=int, help="training epochs")
    p.add_argument("--batch-size", type=int)
    p.add_argument("--hidden", type=int, help="LSTM hidden units per direction")
    p.add_argument("--dense1", type=int)
    p.add_argument("--dense2", type=int)
    p.add_argument("--embed-dim", type=int)
    p.add_argument("--cbow-epochs", type=int)
    p.add_argument("--l-slice", type=int)
    p.add_argument("--l-stmt", type=int)
    p.add_argument("--folds", type=int)
    p.add_argument("--split", choices=["combined", "per_project", "cross_project"])
    p.add_argument("--seed", type=int)
    p.add_argument("--output-dir", help="directory for produced artifacts")


def _config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    config = load_config(args.config) if args.config else ExperimentConfig()
    overrides = {
        "corpus": "corpus_dir",
        "warnings": "warnings_path",
        "mode": "context_mode",
        "epochs": "epochs",
        "batch_size": "batch_size",
        "hidden": "hidden",
        "dense1": "dense1",
        "dense2": "dense2",
        "embed_dim": "embed_dim",
        "cbow_epochs": "cbow_epochs",
        "l_slice": "L_slice",
        "l_stmt": "L_stmt",
        "folds": "folds",
        "split": "split",
        "seed": "seed",
        "output_dir": "output_dir",
    }
    for arg_name, attr in overrides.items():
        value = getattr(args, arg_name, None)
        if value is not None:
            setattr(config, attr, value)
    if getattr(args, "no_stmt_branch", False):
        config.use_stmt_branch = False
    if getattr(args, "no_abstraction", False):
        config.abstraction_on = False
    return config


def _out_dir(config: ExperimentConfig) -> Path:
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_slice(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    bundle = load_bundle_for_slice(config)
    mode = ContextMode(args.mode or "control_and_data")
    probe = Warning(
        id=f"{args.file}:{args.line}", file=args.file, function="", line=args.line,
        kind="BO", detector="cli",
    )
    try:
        context = extract_context(bundle.sdg, probe, mode)
    except UnresolvedWarning as exc:
        raise UserError(str(exc)) from exc
    for node in context.statements:
        src, line = bundle.sdg.location(node)
        marker = "*" if node == context.reported else " "
        print(f"{marker} {src}:{line:<4} [{node.function}] {bundle.sdg.stmt_of(node).text()}")
    return 0


def load_bundle_for_slice(config: ExperimentConfig):
    # slice works without warnings.jsonl; build the SDG from the corpus alone
    from .dependence import build_sdg
    from .warnings_io import load_corpus

    units, project_of = load_corpus(config.corpus_dir)
    sdg = build_sdg(units)

    class _B:
        pass

    b = _B()
    b.sdg = sdg
    b.units = units
    b.project_of = project_of
    return b


def cmd_synth(args: argparse.Namespace) -> int:
    result = synthesize_corpus(
        seed=args.seed,
        n_projects=args.projects,
        tp_rate=args.tp_rate,
        sites_per_project=args.sites_per_project,
    )
    write_corpus(result, args.out)
    n = len(result.dataset.warnings)
    tps = sum(1 for w in result.dataset.warnings if w.label == "TP")
    print(f"wrote {len(result.files)} files, {n} warnings ({tps} TP / {n - tps} FP) to {args.out}")
    return 0


def cmd_prepare(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    out = _out_dir(config)
    cache_path = out / "prepared.jsonl"
    fingerprint = corpus_fingerprint(
        config.corpus_dir, config.warnings_path or str(Path(config.corpus_dir) / "warnings.jsonl")
    )
    if cache_path.exists():
        try:
            header, _ = read_prepared(cache_path)
            same = (
                header["corpus_hash"] == fingerprint
                and header["mode"] == config.context_mode
                and header["config"]["L_slice"] == config.L_slice
                and header["config"]["L_stmt"] == config.L_stmt
                and header["config"]["abstraction_on"] == config.abstraction_on
            )
        except (ValueError, KeyError, json.JSONDecodeError):
            same = False
        if same:
            print(f"cache hit: {cache_path} is current, skipping recomputation")
            return 0
    bundle = load_bundle(config)
    mode = ContextMode(config.context_mode)
    prepared = prepare_warnings(bundle, mode, config.preprocess_config())
    write_prepared(cache_path, prepared, config.preprocess_config(), config.context_mode, fingerprint)
    vocab = build_vocab([p.context_seq.real_tokens() for p in prepared])
    print(f"prepared {len(prepared)} warnings -> {cache_path}")
    print(f"vocabulary size (abstraction {'on' if config.abstraction_on else 'off'}): {vocab.size}")
    if args.compare_abstraction:
        flipped = config.preprocess_config()
        flipped.abstraction_on = not config.abstraction_on
        other = prepare_warnings(bundle, mode, flipped)
        other_vocab = build_vocab([p.context_seq.real_tokens() for p in other])
        on_size = vocab.size if config.abstraction_on else other_vocab.size
        off_size = other_vocab.size if config.abstraction_on else vocab.size
        print(f"vocabulary size with abstraction: {on_size}; without: {off_size}")
    return 0


def cmd_train_embed(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    out = _out_dir(config)
    bundle = load_bundle(config)
    prepared = prepare_warnings(bundle, ContextMode(config.context_mode), config.preprocess_config())
    token_lists = []
    for p in prepared:
        token_lists.append(p.context_seq.real_tokens())
        token_lists.append(p.stmt_seq.real_tokens())
    vocab = build_vocab(token_lists)
    emb = train_cbow(
        [vocab.encode(t) for t in token_lists],
        vocab,
        config.cbow_config(derive_int(config.seed, "cbow/full")),
    )
    path = out / "embedding.ckpt"
    save_embedding(path, emb)
    print(f"trained embeddings: V={vocab.size}, dim={config.embed_dim} -> {path}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    from .experiment import _build_arrays

    config = _config_from_args(args)
    out = _out_dir(config)
    bundle = load_bundle(config)
    if not bundle.dataset.labeled():
        raise UserError("training requires labeled warnings (TP/FP)")
    prepared = prepare_warnings(bundle, ContextMode(config.context_mode), config.preprocess_config())
    token_lists = []
    for p in prepared:
        token_lists.append(p.context_seq.real_tokens())
        token_lists.append(p.stmt_seq.real_tokens())
    vocab = build_vocab(token_lists)
    emb = train_cbow(
        [vocab.encode(t) for t in token_lists],
        vocab,
        config.cbow_config(derive_int(config.seed, "cbow/full")),
    )
    data = _build_arrays(prepared, emb)
    model = init_model(config.model_config(config.seed), derive_rng(config.seed, "init/full"))
    _state, losses = train(
        model,
        data,
        epochs=config.epochs,
        batch_size=config.batch_size,
        rng_shuffle=derive_rng(config.seed, "shuffle/full"),
        rng_dropout=derive_rng(config.seed, "dropout/full"),
        lr=config.lr,
    )
    emb_path = out / "embedding.ckpt"
    model_path = out / "model.ckpt"
    save_embedding(emb_path, emb)
    save_model(model_path, model, _state, epoch=config.epochs)
    manifest = {
        "config": asdict(config),
        "corpus_hash": corpus_fingerprint(
            config.corpus_dir, config.warnings_path or str(Path(config.corpus_dir) / "warnings.jsonl")
        ),
        "artifacts": {
            "embedding": {"path": str(emb_path), "sha256": file_sha256(emb_path)},
            "model": {"path": str(model_path), "sha256": file_sha256(model_path)},
        },
        "final_loss": losses[-1] if losses else None,
    }
    (out / "train_manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    print(f"trained model -> {model_path} (final epoch loss {losses[-1]:.4f})")
    return 0


def cmd_rank(args: argparse.Namespace) -> int:
    from .experiment import _build_arrays

    config = _config_from_args(args)
    out = _out_dir(config)
    model, _state, _header = load_model(args.model or str(Path(config.output_dir) / "model.ckpt"))
    emb = load_embedding(args.embedding or str(Path(config.output_dir) / "embedding.ckpt"))
    bundle = load_bundle(config)
    prepared = prepare_warnings(bundle, ContextMode(config.context_mode), config.preprocess_config())
    data = _build_arrays(prepared, emb)
    scores = predict_tp_scores(model, data)
    ranked = rank({p.warning_id: float(s) for p, s in zip(prepared, scores)})
    path = out / "ranked.json"
    path.write_text(json.dumps({"entries": ranked.entries}, indent=2))
    for wid, score in ranked.entries[:10]:
        print(f"{score:8.4f}  {wid}")
    print(f"ranked {len(ranked.entries)} warnings -> {path}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    out = _out_dir(config)
    ranked_payload = json.loads(Path(args.scores).read_text())
    entries = [(str(w), float(s)) for w, s in ranked_payload["entries"]]
    warnings_path = config.warnings_path or str(Path(config.corpus_dir) / "warnings.jsonl")
    dataset = load_warnings(warnings_path)
    labels = {w.id: w.label for w in dataset.warnings}
    missing = [wid for wid, _ in entries if labels.get(wid) is None]
    if missing:
        raise UserError(
            f"evaluation requires labels; {len(missing)} ranked warnings are unlabeled "
            f"(first: {missing[0]})"
        )
    from .evaluation import RankedList

    report = evaluate_ranking(RankedList(entries), labels, K_GRID)
    (out / "metrics.json").write_text(json.dumps(report.to_json(), indent=2, sort_keys=True))
    print(report.table())
    return 0


def cmd_ablate(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    out = _out_dir(config)
    results = run_ablation(config)
    payload = ablation_report_json(results)
    path = out / "ablation.json"
    path.write_text(payload)
    print(f"{'cell':<48} {'R@20':>7} {'P@20':>7}")
    for key, res in sorted(results.items()):
        p20, r20 = res.report.per_k[20]
        print(f"{key:<48} {r20:>7.4f} {p20:>7.4f}")
    print(f"wrote {len(results)} cells -> {path}")
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    out = _out_dir(config)
    result = run_experiment(config)
    (out / "metrics.json").write_text(json.dumps(result.report.to_json(), indent=2, sort_keys=True))
    (out / "run_manifest.json").write_text(json.dumps(result.manifest, indent=2, sort_keys=True))
    print(result.report.table())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="warnrank",
        description="Rank static-analysis warnings by true-positive likelihood.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("slice", help="print a warning context as annotated source lines")
    _add_config_args(p)
    p.add_argument("--file", required=True, help="corpus-relative source path")
    p.add_argument("--line", required=True, type=int)
    p.set_defaults(func=cmd_slice)

    p = sub.add_parser("synth", help="generate a labeled planted-pattern corpus")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--projects", type=int, default=6)
    p.add_argument("--tp-rate", type=float, default=0.3)
    p.add_argument("--sites-per-project", type=int, default=16)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("prepare", help="preprocess warnings into the token cache")
    _add_config_args(p)
    p.add_argument("--compare-abstraction", action="store_true",
                   help="also report the vocabulary size with abstraction flipped")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train-embed", help="train CBOW embeddings over the corpus")
    _add_config_args(p)
    p.set_defaults(func=cmd_train_embed)

    p = sub.add_parser("train", help="train the ranker on all labeled warnings")
    _add_config_args(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("rank", help="score and rank warnings with a trained model")
    _add_config_args(p)
    p.add_argument("--model", help="model checkpoint (default <output-dir>/model.ckpt)")
    p.add_argument("--embedding", help="embedding checkpoint (default <output-dir>/embedding.ckpt)")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("eval", help="compute Top-k% precision/recall for a ranked list")
    _add_config_args(p)
    p.add_argument("--scores", required=True, help="ranked.json produced by `rank`")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("run", help="run one cross-validated experiment")
    _add_config_args(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("ablate", help="run the 16-cell ablation matrix")
    _add_config_args(p)
    p.set_defaults(func=cmd_ablate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except UserError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (FileNotFoundError, UnresolvedWarning) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception:
        traceback.print_exc()
        return 1


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())
