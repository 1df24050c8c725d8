"""CBOW word embeddings with negative sampling, trained from scratch.

Each position predicts its center token from the mean of the window's input
vectors; the logistic loss covers one positive plus `negatives` samples drawn
from the unigram^0.75 distribution. The <pad> row stays exactly zero and is
never sampled; <unk> is trained by remapping a small fraction of training
tokens. Lookup (`embed`) zeroes masked rows so pad content can never leak.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .preprocess import TokenSequence, Vocabulary


class EmptyCorpus(Exception):
    pass


@dataclass(frozen=True)
class CbowConfig:
    dim: int = 96
    window: int = 5
    negatives: int = 5
    epochs: int = 10
    lr: float = 0.025
    min_lr: float = 0.0001
    unk_fraction: float = 0.01
    seed: int = 0

    def __post_init__(self) -> None:
        if self.dim < 1 or self.window < 1 or self.negatives < 1:
            raise ValueError("dim, window, and negatives must all be >= 1")


@dataclass
class EmbeddingMatrix:
    vectors: np.ndarray  # (V, dim); row pad_id is all zeros
    vocab: Vocabulary
    config: CbowConfig
    losses: list[float] = field(default_factory=list)  # mean loss per epoch


def cbow_window_loss_grads(
    w_in: np.ndarray,
    w_out: np.ndarray,
    ctx_ids: Sequence[int],
    center_id: int,
    neg_ids: Sequence[int],
) -> tuple[float, np.ndarray, np.ndarray]:
    """Loss and gradients for one training window (reference implementation).

    Returns (loss, d_w_in, d_w_out) with dense gradient arrays. Negative
    samples equal to the center token are skipped.
    """
    ctx = np.asarray(ctx_ids, dtype=int)
    targets = np.array([center_id] + [n for n in neg_ids if n != center_id], dtype=int)
    labels = np.zeros(len(targets))
    labels[0] = 1.0
    h = w_in[ctx].mean(axis=0)
    scores = w_out[targets] @ h
    probs = 1.0 / (1.0 + np.exp(-scores))
    eps = 1e-12
    loss = -float(np.log(probs[0] + eps) + np.log(1.0 - probs[1:] + eps).sum())
    g = probs - labels  # d loss / d scores
    d_w_out = np.zeros_like(w_out)
    np.add.at(d_w_out, targets, np.outer(g, h))
    dh = g @ w_out[targets]
    d_w_in = np.zeros_like(w_in)
    np.add.at(d_w_in, ctx, np.tile(dh / len(ctx), (len(ctx), 1)))
    return loss, d_w_in, d_w_out


def _training_windows(
    streams: Sequence[Sequence[int]], window: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(centers, padded context ids, context mask) over all positions."""
    centers = []
    ctxs = []
    for stream in streams:
        n = len(stream)
        arr = list(stream)
        for t in range(n):
            lo = max(0, t - window)
            hi = min(n, t + window + 1)
            ctx = arr[lo:t] + arr[t + 1 : hi]
            if not ctx:
                continue
            centers.append(arr[t])
            ctxs.append(ctx)
    if not centers:
        raise EmptyCorpus("no training windows: corpus has no non-pad tokens")
    width = 2 * window
    ctx_ids = np.zeros((len(ctxs), width), dtype=np.int64)
    ctx_mask = np.zeros((len(ctxs), width), dtype=bool)
    for i, ctx in enumerate(ctxs):
        ctx_ids[i, : len(ctx)] = ctx
        ctx_mask[i, : len(ctx)] = True
    return np.asarray(centers, dtype=np.int64), ctx_ids, ctx_mask


_CHUNK = 512


def train_cbow(
    streams: Sequence[Sequence[int]], vocab: Vocabulary, cfg: CbowConfig
) -> EmbeddingMatrix:
    """Train embeddings over token-id streams (pad ids must not appear)."""
    V = vocab.size
    pad, unk = vocab.pad_id, vocab.unk_id
    rng = np.random.default_rng(cfg.seed)

    flat = [t for s in streams for t in s]
    if not flat:
        raise EmptyCorpus("no non-pad tokens in the training streams")
    if pad in flat:
        raise ValueError("pad ids are not allowed in CBOW training streams")

    # occasional <unk> exposure so out-of-vocabulary tokens get a trained vector
    prepared: list[list[int]] = []
    for s in streams:
        s = list(s)
        if cfg.unk_fraction > 0.0:
            hits = rng.random(len(s)) < cfg.unk_fraction
            s = [unk if h else t for t, h in zip(s, hits)]
        prepared.append(s)

    counts = np.zeros(V)
    for s in prepared:
        for t in s:
            counts[t] += 1
    noise = counts**0.75
    noise[pad] = 0.0
    noise /= noise.sum()

    w_in = (rng.random((V, cfg.dim)) - 0.5) / cfg.dim
    w_in[pad] = 0.0
    w_out = np.zeros((V, cfg.dim))

    centers, ctx_ids, ctx_mask = _training_windows(prepared, cfg.window)
    n = len(centers)
    ctx_counts = ctx_mask.sum(axis=1, keepdims=True)

    total_steps = cfg.epochs * ((n + _CHUNK - 1) // _CHUNK)
    step = 0
    epoch_losses = []
    for _epoch in range(cfg.epochs):
        running = 0.0
        for start in range(0, n, _CHUNK):
            alpha = cfg.lr + (cfg.min_lr - cfg.lr) * (step / max(total_steps - 1, 1))
            step += 1
            sl = slice(start, min(start + _CHUNK, n))
            c = centers[sl]
            ids = ctx_ids[sl]
            msk = ctx_mask[sl]
            cnt = ctx_counts[sl]
            h = (w_in[ids] * msk[:, :, None]).sum(axis=1) / cnt  # (B, d)
            negs = rng.choice(V, size=(len(c), cfg.negatives), p=noise)
            targets = np.concatenate([c[:, None], negs], axis=1)  # (B, 1+K)
            valid = np.ones_like(targets, dtype=bool)
            valid[:, 1:] = negs != c[:, None]
            out_rows = w_out[targets]  # copy: the input gradient uses pre-update rows
            scores = np.einsum("bkd,bd->bk", out_rows, h)
            probs = 1.0 / (1.0 + np.exp(-scores))
            labels = np.zeros_like(probs)
            labels[:, 0] = 1.0
            g = (probs - labels) * valid  # (B, 1+K)
            eps = 1e-12
            pos_loss = -np.log(probs[:, 0] + eps)
            neg_loss = -(np.log(1.0 - probs[:, 1:] + eps) * valid[:, 1:]).sum(axis=1)
            running += float((pos_loss + neg_loss).sum())
            d_out = g[:, :, None] * h[:, None, :]
            dh = np.einsum("bk,bkd->bd", g, out_rows)
            np.add.at(w_out, targets, -alpha * d_out)
            d_in = (dh / cnt)[:, None, :] * msk[:, :, None]
            np.add.at(w_in, ids, -alpha * d_in)
        epoch_losses.append(running / n)
    w_in[pad] = 0.0  # pad is excluded from windows; keep the row exactly zero
    return EmbeddingMatrix(vectors=w_in, vocab=vocab, config=cfg, losses=epoch_losses)


def embed(seq: TokenSequence, emb: EmbeddingMatrix) -> np.ndarray:
    """(L, dim) matrix; masked (pad) rows are exactly zero."""
    ids = np.asarray(emb.vocab.encode(seq.tokens), dtype=np.int64)
    out = emb.vectors[ids].copy()
    out[~np.asarray(seq.mask, dtype=bool)] = 0.0
    return out


# --- checkpoint ---------------------------------------------------------------

_EMB_MAGIC = b"WRNKEMB1"
EMB_VERSION = 1


def save_embedding(path: str | Path, emb: EmbeddingMatrix) -> None:
    """Binary layout: 8-byte magic, u32 header length, header JSON (version,
    V, dim, seed, config, vocabulary), then V*dim little-endian float64."""
    header = {
        "version": EMB_VERSION,
        "V": int(emb.vectors.shape[0]),
        "dim": int(emb.vectors.shape[1]),
        "seed": emb.config.seed,
        "config": {
            "dim": emb.config.dim,
            "window": emb.config.window,
            "negatives": emb.config.negatives,
            "epochs": emb.config.epochs,
            "lr": emb.config.lr,
            "min_lr": emb.config.min_lr,
            "unk_fraction": emb.config.unk_fraction,
            "seed": emb.config.seed,
        },
        "vocab": emb.vocab.to_json(),
    }
    payload = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_EMB_MAGIC)
        fh.write(np.uint32(len(payload)).tobytes())
        fh.write(payload)
        fh.write(np.ascontiguousarray(emb.vectors, dtype="<f8").tobytes())


def load_embedding(path: str | Path) -> EmbeddingMatrix:
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != _EMB_MAGIC:
            raise ValueError(f"not an embedding checkpoint: {path}")
        (hlen,) = np.frombuffer(fh.read(4), dtype=np.uint32)
        header = json.loads(fh.read(int(hlen)).decode("utf-8"))
        V, dim = header["V"], header["dim"]
        data = np.frombuffer(fh.read(V * dim * 8), dtype="<f8").reshape(V, dim).copy()
    cfg = CbowConfig(**header["config"])
    vocab = Vocabulary.from_json(header["vocab"])
    return EmbeddingMatrix(vectors=data, vocab=vocab, config=cfg)
