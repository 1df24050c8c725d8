"""From-scratch differentiable core: dual BiLSTM + masked global max pooling
+ three dense layers + softmax, trained with cross-entropy and Adamax.

Everything is plain numpy float64. Gate packing order inside the fused LSTM
weight matrices is (input, forget, candidate, output). Pad time steps are
processed as zero vectors and excluded at pooling; the pooling gradient is
routed to the earliest maximal time step. Dropout (inverted, train-time
only) applies to the inputs of each dense layer.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np


class AllMasked(Exception):
    pass


@dataclass(frozen=True)
class ModelConfig:
    hidden: int = 256
    dense_sizes: tuple[int, ...] = (256, 64, 2)
    dropout: float = 0.1
    use_stmt_branch: bool = True
    embed_dim: int = 96
    clip_norm: float = 5.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.hidden < 1:
            raise ValueError("hidden must be >= 1")
        if self.dense_sizes[-1] != 2:
            raise ValueError("final dense layer must have width 2")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")

    @property
    def feature_width(self) -> int:
        per_branch = 2 * self.hidden
        return per_branch * (2 if self.use_stmt_branch else 1)


@dataclass
class RankerModel:
    config: ModelConfig
    params: dict[str, np.ndarray]

    def branch_names(self) -> list[str]:
        names = ["slice_fwd", "slice_bwd"]
        if self.config.use_stmt_branch:
            names += ["stmt_fwd", "stmt_bwd"]
        return names


def _xavier(rng: np.random.Generator, fan_in: int, fan_out: int, shape) -> np.ndarray:
    a = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-a, a, size=shape)


def init_model(config: ModelConfig, rng: np.random.Generator) -> RankerModel:
    d, h = config.embed_dim, config.hidden
    params: dict[str, np.ndarray] = {}
    branches = ["slice_fwd", "slice_bwd"]
    if config.use_stmt_branch:
        branches += ["stmt_fwd", "stmt_bwd"]
    for name in branches:
        params[f"{name}.W"] = _xavier(rng, d, 4 * h, (d, 4 * h))
        params[f"{name}.U"] = _xavier(rng, h, 4 * h, (h, 4 * h))
        b = np.zeros(4 * h)
        b[h : 2 * h] = 1.0  # forget-gate bias
        params[f"{name}.b"] = b
    in_dim = config.feature_width
    for i, out_dim in enumerate(config.dense_sizes, start=1):
        params[f"dense{i}.W"] = _xavier(rng, in_dim, out_dim, (in_dim, out_dim))
        params[f"dense{i}.b"] = np.zeros(out_dim)
        in_dim = out_dim
    return RankerModel(config=config, params=params)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def lstm_forward(
    X: np.ndarray, W: np.ndarray, U: np.ndarray, b: np.ndarray
) -> tuple[np.ndarray, dict]:
    """Single-direction LSTM over (B, L, d); zero initial states."""
    B, L, _ = X.shape
    h = U.shape[0]
    H = np.zeros((B, L, h))
    C = np.zeros((B, L, h))
    gates = np.zeros((B, L, 4 * h))
    h_prev = np.zeros((B, h))
    c_prev = np.zeros((B, h))
    XW = X @ W  # (B, L, 4h), hoisted out of the loop
    for t in range(L):
        z = XW[:, t] + h_prev @ U + b
        i = _sigmoid(z[:, :h])
        f = _sigmoid(z[:, h : 2 * h])
        g = np.tanh(z[:, 2 * h : 3 * h])
        o = _sigmoid(z[:, 3 * h :])
        c = f * c_prev + i * g
        ht = o * np.tanh(c)
        gates[:, t, :h] = i
        gates[:, t, h : 2 * h] = f
        gates[:, t, 2 * h : 3 * h] = g
        gates[:, t, 3 * h :] = o
        C[:, t] = c
        H[:, t] = ht
        h_prev, c_prev = ht, c
    cache = {"X": X, "H": H, "C": C, "gates": gates, "W": W, "U": U}
    return H, cache


def lstm_backward(dH: np.ndarray, cache: dict) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """BPTT; returns (dX, dW, dU, db)."""
    X, H, C, gates = cache["X"], cache["H"], cache["C"], cache["gates"]
    W, U = cache["W"], cache["U"]
    B, L, d = X.shape
    h = U.shape[0]
    dW = np.zeros_like(W)
    dU = np.zeros_like(U)
    db = np.zeros(4 * h)
    dX = np.zeros_like(X)
    dh_next = np.zeros((B, h))
    dc_next = np.zeros((B, h))
    for t in range(L - 1, -1, -1):
        i = gates[:, t, :h]
        f = gates[:, t, h : 2 * h]
        g = gates[:, t, 2 * h : 3 * h]
        o = gates[:, t, 3 * h :]
        c = C[:, t]
        c_prev = C[:, t - 1] if t > 0 else np.zeros((B, h))
        h_prev = H[:, t - 1] if t > 0 else np.zeros((B, h))
        dh = dH[:, t] + dh_next
        tc = np.tanh(c)
        do = dh * tc
        dc = dh * o * (1.0 - tc * tc) + dc_next
        di = dc * g
        df = dc * c_prev
        dg = dc * i
        dz = np.concatenate(
            [
                di * i * (1.0 - i),
                df * f * (1.0 - f),
                dg * (1.0 - g * g),
                do * o * (1.0 - o),
            ],
            axis=1,
        )
        dW += X[:, t].T @ dz
        dU += h_prev.T @ dz
        db += dz.sum(axis=0)
        dX[:, t] = dz @ W.T
        dh_next = dz @ U.T
        dc_next = dc * f
    return dX, dW, dU, db


def bilstm(
    X: np.ndarray, params: dict[str, np.ndarray], prefix: str
) -> tuple[np.ndarray, dict]:
    """Concatenation of forward and time-reversed backward passes, (B, L, 2h)."""
    Hf, cf = lstm_forward(X, params[f"{prefix}_fwd.W"], params[f"{prefix}_fwd.U"], params[f"{prefix}_fwd.b"])
    Xr = X[:, ::-1]
    Hbr, cb = lstm_forward(Xr, params[f"{prefix}_bwd.W"], params[f"{prefix}_bwd.U"], params[f"{prefix}_bwd.b"])
    Hb = Hbr[:, ::-1]
    return np.concatenate([Hf, Hb], axis=2), {"fwd": cf, "bwd": cb}


def bilstm_backward(dH: np.ndarray, cache: dict, prefix: str, grads: dict) -> np.ndarray:
    h = cache["fwd"]["U"].shape[0]
    dXf, dWf, dUf, dbf = lstm_backward(np.ascontiguousarray(dH[:, :, :h]), cache["fwd"])
    dHb_rev = np.ascontiguousarray(dH[:, ::-1, h:])
    dXbr, dWb, dUb, dbb = lstm_backward(dHb_rev, cache["bwd"])
    grads[f"{prefix}_fwd.W"] = dWf
    grads[f"{prefix}_fwd.U"] = dUf
    grads[f"{prefix}_fwd.b"] = dbf
    grads[f"{prefix}_bwd.W"] = dWb
    grads[f"{prefix}_bwd.U"] = dUb
    grads[f"{prefix}_bwd.b"] = dbb
    return dXf + dXbr[:, ::-1]


def global_max_pool(H: np.ndarray, mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-channel max over mask-true time steps; returns (pooled, argmax)."""
    if not mask.any(axis=1).all():
        raise AllMasked("a sequence has no unmasked time steps")
    masked = np.where(mask[:, :, None], H, -np.inf)
    arg = masked.argmax(axis=1)  # earliest maximum wins ties
    pooled = np.take_along_axis(masked, arg[:, None, :], axis=1)[:, 0, :]
    return pooled, arg


def _gmp_backward(dP: np.ndarray, arg: np.ndarray, shape: tuple) -> np.ndarray:
    dH = np.zeros(shape)
    B, _, C = shape
    b_idx = np.repeat(np.arange(B), C)
    c_idx = np.tile(np.arange(C), B)
    dH[b_idx, arg.ravel(), c_idx] = dP.ravel()
    return dH


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def forward(
    model: RankerModel,
    x_slice: np.ndarray,
    m_slice: np.ndarray,
    x_stmt: Optional[np.ndarray] = None,
    m_stmt: Optional[np.ndarray] = None,
    train_mode: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> tuple[np.ndarray, dict]:
    """Probabilities (p_tp, p_fp) per batch row, plus the backward cache."""
    cfg = model.config
    p = model.params
    Hs, cache_s = bilstm(x_slice, p, "slice")
    pooled_s, arg_s = global_max_pool(Hs, m_slice)
    cache: dict = {"slice": cache_s, "arg_s": arg_s, "Hs_shape": Hs.shape}
    if cfg.use_stmt_branch:
        if x_stmt is None or m_stmt is None:
            raise ValueError("statement branch enabled but no statement input given")
        Ht, cache_t = bilstm(x_stmt, p, "stmt")
        pooled_t, arg_t = global_max_pool(Ht, m_stmt)
        feat = np.concatenate([pooled_s, pooled_t], axis=1)
        cache.update({"stmt": cache_t, "arg_t": arg_t, "Ht_shape": Ht.shape})
    else:
        feat = pooled_s
    acts = [feat]
    drop_masks = []
    a = feat
    n_dense = len(cfg.dense_sizes)
    for i in range(1, n_dense + 1):
        if train_mode and cfg.dropout > 0.0:
            if rng is None:
                raise ValueError("train_mode forward needs an rng for dropout")
            keep = (rng.random(a.shape) >= cfg.dropout) / (1.0 - cfg.dropout)
        else:
            keep = np.ones_like(a)
        drop_masks.append(keep)
        a_in = a * keep
        z = a_in @ p[f"dense{i}.W"] + p[f"dense{i}.b"]
        a = np.maximum(z, 0.0) if i < n_dense else z
        acts.append((a_in, z, a))
    probs = softmax(a)
    cache.update({"acts": acts, "drop_masks": drop_masks, "probs": probs})
    return probs, cache


def loss_and_grads(
    model: RankerModel,
    x_slice: np.ndarray,
    m_slice: np.ndarray,
    x_stmt: Optional[np.ndarray],
    m_stmt: Optional[np.ndarray],
    labels: np.ndarray,
    train_mode: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> tuple[float, dict[str, np.ndarray], dict[str, np.ndarray]]:
    """Mean cross-entropy and gradients for every parameter.

    labels holds class indices (0 = TP, 1 = FP). Also returns gradients with
    respect to the embedded inputs under keys "x_slice" / "x_stmt".
    """
    cfg = model.config
    p = model.params
    probs, cache = forward(model, x_slice, m_slice, x_stmt, m_stmt, train_mode, rng)
    B = probs.shape[0]
    logits = cache["acts"][-1][2]
    z = logits - logits.max(axis=1, keepdims=True)
    log_probs = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    loss = float(-log_probs[np.arange(B), labels].mean())

    grads: dict[str, np.ndarray] = {}
    dlogits = probs.copy()
    dlogits[np.arange(B), labels] -= 1.0
    dlogits /= B

    acts, drop_masks = cache["acts"], cache["drop_masks"]
    n_dense = len(cfg.dense_sizes)
    da = dlogits
    for i in range(n_dense, 0, -1):
        a_in, z, _a_out = acts[i]
        dz = da if i == n_dense else da * (z > 0.0)
        grads[f"dense{i}.W"] = a_in.T @ dz
        grads[f"dense{i}.b"] = dz.sum(axis=0)
        da = (dz @ p[f"dense{i}.W"].T) * drop_masks[i - 1]
    dfeat = da

    two_h = 2 * cfg.hidden
    dpooled_s = dfeat[:, :two_h]
    dHs = _gmp_backward(dpooled_s, cache["arg_s"], cache["Hs_shape"])
    dx_slice = bilstm_backward(dHs, cache["slice"], "slice", grads)
    inputs = {"x_slice": dx_slice}
    if cfg.use_stmt_branch:
        dpooled_t = dfeat[:, two_h:]
        dHt = _gmp_backward(dpooled_t, cache["arg_t"], cache["Ht_shape"])
        inputs["x_stmt"] = bilstm_backward(dHt, cache["stmt"], "stmt", grads)
    return loss, grads, inputs


@dataclass
class AdamaxState:
    lr: float = 0.002
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    u: dict[str, np.ndarray] = field(default_factory=dict)


def adamax_step(
    model: RankerModel, grads: dict[str, np.ndarray], state: AdamaxState
) -> None:
    """In-place Adamax update: infinity-norm variant of Adam."""
    state.step += 1
    t = state.step
    correction = 1.0 - state.beta1**t
    for name, g in sorted(grads.items()):
        param = model.params[name]
        m = state.m.setdefault(name, np.zeros_like(param))
        u = state.u.setdefault(name, np.zeros_like(param))
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        np.maximum(state.beta2 * u, np.abs(g), out=u)
        param -= (state.lr / correction) * m / (u + state.eps)


def clip_gradients(grads: dict[str, np.ndarray], max_norm: float) -> float:
    """Global-norm clip; returns the pre-clip norm."""
    total = float(np.sqrt(sum(float((g * g).sum()) for g in grads.values())))
    if max_norm > 0.0 and total > max_norm:
        scale = max_norm / total
        for g in grads.values():
            g *= scale
    return total


@dataclass
class TrainData:
    x_slice: np.ndarray  # (N, L_slice, d) embedded, pad rows zero
    m_slice: np.ndarray  # (N, L_slice) bool
    x_stmt: np.ndarray
    m_stmt: np.ndarray
    labels: np.ndarray  # (N,) class indices, 0 = TP


def train(
    model: RankerModel,
    data: TrainData,
    epochs: int,
    batch_size: int,
    rng_shuffle: np.random.Generator,
    rng_dropout: np.random.Generator,
    state: Optional[AdamaxState] = None,
    lr: float = 0.002,
    log=None,
) -> tuple[AdamaxState, list[float]]:
    """Minibatch training; deterministic given the generators' states."""
    if state is None:
        state = AdamaxState(lr=lr)
    n = data.labels.shape[0]
    losses = []
    for _epoch in range(epochs):
        order = rng_shuffle.permutation(n)
        epoch_loss = 0.0
        n_batches = 0
        for start in range(0, n, batch_size):
            idx = order[start : start + batch_size]
            loss, grads, _ = loss_and_grads(
                model,
                data.x_slice[idx],
                data.m_slice[idx],
                data.x_stmt[idx] if model.config.use_stmt_branch else None,
                data.m_stmt[idx] if model.config.use_stmt_branch else None,
                data.labels[idx],
                train_mode=True,
                rng=rng_dropout,
            )
            pre_norm = clip_gradients(grads, model.config.clip_norm)
            if log is not None and pre_norm > model.config.clip_norm > 0:
                log(f"gradient norm {pre_norm:.2f} clipped to {model.config.clip_norm}")
            adamax_step(model, grads, state)
            epoch_loss += loss
            n_batches += 1
        losses.append(epoch_loss / max(n_batches, 1))
    return state, losses


def predict_tp_scores(
    model: RankerModel, data: TrainData, batch_size: int = 256
) -> np.ndarray:
    """p_tp per row, evaluated without dropout."""
    n = data.labels.shape[0]
    out = np.zeros(n)
    for start in range(0, n, batch_size):
        sl = slice(start, min(start + batch_size, n))
        probs, _ = forward(
            model,
            data.x_slice[sl],
            data.m_slice[sl],
            data.x_stmt[sl] if model.config.use_stmt_branch else None,
            data.m_stmt[sl] if model.config.use_stmt_branch else None,
            train_mode=False,
        )
        out[sl] = probs[:, 0]
    return out


# --- checkpointing -------------------------------------------------------------

_MODEL_MAGIC = b"WRNKMDL1"
CHECKPOINT_VERSION = 1


def save_model(
    path: str | Path,
    model: RankerModel,
    state: Optional[AdamaxState] = None,
    epoch: int = 0,
    rng_states: Optional[dict] = None,
) -> None:
    """Versioned binary checkpoint: header JSON + named float64 blocks.

    Layout: 8-byte magic, u32 header length, UTF-8 header JSON, then for each
    block (sorted by name) the raw little-endian float64 data. Block names,
    shapes, and order are recorded in the header.
    """
    cfg = model.config
    blocks: dict[str, np.ndarray] = dict(model.params)
    opt = None
    if state is not None:
        opt = {
            "lr": state.lr,
            "beta1": state.beta1,
            "beta2": state.beta2,
            "eps": state.eps,
            "step": state.step,
        }
        for name, arr in state.m.items():
            blocks[f"opt.m.{name}"] = arr
        for name, arr in state.u.items():
            blocks[f"opt.u.{name}"] = arr
    names = sorted(blocks)
    header = {
        "version": CHECKPOINT_VERSION,
        "epoch": epoch,
        "config": {
            "hidden": cfg.hidden,
            "dense_sizes": list(cfg.dense_sizes),
            "dropout": cfg.dropout,
            "use_stmt_branch": cfg.use_stmt_branch,
            "embed_dim": cfg.embed_dim,
            "clip_norm": cfg.clip_norm,
            "seed": cfg.seed,
        },
        "optimizer": opt,
        "rng_states": rng_states,
        "blocks": [{"name": n, "shape": list(blocks[n].shape)} for n in names],
    }
    payload = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MODEL_MAGIC)
        fh.write(np.uint32(len(payload)).tobytes())
        fh.write(payload)
        for n in names:
            fh.write(np.ascontiguousarray(blocks[n], dtype="<f8").tobytes())


def load_model(path: str | Path) -> tuple[RankerModel, Optional[AdamaxState], dict]:
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != _MODEL_MAGIC:
            raise ValueError(f"not a model checkpoint: {path}")
        (hlen,) = np.frombuffer(fh.read(4), dtype=np.uint32)
        header = json.loads(fh.read(int(hlen)).decode("utf-8"))
        cfg = ModelConfig(
            hidden=header["config"]["hidden"],
            dense_sizes=tuple(header["config"]["dense_sizes"]),
            dropout=header["config"]["dropout"],
            use_stmt_branch=header["config"]["use_stmt_branch"],
            embed_dim=header["config"]["embed_dim"],
            clip_norm=header["config"]["clip_norm"],
            seed=header["config"]["seed"],
        )
        blocks = {}
        for spec in header["blocks"]:
            shape = tuple(spec["shape"])
            count = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(fh.read(count * 8), dtype="<f8").reshape(shape).copy()
            blocks[spec["name"]] = data
    params = {n: a for n, a in blocks.items() if not n.startswith("opt.")}
    model = RankerModel(config=cfg, params=params)
    state = None
    if header.get("optimizer") is not None:
        opt = header["optimizer"]
        state = AdamaxState(
            lr=opt["lr"], beta1=opt["beta1"], beta2=opt["beta2"], eps=opt["eps"], step=opt["step"]
        )
        for n, a in blocks.items():
            if n.startswith("opt.m."):
                state.m[n[len("opt.m.") :]] = a
            elif n.startswith("opt.u."):
                state.u[n[len("opt.u.") :]] = a
    return model, state, header
