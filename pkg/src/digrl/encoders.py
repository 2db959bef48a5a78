"""Twin LSTM auto-encoders over per-step context sequences.

The `current` encoder embeds the live trajectory prefix (penetration progress
and local terrain configuration); the `demo` encoder embeds whole
demonstration trajectories (terrain identity). Both train by reconstructing
the sequence from the latent alone: the decoder unrolls over a fixed-length
subsampled skeleton of the sequence (no teacher forcing: feeding ground-truth
inputs lets the decoder ignore the latent, which empties it of information),
and an auxiliary head regresses the sequence's per-dimension mean and spread
from the latent. Both signals are derived from the input sequence itself; no
terrain labels are involved. The `current` encoder reads the final hidden
state (progress); the `demo` encoder mean-pools hidden states over time
(sequence statistics). Once trained they are frozen: policies consume their
outputs as fixed observation features.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .autodiff import Tensor, as_tensor
from .errors import NumericError
from .nn import (AdamState, ParamSet, adam_update, init_dense, init_lstm,
                 load_arrays, lstm_cell, save_arrays)
from .obs import CONTEXT_DIM, LATENT_DIM, NormStats

ENCODER_HIDDEN = 256


@dataclass
class EncoderParams:
    role: str  # "current" | "demo"
    encoder: ParamSet
    decoder: ParamSet
    heads: ParamSet  # latent projection, decoder init, reconstruction head
    stats: NormStats
    pooling: str = "final"  # "final" (current) | "mean" (demo)
    latent_dim: int = LATENT_DIM
    hidden: int = ENCODER_HIDDEN
    train_seed: int = 0
    loss_history: list[float] = field(default_factory=list)

    def trainables(self) -> list[Tensor]:
        named = []
        for ps in (self.encoder, self.decoder, self.heads):
            named += [t for n, t in zip(ps.names(), ps.tensors())
                      if not n.startswith("meta.")]
        return named


DECODER_SKELETON_STEPS = 24


def init_encoder(role: str, seed: int, stats: NormStats,
                 latent_dim: int = LATENT_DIM,
                 hidden: int = ENCODER_HIDDEN) -> EncoderParams:
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xE0C0]))
    encoder = init_lstm(CONTEXT_DIM, hidden, rng)
    decoder = init_lstm(CONTEXT_DIM, hidden, rng)
    heads = ParamSet()
    init_dense(heads, "to_latent", hidden, latent_dim, rng)
    init_dense(heads, "dec_h0", latent_dim, hidden, rng)
    init_dense(heads, "dec_c0", latent_dim, hidden, rng)
    init_dense(heads, "out", hidden, CONTEXT_DIM, rng)
    init_dense(heads, "aux", latent_dim, AUX_DIM, rng)
    return EncoderParams(role=role, encoder=encoder, decoder=decoder,
                         heads=heads, stats=stats,
                         pooling="mean" if role == "demo" else "final",
                         latent_dim=latent_dim, hidden=hidden, train_seed=seed)


# --- fast inference (no tape) ---

def _cell_np(params: ParamSet, x: np.ndarray, h: np.ndarray, c: np.ndarray):
    n_hidden = int(params["meta.dims"].data[1])
    gates = x @ params["Wx"].data + h @ params["Wh"].data + params["b"].data
    sig = lambda v: 1.0 / (1.0 + np.exp(-v))
    i = sig(gates[:, :n_hidden])
    f = sig(gates[:, n_hidden:2 * n_hidden])
    g = np.tanh(gates[:, 2 * n_hidden:3 * n_hidden])
    o = sig(gates[:, 3 * n_hidden:])
    c_new = f * c + i * g
    return o * np.tanh(c_new), c_new


def _project_latent(enc: EncoderParams, h: np.ndarray) -> np.ndarray:
    return h @ enc.heads["to_latent.W"].data + enc.heads["to_latent.b"].data


def encode_current(enc: EncoderParams, prefix) -> np.ndarray:
    """Latent of the live prefix c_{1:t}; the empty prefix maps to zeros."""
    prefix = np.asarray(prefix, dtype=float).reshape(-1, CONTEXT_DIM) \
        if len(prefix) else np.zeros((0, CONTEXT_DIM))
    if prefix.shape[0] == 0:
        return np.zeros(enc.latent_dim)
    seq = enc.stats.normalize(prefix)
    h = np.zeros((1, enc.hidden))
    c = np.zeros((1, enc.hidden))
    pooled = np.zeros((1, enc.hidden))
    for t in range(seq.shape[0]):
        h, c = _cell_np(enc.encoder, seq[t:t + 1], h, c)
        if enc.pooling == "mean":
            pooled += h
    if enc.pooling == "mean":
        h = pooled / seq.shape[0]
    return _project_latent(enc, h)[0]


class IncrementalContextEncoder:
    """Streaming equivalent of encode_current: feeding contexts one at a time
    yields exactly the full-prefix recomputation (deterministic LSTM)."""

    def __init__(self, enc: EncoderParams):
        self.enc = enc
        self.h = np.zeros((1, enc.hidden))
        self.c = np.zeros((1, enc.hidden))
        self.h_sum = np.zeros((1, enc.hidden))
        self.steps = 0

    def feed(self, context: np.ndarray) -> np.ndarray:
        x = self.enc.stats.normalize(np.asarray(context, dtype=float))[None, :]
        self.h, self.c = _cell_np(self.enc.encoder, x, self.h, self.c)
        self.h_sum += self.h
        self.steps += 1
        return self.current()

    def current(self) -> np.ndarray:
        if self.steps == 0:
            return np.zeros(self.enc.latent_dim)
        if self.enc.pooling == "mean":
            return _project_latent(self.enc, self.h_sum / self.steps)[0]
        return _project_latent(self.enc, self.h)[0]


def encode_sequences(enc: EncoderParams, sequences: list[np.ndarray]) -> np.ndarray:
    """Batched latents for raw context sequences (inference only)."""
    if not sequences:
        raise ValueError("encode_sequences needs at least one sequence")
    lengths = np.array([len(s) for s in sequences])
    if np.any(lengths == 0):
        raise ValueError("sequences must be nonempty")
    order = np.argsort(-lengths, kind="stable")
    latents = np.zeros((len(sequences), enc.latent_dim))
    batch = 64
    for start in range(0, len(order), batch):
        idx = order[start:start + batch]
        seqs = [enc.stats.normalize(np.asarray(sequences[i], dtype=float))
                for i in idx]
        T = max(len(s) for s in seqs)
        X = np.zeros((len(idx), T, CONTEXT_DIM))
        valid = np.zeros((len(idx), T))
        for row, s in enumerate(seqs):
            X[row, :len(s)] = s
            valid[row, :len(s)] = 1.0
        h = np.zeros((len(idx), enc.hidden))
        c = np.zeros((len(idx), enc.hidden))
        pooled = np.zeros_like(h)
        for t in range(T):
            h, c = _cell_np(enc.encoder, X[:, t, :], h, c)
            if enc.pooling == "mean":
                pooled += h * valid[:, t:t + 1]
            else:
                rows = np.where(valid[:, t] > 0)[0]
                ends = [r for r in rows if len(seqs[r]) - 1 == t]
                if ends:
                    pooled[ends] = h[ends]
        if enc.pooling == "mean":
            pooled = pooled / np.array([len(s) for s in seqs])[:, None]
        latents[idx] = enc.heads["to_latent.b"].data + pooled @ enc.heads["to_latent.W"].data
    return latents


def encode_demo(enc: EncoderParams, trajectories: list, k: int) -> np.ndarray:
    """Mean-pooled latent over k demonstration trajectories of one terrain."""
    if k < 1 or not trajectories:
        raise ValueError("encode_demo needs k >= 1 trajectories")
    seqs = [t.contexts() for t in trajectories[:k]]
    return encode_sequences(enc, seqs).mean(axis=0)


# --- training ---

def _pad(seqs: list[np.ndarray]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    T = max(len(s) for s in seqs)
    B = len(seqs)
    X = np.zeros((B, T, CONTEXT_DIM))
    mask = np.zeros((B, T))
    last = np.zeros((B, T))
    for i, s in enumerate(seqs):
        X[i, :len(s)] = s
        mask[i, :len(s)] = 1.0
        last[i, len(s) - 1] = 1.0
    return X, mask, last


AUX_DIM = 2 * CONTEXT_DIM + 6


def sequence_summary(raw: np.ndarray, norm: np.ndarray) -> np.ndarray:
    """Self-supervised targets for the latent: per-dimension mean/spread of
    the normalized sequence plus conditional contact statistics (pressing
    load and depth, lateral/moment levels, force quantile, length) that
    isolate the material response from the policy."""
    m = norm.mean(axis=0)
    s = norm.std(axis=0)
    depth = -raw[:, 1]
    vz, fx, fz, mom = raw[:, 4], raw[:, 6], raw[:, 7], raw[:, 8]
    pressing = (vz < -0.001) & (depth > 0.005) & (fz > 0.5)
    if pressing.sum() >= 3:
        load = float(np.mean(fz[pressing]))
        press_depth = float(np.mean(depth[pressing]))
    else:
        load, press_depth = 0.0, 0.0
    lateral = np.abs(fx) > 0.5
    fric = float(np.mean(np.abs(fx[lateral]))) if lateral.sum() >= 3 else 0.0
    torque = np.abs(mom[mom != 0.0])
    mom_level = float(torque.mean()) if torque.size >= 3 else 0.0
    q90 = float(np.quantile(np.abs(fz), 0.9)) if len(fz) else 0.0
    extras = np.array([load / 50.0, press_depth / 0.05, fric / 50.0,
                       mom_level / 10.0, q90 / 50.0, len(raw) / 150.0])
    return np.concatenate([m, s, extras])


def _skeleton(seqs: list[np.ndarray], k: int) -> tuple[np.ndarray, np.ndarray]:
    """Fixed-length reconstruction targets: k evenly spaced steps per sequence."""
    B = len(seqs)
    Y = np.zeros((B, k, CONTEXT_DIM))
    mask = np.zeros((B, k))
    for i, s in enumerate(seqs):
        steps = min(k, len(s))
        idx = np.round(np.linspace(0, len(s) - 1, steps)).astype(int)
        Y[i, :steps] = s[idx]
        mask[i, :steps] = 1.0
    return Y, mask


def _training_loss(enc: EncoderParams, X: np.ndarray, mask: np.ndarray,
                   last: np.ndarray, Y: np.ndarray, y_mask: np.ndarray,
                   aux_target: np.ndarray) -> Tensor:
    B, T, _ = X.shape
    h = as_tensor(np.zeros((B, enc.hidden)))
    c = as_tensor(np.zeros((B, enc.hidden)))
    pooled = as_tensor(np.zeros((B, enc.hidden)))
    lengths = mask.sum(axis=1, keepdims=True)
    for t in range(T):
        h, c = lstm_cell(enc.encoder, as_tensor(X[:, t, :]), h, c)
        if enc.pooling == "mean":
            pooled = pooled + h * (mask[:, t:t + 1] / lengths)
        else:
            sel = last[:, t:t + 1]
            if sel.any():
                pooled = pooled + h * sel
    z = pooled @ enc.heads["to_latent.W"] + enc.heads["to_latent.b"]

    # Skeleton reconstruction: the decoder unrolls from the latent alone, so
    # every reconstruction bit must flow through z.
    dh = z @ enc.heads["dec_h0.W"] + enc.heads["dec_h0.b"]
    dc = z @ enc.heads["dec_c0.W"] + enc.heads["dec_c0.b"]
    zero_in = as_tensor(np.zeros((B, CONTEXT_DIM)))
    sq_err = as_tensor(0.0)
    for t in range(Y.shape[1]):
        dh, dc = lstm_cell(enc.decoder, zero_in, dh, dc)
        pred = dh @ enc.heads["out.W"] + enc.heads["out.b"]
        diff = (pred - Y[:, t, :]) * y_mask[:, t:t + 1]
        sq_err = sq_err + diff.square().sum()
    recon = sq_err * (1.0 / (float(y_mask.sum()) * CONTEXT_DIM))

    # Auxiliary self-supervision: summary statistics of the input sequence
    # regressed from the latent. They carry the slow features (terrain
    # identity, progress) the downstream policies need, so they get extra
    # weight.
    aux_pred = z @ enc.heads["aux.W"] + enc.heads["aux.b"]
    aux = (aux_pred - aux_target).square().mean()
    return recon + aux * 4.0


def train_autoencoder(dataset, which: str, epochs: int, seed: int,
                      latent_dim: int = LATENT_DIM,
                      hidden: int = ENCODER_HIDDEN,
                      lr: float = 3e-4,
                      batch_size: int = 16) -> EncoderParams:
    """Sequence-reconstruction training; `current` trains on uniformly sampled
    prefixes so inference-time prefix lengths stay in-distribution, `demo`
    trains on whole trajectories."""
    if which not in ("current", "demo"):
        raise ValueError(f"which must be 'current' or 'demo', got {which!r}")
    trajectories = [t for t in dataset.trajectories if len(t) > 0]
    if not trajectories:
        raise ValueError("cannot train an encoder on an empty dataset")

    enc = init_encoder(which, seed, dataset.norm_stats,
                       latent_dim=latent_dim, hidden=hidden)
    raw = [t.contexts() for t in trajectories]
    full = [enc.stats.normalize(r) for r in raw]
    tensors = enc.trainables()
    adam = AdamState.for_tensors(tensors, lr=lr)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xAE]))

    for epoch in range(epochs):
        if which == "current":
            cuts = [int(rng.integers(1, len(s) + 1)) for s in full]
            seqs = [s[:k] for s, k in zip(full, cuts)]
            targets = [sequence_summary(r[:k], s)
                       for r, s, k in zip(raw, seqs, cuts)]
        else:
            seqs = full
            targets = [sequence_summary(r, s) for r, s in zip(raw, seqs)]
        # standardize per dimension so low-variance statistics (depth levels,
        # friction) get the same gradient pressure as high-variance ones
        target_mat = np.array(targets)
        t_mu = target_mat.mean(axis=0)
        t_sd = target_mat.std(axis=0) + 1e-6
        targets = [(t - t_mu) / t_sd for t in targets]
        order = rng.permutation(len(seqs))
        # length-sorted batches limit padding waste; epoch order reshuffles
        order = order[np.argsort([-len(seqs[i]) for i in order], kind="stable")]
        epoch_loss = 0.0
        n_batches = 0
        for start in range(0, len(order), batch_size):
            idx = order[start:start + batch_size]
            batch_seqs = [seqs[i] for i in idx]
            X, mask, last = _pad(batch_seqs)
            Y, y_mask = _skeleton(batch_seqs, DECODER_SKELETON_STEPS)
            aux_target = np.array([targets[i] for i in idx])
            for t in tensors:
                t.grad = None
            loss = _training_loss(enc, X, mask, last, Y, y_mask, aux_target)
            value = float(loss.data)
            if not np.isfinite(value):
                raise NumericError(f"non-finite autoencoder loss at epoch {epoch}")
            loss.backward()
            adam_update(tensors, adam)
            epoch_loss += value
            n_batches += 1
        enc.loss_history.append(epoch_loss / n_batches)
    return enc


# --- persistence (nn-core checkpoint format with a role tag) ---

def save_encoder(path: str | Path, enc: EncoderParams) -> None:
    arrays = {}
    for prefix, ps in (("encoder", enc.encoder), ("decoder", enc.decoder),
                       ("heads", enc.heads)):
        for name in ps.names():
            arrays[f"{prefix}/{name}"] = ps[name].data
    arrays["stats/obs_mean"] = enc.stats.obs_mean
    arrays["stats/obs_std"] = enc.stats.obs_std
    meta = {"role": enc.role, "pooling": enc.pooling, "latent_dim": enc.latent_dim,
            "hidden": enc.hidden, "train_seed": enc.train_seed,
            "loss_history": enc.loss_history}
    save_arrays(path, arrays, meta)


def load_encoder(path: str | Path) -> EncoderParams:
    arrays, meta = load_arrays(path)
    sets = {"encoder": ParamSet(), "decoder": ParamSet(), "heads": ParamSet()}
    stats_arrays = {}
    for name, arr in arrays.items():
        prefix, rest = name.split("/", 1)
        if prefix == "stats":
            stats_arrays[rest] = arr
        else:
            sets[prefix].add(rest, arr)
    stats = NormStats(obs_mean=stats_arrays["obs_mean"],
                      obs_std=stats_arrays["obs_std"])
    return EncoderParams(role=meta["role"], encoder=sets["encoder"],
                         decoder=sets["decoder"], heads=sets["heads"],
                         stats=stats, pooling=meta.get("pooling", "final"),
                         latent_dim=int(meta["latent_dim"]),
                         hidden=int(meta["hidden"]),
                         train_seed=int(meta["train_seed"]),
                         loss_history=list(meta.get("loss_history", [])))
