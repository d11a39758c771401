"""Encoder/decoder over consecutive region pairs plus the latent dictionary.

Training example for each transition ``(a, b)`` at position ``t``:

    z      = encoder(emb[b])
    logits = decoder([emb[a], z, pe(t)])
    loss   = cross_entropy(logits, index(b))

Generation later swaps ``emb[a]`` for a belief vector and draws ``z`` from the
latent dictionary of the current cell.
"""

from __future__ import annotations

import json
import logging
from collections import defaultdict
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ArgumentError, SchemaError, TrainingError
from .geo import CellId
from .nn import Adam, Mlp, load_checkpoint, save_checkpoint, softmax_xent

log = logging.getLogger(__name__)


@dataclass
class VrnConfig:
    latent_dim: int = 16
    enc_hidden: tuple = (64,)
    dec_hidden: tuple = (64,)
    top_y: int = 5
    epochs: int = 60
    lr: float = 1e-3
    batch_size: int = 32
    seed: int = 0
    pe_mode: str = "raw"  # or "normalized"
    kl_weight: float = 0.0
    dict_mode: str = "distinct"  # or "frequency"

    def __post_init__(self):
        self.enc_hidden = tuple(int(h) for h in self.enc_hidden)
        self.dec_hidden = tuple(int(h) for h in self.dec_hidden)
        if self.pe_mode not in ("raw", "normalized"):
            raise ArgumentError(f"unknown pe_mode {self.pe_mode!r}")
        if self.dict_mode not in ("distinct", "frequency"):
            raise ArgumentError(f"unknown dict_mode {self.dict_mode!r}")
        if self.top_y < 1 or self.latent_dim < 1 or self.epochs < 1:
            raise ArgumentError("top_y, latent_dim and epochs must be >= 1")


def positional_encoding(step: int, m: int, mode: str = "raw") -> float:
    if not 0 <= step < m:
        raise ArgumentError(f"step {step} outside [0, {m})")
    return float(step) if mode == "raw" else step / m


@dataclass
class VrnModel:
    vocab: list[CellId]
    embeddings: np.ndarray  # (V, dim), rows aligned with vocab
    encoder: Mlp
    decoder: Mlp
    config: VrnConfig
    m: int
    start_counts: np.ndarray  # how often each vocab cell opens a training sequence
    loss_curve: list[float] = field(default_factory=list)

    def __post_init__(self):
        self._index = {c: i for i, c in enumerate(self.vocab)}

    def index(self, c: CellId) -> int:
        return self._index[c]

    @property
    def dim(self) -> int:
        return self.embeddings.shape[1]

    def pe(self, step: int) -> float:
        return positional_encoding(step, self.m, self.config.pe_mode)

    def encode(self, emb) -> np.ndarray:
        return self.encoder.forward(emb)

    def logits(self, context, z, pe) -> np.ndarray:
        context = np.asarray(context, dtype=np.float64)
        z = np.asarray(z, dtype=np.float64)
        if context.ndim == 1:
            x = np.concatenate([context, z, [pe]])
        else:
            x = np.concatenate([context, z, np.reshape(pe, (-1, 1))], axis=1)
        return self.decoder.forward(x)

    @property
    def params(self):
        return self.encoder.params + self.decoder.params


def transitions(sequences, vocab_index):
    """(context idx, target idx, position) arrays for every consecutive pair."""
    ctx, tgt, pos = [], [], []
    for s in sequences:
        cells = s.cells if hasattr(s, "cells") else s
        for t in range(len(cells) - 1):
            ctx.append(vocab_index[cells[t]])
            tgt.append(vocab_index[cells[t + 1]])
            pos.append(t)
    return np.array(ctx, dtype=np.int64), np.array(tgt, dtype=np.int64), np.array(pos, dtype=np.int64)


def init_model(vocab, embeddings, m, cfg: VrnConfig, rng, start_counts=None) -> VrnModel:
    emb = np.asarray(embeddings, dtype=np.float64)
    dim = emb.shape[1]
    enc = Mlp.glorot([dim, *cfg.enc_hidden, cfg.latent_dim], rng)
    dec = Mlp.glorot([dim + cfg.latent_dim + 1, *cfg.dec_hidden, len(vocab)], rng)
    if start_counts is None:
        start_counts = np.ones(len(vocab))
    return VrnModel(list(vocab), emb, enc, dec, cfg, int(m), np.asarray(start_counts, dtype=np.float64))


def loss_and_grads(model: VrnModel, ctx, tgt, pos):
    """Mean cross-entropy over a batch and its gradient for ``model.params``."""
    emb = model.embeddings
    pe = np.array([model.pe(int(t)) for t in pos], dtype=np.float64)
    z, enc_acts = model.encoder.forward_train(emb[tgt])
    x = np.concatenate([emb[ctx], z, pe[:, None]], axis=1)
    logits, dec_acts = model.decoder.forward_train(x)
    loss, _, dlogits = softmax_xent(logits, tgt)
    dec_grads, dx = model.decoder.backward(dec_acts, dlogits)
    dz = dx[:, model.dim:model.dim + model.config.latent_dim]
    kl = model.config.kl_weight
    if kl:
        # deterministic-encoder stand-in for KL(N(z, I) || N(0, I))
        loss += kl * 0.5 * float((z ** 2).sum(1).mean())
        dz = dz + kl * z / len(tgt)
    enc_grads, _ = model.encoder.backward(enc_acts, dz)
    return loss, enc_grads + dec_grads


def train(network, sequences, embeddings, cfg: VrnConfig, m: int | None = None) -> VrnModel:
    """Fit the encoder/decoder on every consecutive region pair."""
    vocab = list(network.cells)
    emb = embeddings.matrix(vocab) if hasattr(embeddings, "matrix") else np.asarray(embeddings)
    index = {c: i for i, c in enumerate(vocab)}
    ctx, tgt, pos = transitions(sequences, index)
    if len(ctx) == 0:
        raise TrainingError("no transitions to train on")
    if m is None:
        m = max(len(s.cells) for s in sequences)
    starts = np.zeros(len(vocab))
    for s in sequences:
        starts[index[s.cells[0]]] += 1

    rng = np.random.default_rng(cfg.seed)
    model = init_model(vocab, emb, m, cfg, rng, starts)
    params = model.params
    opt = Adam(params, lr=cfg.lr)
    n = len(ctx)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        total = 0.0
        for s in range(0, n, cfg.batch_size):
            b = order[s:s + cfg.batch_size]
            loss, grads = loss_and_grads(model, ctx[b], tgt[b], pos[b])
            if not np.isfinite(loss):
                raise TrainingError(f"loss diverged at epoch {epoch}")
            opt.step(params, grads)
            total += loss * len(b)
        model.loss_curve.append(total / n)
        log.debug("epoch %d loss %.4f", epoch, model.loss_curve[-1])
    return model


# -- latent dictionary ----------------------------------------------------------

@dataclass
class LatentDictionary:
    entries: dict[CellId, np.ndarray]

    def __contains__(self, c):
        return c in self.entries

    def __getitem__(self, c) -> np.ndarray:
        return self.entries[c]

    def __len__(self):
        return len(self.entries)

    def sample(self, c: CellId, rng: np.random.Generator) -> np.ndarray:
        lat = self.entries[c]
        return lat[int(rng.integers(len(lat)))]


def build_latent_dictionary(model: VrnModel, network, sequences=None, mode=None) -> LatentDictionary:
    """Latent of every successor seen after each cell in training.

    ``mode="distinct"`` keeps one latent per distinct transition (from the
    network edges); ``"frequency"`` keeps one per occurrence in ``sequences``.
    """
    mode = mode or model.config.dict_mode
    succ = defaultdict(list)
    if mode == "distinct":
        for a, b in sorted(network.edges):
            succ[a].append(b)
    elif mode == "frequency":
        if sequences is None:
            raise ArgumentError("frequency mode needs the training sequences")
        for s in sequences:
            for a, b in zip(s.cells[:-1], s.cells[1:]):
                succ[a].append(b)
    else:
        raise ArgumentError(f"unknown dictionary mode {mode!r}")
    entries = {}
    for a in sorted(succ):
        targets = [model.index(b) for b in succ[a]]
        # one row at a time so each entry equals encode(emb) bit for bit
        entries[a] = np.array([model.encode(model.embeddings[t]) for t in targets])
    return LatentDictionary(entries)


def belief_vector(prob, embeddings, y: int) -> np.ndarray:
    """Sum of ``prob * embedding`` over the ``y`` most probable cells.

    Probabilities are used as-is (not renormalised); ties go to the earlier
    vocabulary entry.
    """
    if y < 1:
        raise ArgumentError("y must be >= 1")
    prob = np.asarray(prob, dtype=np.float64)
    top = top_indices(prob, y)
    return prob[top] @ np.asarray(embeddings, dtype=np.float64)[top]


def top_indices(prob, y):
    return np.argsort(-np.asarray(prob), kind="stable")[:y]


# -- serialisation ------------------------------------------------------------

def save_model(model: VrnModel, path):
    meta = {
        "format": "regionwalk-vrn",
        "vocab": [c.address for c in model.vocab],
        "m": model.m,
        "start_counts": model.start_counts.tolist(),
        "config": asdict(model.config),
        "loss_curve": model.loss_curve,
        "embeddings": model.embeddings.tolist(),
    }
    save_checkpoint(path, [model.encoder, model.decoder], meta)


def load_model(path) -> VrnModel:
    (enc, dec), meta = load_checkpoint(path)
    if not meta or meta.get("format") != "regionwalk-vrn":
        raise SchemaError(f"{path}: missing model metadata")
    cfg = VrnConfig(**meta["config"])
    vocab = [CellId.parse(a) for a in meta["vocab"]]
    return VrnModel(vocab, np.array(meta["embeddings"], dtype=np.float64), enc, dec, cfg, int(meta["m"]),
                    np.array(meta["start_counts"], dtype=np.float64), list(meta["loss_curve"]))


def dictionary_to_dict(d: LatentDictionary) -> dict:
    return {c.address: v.tolist() for c, v in d.entries.items()}


def dictionary_from_dict(raw: dict) -> LatentDictionary:
    return LatentDictionary({CellId.parse(a): np.array(v, dtype=np.float64) for a, v in raw.items()})


def save_dictionary(d: LatentDictionary, path):
    with open(path, "w") as fh:
        json.dump(dictionary_to_dict(d), fh)


def load_dictionary(path) -> LatentDictionary:
    with open(path) as fh:
        return dictionary_from_dict(json.load(fh))
