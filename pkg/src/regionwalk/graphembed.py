"""node2vec over the region network: second-order biased walks, then
skip-gram with negative sampling trained by mini-batch SGD."""

from __future__ import annotations

import json
import struct
from collections import Counter
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ArgumentError, DegenerateGraphError, SchemaError, TrainingError
from .geo import CellId

EMBED_MAGIC = b"RWEMB001"


@dataclass
class WalkConfig:
    p: float = 1.0
    # larger q is taken as "explore further", matching the method's stated
    # choice rather than the usual node2vec reading
    q: float = 2.0
    walks_per_node: int = 20
    walk_length: int = 10
    window: int = 5
    negatives: int = 5
    dim: int = 32
    epochs: int = 5
    lr: float = 0.025
    batch_size: int = 512
    seed: int = 0

    def __post_init__(self):
        if self.p <= 0 or self.q <= 0:
            raise ArgumentError("p and q must be positive")
        for name in ("walks_per_node", "window", "negatives", "dim", "epochs", "batch_size"):
            if getattr(self, name) < 1:
                raise ArgumentError(f"{name} must be >= 1")
        if self.walk_length < 2:
            raise ArgumentError("walk_length must be >= 2")


@dataclass
class EmbeddingTable:
    cells: list[CellId]
    vectors: np.ndarray
    loss_curve: list[float] = field(default_factory=list)

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        self._index = {c: i for i, c in enumerate(self.cells)}

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __getitem__(self, c: CellId) -> np.ndarray:
        return self.vectors[self._index[c]]

    def __contains__(self, c):
        return c in self._index

    def matrix(self, cells) -> np.ndarray:
        """Rows for ``cells`` in the given order."""
        return self.vectors[[self._index[c] for c in cells]]


def transition_weights(prev, cur, out_nbrs, adjacent, p, q):
    """Unnormalised node2vec weights for stepping from ``cur`` given ``prev``.

    ``adjacent(a, b)`` is true when an edge joins a and b in either direction.
    """
    w = []
    for x in out_nbrs:
        if x == prev:
            w.append(1.0 / p)
        elif adjacent(prev, x):
            w.append(1.0)
        else:
            w.append(1.0 / q)
    return np.array(w)


def random_walks(network, cfg: WalkConfig, rng: np.random.Generator) -> list[list[CellId]]:
    """``walks_per_node`` walks from every cell, in rounds over the sorted cells."""
    nodes = list(network.cells)
    nbrs = network.out_neighbors()
    undirected = set()
    for a, b in network.edges:
        undirected.add((a, b))
        undirected.add((b, a))

    def adjacent(a, b):
        return (a, b) in undirected

    cache = {}
    walks = []
    for _ in range(cfg.walks_per_node):
        for start in nodes:
            walk = [start]
            while len(walk) < cfg.walk_length:
                cur = walk[-1]
                options = nbrs.get(cur)
                if not options:
                    break
                if len(walk) == 1:
                    walk.append(options[int(rng.integers(len(options)))])
                    continue
                key = (walk[-2], cur)
                probs = cache.get(key)
                if probs is None:
                    w = transition_weights(walk[-2], cur, options, adjacent, cfg.p, cfg.q)
                    probs = cache[key] = np.cumsum(w / w.sum())
                k = int(np.searchsorted(probs, rng.random(), side="right"))
                walk.append(options[min(k, len(options) - 1)])
            walks.append(walk)
    return walks


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _scatter_rows(n_rows, idx, values):
    """Row-wise sum of ``values`` into an ``(n_rows, d)`` array (repeats accumulate)."""
    order = np.argsort(idx, kind="stable")
    si = idx[order]
    starts = np.flatnonzero(np.r_[True, si[1:] != si[:-1]])
    out = np.zeros((n_rows, values.shape[1]))
    out[si[starts]] = np.add.reduceat(values[order], starts, axis=0)
    return out


def skipgram_pairs(walks, index, window):
    centers, contexts = [], []
    for walk in walks:
        ids = [index[c] for c in walk]
        n = len(ids)
        for i in range(n):
            for j in range(max(0, i - window), min(n, i + window + 1)):
                if j != i:
                    centers.append(ids[i])
                    contexts.append(ids[j])
    return np.array(centers, dtype=np.int64), np.array(contexts, dtype=np.int64)


def train_skipgram(walks, cfg: WalkConfig, rng: np.random.Generator, cells=None) -> EmbeddingTable:
    """Skip-gram with negative sampling.

    ``cells`` fixes the vocabulary order (defaults to the sorted walk tokens).
    Noise words follow the unigram distribution raised to 3/4; the learning
    rate decays linearly to 1e-4 of its start value.
    """
    if not walks:
        raise ArgumentError("no walks to train on")
    counts = Counter(c for w in walks for c in w)
    vocab = sorted(cells) if cells is not None else sorted(counts)
    if len(vocab) < 2:
        raise DegenerateGraphError("need at least two distinct cells to learn embeddings")
    index = {c: i for i, c in enumerate(vocab)}
    centers, contexts = skipgram_pairs(walks, index, cfg.window)
    if len(centers) == 0:
        raise DegenerateGraphError("walks contain no co-occurring cells")

    freq = np.array([counts.get(c, 0) for c in vocab], dtype=np.float64) ** 0.75
    noise = np.cumsum(freq / freq.sum())

    V, d = len(vocab), cfg.dim
    w_in = rng.uniform(-0.5 / d, 0.5 / d, size=(V, d))
    w_out = np.zeros((V, d))
    n_pairs = len(centers)
    # batched updates for the same row add up; on a small vocabulary a large
    # batch would pile hundreds of them onto one row and diverge
    batch = min(cfg.batch_size, 4 * V)
    total_steps = cfg.epochs * ((n_pairs + batch - 1) // batch)
    step = 0
    curve = []
    for _ in range(cfg.epochs):
        order = rng.permutation(n_pairs)
        epoch_loss = 0.0
        for s in range(0, n_pairs, batch):
            lr = cfg.lr * max(1e-4, 1.0 - step / total_steps)
            step += 1
            b = order[s:s + batch]
            c, o = centers[b], contexts[b]
            neg = np.minimum(np.searchsorted(noise, rng.random((len(b), cfg.negatives)), side="right"), V - 1)
            v = w_in[c]
            u_pos = w_out[o]
            u_neg = w_out[neg]
            s_pos = np.einsum("bd,bd->b", v, u_pos)
            s_neg = np.einsum("bd,bkd->bk", v, u_neg)
            sig_pos = _sigmoid(s_pos)
            sig_neg = _sigmoid(s_neg)
            epoch_loss += float(-np.log(sig_pos + 1e-12).sum() - np.log(1.0 - sig_neg + 1e-12).sum())
            # gradient-ascent coefficients of the log-likelihood
            g_pos = 1.0 - sig_pos
            g_neg = -sig_neg
            grad_v = g_pos[:, None] * u_pos + np.einsum("bk,bkd->bd", g_neg, u_neg)
            out_idx = np.concatenate([o, neg.reshape(-1)])
            out_upd = np.concatenate([g_pos[:, None] * v, (g_neg[:, :, None] * v[:, None, :]).reshape(-1, d)])
            w_out += lr * _scatter_rows(V, out_idx, out_upd)
            w_in += lr * _scatter_rows(V, c, grad_v)
        curve.append(epoch_loss / n_pairs)
    if not np.all(np.isfinite(w_in)) or np.abs(w_in).max() > np.finfo(np.float32).max:
        raise TrainingError("embedding training diverged")
    # round through float32 so the on-disk table reloads bit-identically
    return EmbeddingTable(vocab, w_in.astype(np.float32).astype(np.float64), curve)


def embed_network(network, cfg: WalkConfig, rng: np.random.Generator) -> EmbeddingTable:
    if not network.edges:
        raise DegenerateGraphError("network has no edges")
    walks = random_walks(network, cfg, rng)
    return train_skipgram(walks, cfg, rng, cells=network.cells)


# -- serialisation ------------------------------------------------------------
#
# binary layout (little endian):
#   8 bytes  magic "RWEMB001"
#   uint32   dim
#   uint32   count
#   count x (uint16 byte length, ASCII address)
#   count x dim float32, row-major

def save_embeddings(table: EmbeddingTable, path, config: WalkConfig | None = None):
    with open(path, "wb") as fh:
        fh.write(EMBED_MAGIC)
        fh.write(struct.pack("<II", table.dim, len(table.cells)))
        for c in table.cells:
            a = c.address.encode("ascii")
            fh.write(struct.pack("<H", len(a)))
            fh.write(a)
        fh.write(np.ascontiguousarray(table.vectors, dtype="<f4").tobytes())
    side = {"dim": table.dim, "count": len(table.cells), "loss_curve": table.loss_curve,
            "config": asdict(config) if config is not None else None}
    with open(str(path) + ".json", "w") as fh:
        json.dump(side, fh, indent=1)


def load_embeddings(path) -> EmbeddingTable:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:8] != EMBED_MAGIC:
        raise SchemaError(f"{path}: not an embedding file")
    dim, count = struct.unpack_from("<II", data, 8)
    off = 16
    cells = []
    for _ in range(count):
        (n,) = struct.unpack_from("<H", data, off)
        off += 2
        cells.append(CellId.parse(data[off:off + n].decode("ascii")))
        off += n
    vec = np.frombuffer(data, "<f4", count * dim, off).reshape(count, dim).astype(np.float64)
    curve = []
    try:
        with open(str(path) + ".json") as fh:
            curve = json.load(fh).get("loss_curve", [])
    except FileNotFoundError:
        pass
    return EmbeddingTable(cells, vec, curve)
