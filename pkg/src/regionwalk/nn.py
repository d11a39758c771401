"""Small dense-network kernel with hand-written backprop.

Layers compute ``y = x @ W + b`` with ``W`` shaped ``(fan_in, fan_out)``;
hidden layers apply tanh, the output layer is linear.  All arithmetic is
float64.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .errors import SchemaError, ShapeError, TrainingError

CHECKPOINT_MAGIC = b"RWCKPT01"


class Mlp:
    def __init__(self, layer_dims, weights=None, biases=None):
        self.layer_dims = [int(d) for d in layer_dims]
        if len(self.layer_dims) < 2:
            raise ShapeError("an MLP needs at least an input and an output width")
        if weights is None:
            weights = [np.zeros((a, b)) for a, b in zip(self.layer_dims[:-1], self.layer_dims[1:])]
        if biases is None:
            biases = [np.zeros(b) for b in self.layer_dims[1:]]
        self.weights = [np.asarray(w, dtype=np.float64) for w in weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in biases]
        for w, b, a, o in zip(self.weights, self.biases, self.layer_dims[:-1], self.layer_dims[1:]):
            if w.shape != (a, o) or b.shape != (o,):
                raise ShapeError(f"layer shapes {w.shape}/{b.shape} do not chain for ({a}, {o})")

    @classmethod
    def glorot(cls, layer_dims, rng: np.random.Generator) -> "Mlp":
        ws, bs = [], []
        for a, b in zip(layer_dims[:-1], layer_dims[1:]):
            lim = np.sqrt(6.0 / (a + b))
            ws.append(rng.uniform(-lim, lim, size=(a, b)))
            bs.append(np.zeros(b))
        return cls(layer_dims, ws, bs)

    @property
    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    @property
    def in_dim(self):
        return self.layer_dims[0]

    @property
    def out_dim(self):
        return self.layer_dims[-1]

    def copy(self) -> "Mlp":
        return Mlp(self.layer_dims, [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def _check(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.in_dim:
            raise ShapeError(f"expected input width {self.in_dim}, got {x.shape[-1]}")
        return x

    def forward(self, x) -> np.ndarray:
        h = self._check(x)
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i < last:
                h = np.tanh(h)
        return h

    __call__ = forward

    def forward_train(self, x):
        """Forward pass that also returns the activations needed by ``backward``."""
        h = self._check(x)
        acts = [h]
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i < last:
                h = np.tanh(h)
            acts.append(h)
        return h, acts

    def backward(self, acts, grad_out):
        """Gradients for a batch: returns (param grads in ``params`` order, input grad)."""
        g = np.asarray(grad_out, dtype=np.float64)
        grads = [None] * (2 * len(self.weights))
        for i in range(len(self.weights) - 1, -1, -1):
            if i < len(self.weights) - 1:
                g = g * (1.0 - acts[i + 1] ** 2)
            x = acts[i]
            grads[2 * i] = x.T @ g if x.ndim == 2 else np.outer(x, g)
            grads[2 * i + 1] = g.sum(0) if g.ndim == 2 else g.copy()
            g = g @ self.weights[i].T
        return grads, g


def softmax(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_xent(logits, target):
    """Cross-entropy of ``softmax(logits)`` against class ``target``.

    Works on one logit vector (``target`` an int) or a batch (``target`` an
    int array); batch loss and gradient are means over rows.  Returns
    ``(loss, prob, dloss/dlogits)``.
    """
    z = np.asarray(logits, dtype=np.float64)
    shifted = z - z.max(axis=-1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    logp = shifted - log_norm
    prob = np.exp(logp)
    if z.ndim == 1:
        t = int(target)
        grad = prob.copy()
        grad[t] -= 1.0
        return float(-logp[t]), prob, grad
    t = np.asarray(target, dtype=np.int64)
    rows = np.arange(len(t))
    loss = float(-logp[rows, t].mean())
    grad = prob.copy()
    grad[rows, t] -= 1.0
    return loss, prob, grad / len(t)


class Adam:
    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params, grads):
        """Update ``params`` in place."""
        if len(params) != len(grads):
            raise ShapeError("parameter and gradient lists differ in length")
        for p, g in zip(params, grads):
            if p.shape != g.shape:
                raise ShapeError(f"gradient shape {g.shape} does not match parameter {p.shape}")
            if not np.all(np.isfinite(g)):
                raise TrainingError("non-finite gradient")
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
        return params


def finite_difference_grads(loss_fn, params, h=1e-5):
    """Central-difference gradient of ``loss_fn()`` w.r.t. each array in ``params``."""
    out = []
    for p in params:
        g = np.zeros_like(p)
        flat = p.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + h
            up = loss_fn()
            flat[i] = old - h
            down = loss_fn()
            flat[i] = old
            gflat[i] = (up - down) / (2 * h)
        out.append(g)
    return out


# -- checkpoint ---------------------------------------------------------------
#
# layout (little endian):
#   8 bytes  magic "RWCKPT01"
#   uint32   number of networks
#   per network:
#     uint32   number of widths L+1, then L+1 x uint32 widths
#     per layer: W (fan_in x fan_out float64, row-major), then b (float64)

def save_checkpoint(path, mlps, metadata=None):
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(mlps)))
        for net in mlps:
            fh.write(struct.pack("<I", len(net.layer_dims)))
            fh.write(struct.pack(f"<{len(net.layer_dims)}I", *net.layer_dims))
            for w, b in zip(net.weights, net.biases):
                fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
                fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())
    if metadata is not None:
        with open(str(path) + ".json", "w") as fh:
            json.dump(metadata, fh, indent=1)


def load_checkpoint(path):
    """Returns ``(mlps, metadata or None)``."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:8] != CHECKPOINT_MAGIC:
        raise SchemaError(f"{path}: not a checkpoint file")
    off = 8
    (count,) = struct.unpack_from("<I", data, off)
    off += 4
    mlps = []
    for _ in range(count):
        (nd,) = struct.unpack_from("<I", data, off)
        off += 4
        dims = list(struct.unpack_from(f"<{nd}I", data, off))
        off += 4 * nd
        ws, bs = [], []
        for a, b in zip(dims[:-1], dims[1:]):
            ws.append(np.frombuffer(data, "<f8", a * b, off).reshape(a, b).astype(np.float64))
            off += 8 * a * b
            bs.append(np.frombuffer(data, "<f8", b, off).astype(np.float64))
            off += 8 * b
        mlps.append(Mlp(dims, ws, bs))
    meta = None
    try:
        with open(str(path) + ".json") as fh:
            meta = json.load(fh)
    except FileNotFoundError:
        pass
    return mlps, meta
