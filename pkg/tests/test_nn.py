import math

import numpy as np
import pytest

from regionwalk import nn
from regionwalk.errors import SchemaError, ShapeError, TrainingError
from regionwalk.nn import Adam, Mlp


def reference_forward(weights, biases, x):
    """Straight-line loop version: tanh on hidden layers, linear output."""
    h = [list(row) for row in np.atleast_2d(x)]
    for li, (w, b) in enumerate(zip(weights, biases)):
        out = []
        for row in h:
            z = [sum(row[i] * w[i][j] for i in range(len(row))) + b[j] for j in range(len(b))]
            out.append([math.tanh(v) for v in z] if li < len(weights) - 1 else z)
        h = out
    return np.array(h)


def test_zero_layer_gives_zero():
    net = Mlp([3, 4])
    assert np.array_equal(net.forward(np.array([1.0, -2.0, 5.0])), np.zeros(4))


def test_identity_layer():
    net = Mlp([2, 2], [np.eye(2)], [np.zeros(2)])
    assert net.forward(np.array([1.0, 2.0])).tolist() == [1.0, 2.0]


def test_three_layer_matches_reference(rng):
    net = Mlp.glorot([5, 7, 6, 3], rng)
    for b in net.biases:
        b[:] = rng.normal(size=b.shape)
    x = rng.normal(size=(4, 5))
    ref = reference_forward([w.tolist() for w in net.weights], [b.tolist() for b in net.biases], x)
    assert np.allclose(net.forward(x), ref, atol=1e-6)


def test_shape_errors():
    with pytest.raises(ShapeError):
        Mlp([3])
    with pytest.raises(ShapeError):
        Mlp([2, 2], [np.zeros((3, 2))], [np.zeros(2)])
    with pytest.raises(ShapeError):
        Mlp([2, 2]).forward(np.zeros(3))


def test_softmax_equal_logits():
    V = 7
    loss, prob, _ = nn.softmax_xent(np.full(V, 3.3), 2)
    assert np.allclose(prob, 1 / V)
    assert loss == pytest.approx(math.log(V))


def test_softmax_no_overflow():
    loss, prob, grad = nn.softmax_xent(np.array([1000.0, 0.0]), 0)
    assert np.all(np.isfinite([loss, *prob, *grad]))
    assert prob[0] == pytest.approx(1.0) and prob[1] == pytest.approx(0.0)


def test_softmax_xent_grad_fd(rng):
    z = rng.normal(size=8)
    _, _, g = nn.softmax_xent(z, 5)
    fd = nn.finite_difference_grads(lambda: nn.softmax_xent(z, 5)[0], [z])[0]
    assert np.allclose(g, fd, rtol=1e-4, atol=1e-9)


def test_batch_softmax_xent_is_mean(rng):
    z = rng.normal(size=(6, 4))
    t = rng.integers(0, 4, size=6)
    loss, _, g = nn.softmax_xent(z, t)
    singles = [nn.softmax_xent(z[i], t[i]) for i in range(6)]
    assert loss == pytest.approx(np.mean([s[0] for s in singles]))
    assert np.allclose(g, np.array([s[2] for s in singles]) / 6)


def test_mlp_backward_fd(rng):
    net = Mlp.glorot([4, 5, 3], rng)
    x = rng.normal(size=(3, 4))
    t = np.array([0, 2, 1])

    def loss():
        return nn.softmax_xent(net.forward(x), t)[0]

    out, acts = net.forward_train(x)
    _, _, dout = nn.softmax_xent(out, t)
    grads, gin = net.backward(acts, dout)
    fd = nn.finite_difference_grads(loss, net.params)
    for a, b in zip(grads, fd):
        assert np.allclose(a, b, rtol=1e-4, atol=1e-8)
    fdx = nn.finite_difference_grads(loss, [x])[0]
    assert np.allclose(gin, fdx, rtol=1e-4, atol=1e-8)


def test_adam_converges_on_quadratic():
    w = np.zeros(1)
    opt = Adam([w], lr=0.1)
    for _ in range(500):
        opt.step([w], [2 * (w - 3)])
    assert abs(w[0] - 3) < 1e-2


def test_adam_zero_gradient_keeps_params():
    w = np.array([1.0, -2.0])
    opt = Adam([w], lr=0.1)
    opt.step([w], [np.zeros(2)])
    assert w.tolist() == [1.0, -2.0]
    assert opt.t == 1


def test_adam_deterministic():
    def run():
        rng = np.random.default_rng(3)
        w = rng.normal(size=4)
        opt = Adam([w], lr=0.05)
        for _ in range(50):
            opt.step([w], [np.sin(w) + rng.normal(size=4)])
        return w
    assert np.array_equal(run(), run())


def test_adam_rejects_nan_and_shape():
    w = np.zeros(2)
    opt = Adam([w])
    with pytest.raises(TrainingError):
        opt.step([w], [np.array([np.nan, 0.0])])
    with pytest.raises(ShapeError):
        opt.step([w], [np.zeros(3)])


def test_checkpoint_round_trip(tmp_path, rng):
    nets = [Mlp.glorot([3, 4, 2], rng), Mlp.glorot([2, 5], rng)]
    p = tmp_path / "x.ckpt"
    nn.save_checkpoint(p, nets, {"hello": 1})
    back, meta = nn.load_checkpoint(p)
    assert meta == {"hello": 1}
    for a, b in zip(nets, back):
        assert a.layer_dims == b.layer_dims
        assert all(np.array_equal(u, v) for u, v in zip(a.params, b.params))
    (tmp_path / "bad").write_bytes(b"nope")
    with pytest.raises(SchemaError):
        nn.load_checkpoint(tmp_path / "bad")
