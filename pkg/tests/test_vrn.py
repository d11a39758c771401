import numpy as np
import pytest

from regionwalk import nn, vrn
from regionwalk.errors import ArgumentError, TrainingError
from regionwalk.geo import CellId
from regionwalk.hng import RegionNetwork, RegionSequence
from regionwalk.vrn import VrnConfig


def cells(n):
    return [CellId(5, i, 3) for i in range(n)]


def toy_network(seqs, vocab):
    edges = {(a, b) for s in seqs for a, b in zip(s[:-1], s[1:])}
    pts = {c: np.array([c.center().as_tuple()]) for c in vocab}
    return RegionNetwork(vocab, edges, pts, 2, 1.0, 9), [RegionSequence(f"s{i}", s) for i, s in enumerate(seqs)]


def test_positional_encoding():
    assert vrn.positional_encoding(0, 10) == 0.0
    assert vrn.positional_encoding(7, 10) == 7.0
    assert vrn.positional_encoding(7, 14, "normalized") == 0.5
    with pytest.raises(ArgumentError):
        vrn.positional_encoding(14, 14)


def test_belief_vector_examples(rng):
    e = rng.normal(size=(3, 4))
    assert np.array_equal(vrn.belief_vector([0, 1, 0], e, 1), e[1])
    same = np.tile(e[0], (2, 1))
    assert np.allclose(vrn.belief_vector([0.5, 0.5], same, 2), e[0])
    out = vrn.belief_vector([0.6, 0.3, 0.1], e, 2)
    assert np.allclose(out, 0.6 * e[0] + 0.3 * e[1])
    with pytest.raises(ArgumentError):
        vrn.belief_vector([1.0], e[:1], 0)


def test_top_indices_ties_to_first():
    assert vrn.top_indices([0.2, 0.4, 0.4, 0.0], 2).tolist() == [1, 2]


def _random_model(rng, V=12, dim=8, latent=4, kl=0.0):
    cfg = VrnConfig(latent_dim=latent, enc_hidden=(6,), dec_hidden=(7,), kl_weight=kl)
    return vrn.init_model(cells(V), rng.normal(size=(V, dim)), 20, cfg, rng)


@pytest.mark.parametrize("kl", [0.0, 0.3])
def test_full_loss_gradient_fd(rng, kl):
    model = _random_model(rng, kl=kl)
    for p in model.params:
        p += rng.normal(scale=0.1, size=p.shape)  # non-zero biases too
    ctx, tgt, pos = rng.integers(0, 12, 9), rng.integers(0, 12, 9), rng.integers(0, 20, 9)
    _, grads = vrn.loss_and_grads(model, ctx, tgt, pos)
    fd = nn.finite_difference_grads(lambda: vrn.loss_and_grads(model, ctx, tgt, pos)[0], model.params)
    for g, f in zip(grads, fd):
        assert np.allclose(g, f, rtol=1e-4, atol=1e-7)


def test_overfit_single_pair(rng):
    a, b = cells(2)
    net, seqs = toy_network([[a, b]], [a, b])
    emb = rng.normal(size=(2, 8))
    model = vrn.train(net, seqs, emb, VrnConfig(epochs=300, seed=1), m=2)
    z = model.encode(emb[1])
    assert int(np.argmax(model.logits(emb[0], z, model.pe(0)))) == 1


def test_corridor_loss_halves(fitted):
    curve = fitted.model.loss_curve
    assert len(curve) == VrnConfig().epochs
    assert curve[-1] <= 0.5 * curve[0]


def test_learning_rate_default():
    assert VrnConfig().lr == 1e-3


def test_latent_dictionary_entries(rng):
    a, b, c, d = cells(4)
    net, seqs = toy_network([[a, b], [a, c], [a, b, d]], [a, b, c, d])
    model = vrn.init_model(net.cells, rng.normal(size=(4, 5)), 3, VrnConfig(latent_dim=3), rng)
    dic = vrn.build_latent_dictionary(model, net, seqs)
    assert len(dic[a]) == 2
    assert any(np.array_equal(row, model.encode(model.embeddings[1])) for row in dic[a])
    assert c not in dic and d not in dic
    freq = vrn.build_latent_dictionary(model, net, seqs, mode="frequency")
    assert len(freq[a]) == 3


def test_training_errors(rng):
    a, b = cells(2)
    net, _ = toy_network([[a, b]], [a, b])
    with pytest.raises(TrainingError):
        vrn.train(net, [RegionSequence("x", [a])], rng.normal(size=(2, 3)), VrnConfig(epochs=1), m=2)
    with pytest.raises(ArgumentError):
        VrnConfig(pe_mode="sin")


def test_model_and_dictionary_round_trip(tmp_path, fitted):
    p = tmp_path / "m.ckpt"
    vrn.save_model(fitted.model, p)
    back = vrn.load_model(p)
    assert back.vocab == fitted.model.vocab and back.m == fitted.model.m
    assert np.array_equal(back.embeddings, fitted.model.embeddings)
    x = fitted.model.embeddings[0]
    z = back.encode(x)
    assert np.array_equal(back.logits(x, z, 3.0), fitted.model.logits(x, z, 3.0))
    q = tmp_path / "d.json"
    vrn.save_dictionary(fitted.dictionary, q)
    d2 = vrn.load_dictionary(q)
    assert set(d2.entries) == set(fitted.dictionary.entries)
    assert all(np.array_equal(d2[c], fitted.dictionary[c]) for c in d2.entries)
