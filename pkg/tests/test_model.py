from __future__ import annotations

import numpy as np
import pytest

from dyngem import nn
from dyngem.errors import ConfigError, ParseError
from dyngem.graph import GraphSnapshot
from dyngem.model import (
    AutoencoderParams,
    Hyperparameters,
    build_autoencoder,
    embed,
    load_checkpoint,
    loss_global,
    loss_local,
    loss_net_batch,
    make_batch,
    penalty_matrix_row,
    reconstruct_scores,
    save_checkpoint,
    symmetrize_scores,
    train_snapshot,
)
from helpers import finite_difference_max_rel_error, jittered_model_and_batch, random_snapshot, toy_hyper


def test_hyperparameters_validation():
    Hyperparameters()
    bad = [
        dict(alpha=-1.0),
        dict(beta=1.0),
        dict(nu1=-1e-9),
        dict(nu2=-1e-9),
        dict(rho=0.0),
        dict(rho=1.0),
        dict(d=0),
        dict(base_lr=0.0),
        dict(momentum=1.0),
        dict(momentum=-0.1),
        dict(decay=-1.0),
        dict(batch_size=0),
        dict(epochs_first=-1),
        dict(epochs_warm=-1),
        dict(seed=-1),
    ]
    for kwargs in bad:
        with pytest.raises(ConfigError):
            Hyperparameters(**kwargs)


def test_build_autoencoder_shapes_and_init():
    params = build_autoencoder(20, (12, 6), 3, seed=4)
    assert params.encoder_sizes == (20, 12, 6, 3)
    assert params.decoder_sizes == (3, 6, 12, 20)
    assert params.hidden_sizes == (12, 6)
    assert params.is_mirrored
    assert params.n == 20 and params.d == 3
    for layer in params.layers():
        bound = np.sqrt(6.0 / (layer.in_dim + layer.out_dim))
        assert np.all(np.abs(layer.weights) <= bound)
        np.testing.assert_array_equal(layer.bias, np.zeros(layer.out_dim))
    again = build_autoencoder(20, (12, 6), 3, seed=4)
    for a, b in zip(params.layers(), again.layers()):
        np.testing.assert_array_equal(a.weights, b.weights)
    with pytest.raises(ValueError):
        build_autoencoder(20, (0, 6), 3, seed=4)


def test_autoencoder_params_chain_validation():
    enc = [nn.LayerParams(np.zeros((4, 6)), np.zeros(4)), nn.LayerParams(np.zeros((2, 4)), np.zeros(2))]
    dec = [nn.LayerParams(np.zeros((4, 2)), np.zeros(4)), nn.LayerParams(np.zeros((6, 4)), np.zeros(6))]
    AutoencoderParams(enc, dec)
    with pytest.raises(ValueError):
        AutoencoderParams(enc, dec[:1])
    with pytest.raises(ValueError):
        AutoencoderParams([enc[0]], dec)
    bad_chain = [nn.LayerParams(np.zeros((4, 6)), np.zeros(4)), nn.LayerParams(np.zeros((2, 5)), np.zeros(2))]
    with pytest.raises(ValueError):
        AutoencoderParams(bad_chain, dec)


def test_penalty_matrix_row():
    np.testing.assert_array_equal(penalty_matrix_row([0.0, 2.0, 0.0], 5.0), [1.0, 5.0, 1.0])
    with pytest.raises(ValueError):
        penalty_matrix_row([0.0], 1.0)


def test_loss_global_hand_case():
    # ((0-1)*5)^2 = 25
    assert loss_global([1.0, 0.0], [0.0, 0.0], [5.0, 1.0]) == 25.0
    with pytest.raises(ValueError):
        loss_global([1.0], [1.0, 2.0], [1.0, 1.0])


def test_loss_local_hand_case():
    # s * ||(2,0)||^2 = 1*4 and 2*4
    assert loss_local([3.0, 1.0], [1.0, 1.0], 1.0) == 4.0
    assert loss_local([3.0, 1.0], [1.0, 1.0], 2.0) == 8.0
    with pytest.raises(ValueError):
        loss_local([1.0], [1.0, 2.0], 1.0)


def test_loss_net_batch_term_decomposition():
    params, batch = jittered_model_and_batch(0)
    hyper = toy_hyper()
    total, parts, _ = loss_net_batch(params, batch, hyper)
    assert total == pytest.approx(
        parts["global"] + hyper.alpha * parts["local"] + hyper.nu1 * parts["l1"] + hyper.nu2 * parts["l2"]
    )
    # recompute each raw term independently through the forward pass
    x = np.vstack([batch.x_head, batch.x_tail])
    y = nn.forward(params.encoder, x)[-1]
    x_hat = nn.forward(params.decoder, y)[-1]
    b = np.where(x == 0.0, 1.0, hyper.beta)
    assert parts["global"] == pytest.approx(loss_global(x, x_hat, b))
    m = batch.heads.size
    local = sum(loss_local(y[k], y[m + k], batch.weights[k]) for k in range(m))
    assert parts["local"] == pytest.approx(local)
    l1 = sum(float(np.abs(l.weights).sum()) for l in params.layers())
    l2 = sum(float((l.weights ** 2).sum()) for l in params.layers())
    assert parts["l1"] == pytest.approx(l1)
    assert parts["l2"] == pytest.approx(l2)


def test_loss_net_batch_gradients_match_finite_differences():
    for seed in (1, 2, 3):
        params, batch = jittered_model_and_batch(seed)
        err = finite_difference_max_rel_error(params, batch, toy_hyper())
        assert err <= 1e-4, f"seed {seed}: rel err {err:.3e}"


def test_loss_net_batch_width_mismatch():
    params, _ = jittered_model_and_batch(0)
    other = random_snapshot(np.random.default_rng(9), params.n + 2)
    edges = other.edges()
    batch = make_batch(other, [edges[0][0]], [edges[0][1]], [edges[0][2]])
    with pytest.raises(ValueError):
        loss_net_batch(params, batch, toy_hyper())


def test_train_snapshot_trace_and_determinism():
    rng = np.random.default_rng(2)
    snap = random_snapshot(rng, 15)
    hyper = toy_hyper(base_lr=1e-4, batch_size=8)
    a = build_autoencoder(15, (10, 6), 3, seed=1)
    b = build_autoencoder(15, (10, 6), 3, seed=1)
    _, trace_a = train_snapshot(a, snap, hyper, epochs=5, seed=42)
    _, trace_b = train_snapshot(b, snap, hyper, epochs=5, seed=42)
    assert len(trace_a) == 5
    assert trace_a == trace_b
    for la, lb in zip(a.layers(), b.layers()):
        np.testing.assert_array_equal(la.weights, lb.weights)
        np.testing.assert_array_equal(la.bias, lb.bias)


def test_train_snapshot_zero_epochs_is_identity():
    snap = random_snapshot(np.random.default_rng(3), 12)
    params = build_autoencoder(12, (8, 4), 3, seed=0)
    before = [l.weights.copy() for l in params.layers()]
    _, trace = train_snapshot(params, snap, toy_hyper(), epochs=0)
    assert trace == []
    for w0, layer in zip(before, params.layers()):
        np.testing.assert_array_equal(w0, layer.weights)


def test_train_snapshot_objective_decreases():
    snap = random_snapshot(np.random.default_rng(4), 20)
    params = build_autoencoder(20, (14, 8), 4, seed=2)
    hyper = toy_hyper(base_lr=2e-5, batch_size=16)
    _, trace = train_snapshot(params, snap, hyper, epochs=30, seed=7)
    assert np.isfinite(trace).all()
    assert trace[-1] < trace[0]


def test_train_snapshot_input_validation():
    snap = random_snapshot(np.random.default_rng(5), 10)
    params = build_autoencoder(12, (8, 4), 3, seed=0)
    with pytest.raises(ValueError):
        train_snapshot(params, snap, toy_hyper(), epochs=1)
    empty = GraphSnapshot(12)
    with pytest.raises(ValueError):
        train_snapshot(build_autoencoder(12, (8,), 3, seed=0), empty, toy_hyper(), epochs=1)


def test_checkpoint_roundtrip_exact(tmp_path):
    params = build_autoencoder(17, (9, 5), 3, seed=6)
    params.encoder[0].weights[0, 0] = 1.0 / 3.0  # not exactly representable in decimal
    path = save_checkpoint(params, tmp_path / "ck.txt")
    loaded = load_checkpoint(path)
    assert loaded.encoder_sizes == params.encoder_sizes
    assert loaded.decoder_sizes == params.decoder_sizes
    for a, b in zip(params.layers(), loaded.layers()):
        np.testing.assert_array_equal(a.weights, b.weights)
        np.testing.assert_array_equal(a.bias, b.bias)


def test_checkpoint_parse_errors(tmp_path):
    params = build_autoencoder(5, (4,), 2, seed=0)
    path = save_checkpoint(params, tmp_path / "ok.txt")
    good = path.read_text(encoding="utf-8").splitlines()

    cases = [
        ["not-a-header"] + good[1:],
        [good[0], "n 5 d 2"] + good[2:],
        [good[0], "n x d 2 K 2"] + good[2:],
        [good[0], "n 5 d 2 K 2", "bogus line"],
        good[:-1],  # truncated bias
        [good[0], good[1], good[2].replace("enc 1", "enc 2")] + good[3:],
    ]
    for k, lines in enumerate(cases):
        p = tmp_path / f"bad_{k}.txt"
        p.write_text("\n".join(lines) + "\n", encoding="utf-8")
        with pytest.raises(ParseError):
            load_checkpoint(p)

    # header dims disagreeing with layer shapes
    mismatched = [good[0], "n 6 d 2 K 2"] + good[2:]
    p = tmp_path / "mismatch.txt"
    p.write_text("\n".join(mismatched) + "\n", encoding="utf-8")
    with pytest.raises(ParseError):
        load_checkpoint(p)


def test_embed_and_reconstruct_shapes_and_blocks():
    rng = np.random.default_rng(6)
    snap = random_snapshot(rng, 23)
    params = build_autoencoder(23, (12, 6), 4, seed=3)
    y = embed(params, snap)
    assert y.shape == (23, 4)
    np.testing.assert_array_equal(y, embed(params, snap, block=5))
    rows = snap.dense_rows(np.arange(23))
    np.testing.assert_allclose(y, nn.forward(params.encoder, rows)[-1], atol=1e-15)
    scores = reconstruct_scores(params, snap)
    assert scores.shape == (23, 23)
    np.testing.assert_array_equal(scores, reconstruct_scores(params, snap, block=7))
    np.testing.assert_allclose(scores, nn.forward(params.decoder, y)[-1], atol=1e-15)
    with pytest.raises(ValueError):
        embed(params, random_snapshot(rng, 9))


def test_symmetrize_scores():
    s = np.array([[0.0, 2.0], [4.0, 0.0]])
    np.testing.assert_array_equal(symmetrize_scores(s), [[0.0, 3.0], [3.0, 0.0]])
    with pytest.raises(ValueError):
        symmetrize_scores(np.zeros((2, 3)))
