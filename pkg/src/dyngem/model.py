"""Deep autoencoder over adjacency rows: weighted reconstruction plus
first-order proximity objective, minibatch training, and checkpoint I/O."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from dyngem import nn
from dyngem.errors import ConfigError, ParseError
from dyngem.nn import LayerParams, OptimizerState

CHECKPOINT_HEADER = "dyngem-checkpoint v1"


@dataclass(frozen=True)
class Hyperparameters:
    """Training knobs for the autoencoder objective and optimizer.

    The minibatch objective is
    ``L = L_glob + alpha * L_loc + nu1 * L1 + nu2 * L2`` summed over the
    sampled edge pairs without batch-size normalization, so ``base_lr``
    is coupled to ``batch_size``.
    """

    alpha: float = 1e-5
    beta: float = 5.0
    nu1: float = 1e-6
    nu2: float = 1e-6
    rho: float = 0.3
    d: int = 32
    base_lr: float = 1e-6
    momentum: float = 0.99
    decay: float = 1e-5
    batch_size: int = 256
    epochs_first: int = 50
    epochs_warm: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.alpha < 0:
            raise ConfigError("alpha must be non-negative")
        if self.beta <= 1:
            raise ConfigError("beta must be greater than 1")
        if self.nu1 < 0 or self.nu2 < 0:
            raise ConfigError("nu1 and nu2 must be non-negative")
        if not (0.0 < self.rho < 1.0):
            raise ConfigError("rho must lie strictly between 0 and 1")
        if self.d < 1:
            raise ConfigError("d must be at least 1")
        if self.base_lr <= 0:
            raise ConfigError("base_lr must be positive")
        if not (0.0 <= self.momentum < 1.0):
            raise ConfigError("momentum must lie in [0, 1)")
        if self.decay < 0:
            raise ConfigError("decay must be non-negative")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be at least 1")
        if self.epochs_first < 0 or self.epochs_warm < 0:
            raise ConfigError("epoch counts must be non-negative")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")


@dataclass
class AutoencoderParams:
    """Encoder and decoder layer stacks; the decoder mirrors the encoder.

    Individual growth transforms may leave the two sides transiently
    unmirrored; construction only enforces a consistent dimension chain,
    while ``is_mirrored`` reports the full symmetry that every complete
    growth plan restores.
    """

    encoder: list
    decoder: list

    def __post_init__(self):
        if not self.encoder or not self.decoder:
            raise ValueError("encoder and decoder each need at least one layer")
        for side in (self.encoder, self.decoder):
            for prev, cur in zip(side, side[1:]):
                if cur.in_dim != prev.out_dim:
                    raise ValueError("layer dimensions do not chain")
        if self.decoder[0].in_dim != self.encoder[-1].out_dim:
            raise ValueError("decoder input width must equal the embedding width")
        if self.decoder[-1].out_dim != self.encoder[0].in_dim:
            raise ValueError("decoder output width must equal the input width")

    @property
    def n(self):
        return self.encoder[0].in_dim

    @property
    def d(self):
        return self.encoder[-1].out_dim

    @property
    def encoder_sizes(self):
        return tuple([self.encoder[0].in_dim] + [l.out_dim for l in self.encoder])

    @property
    def decoder_sizes(self):
        return tuple([self.decoder[0].in_dim] + [l.out_dim for l in self.decoder])

    @property
    def hidden_sizes(self):
        return self.encoder_sizes[1:-1]

    @property
    def is_mirrored(self):
        return self.decoder_sizes == tuple(reversed(self.encoder_sizes))

    def layers(self):
        return list(self.encoder) + list(self.decoder)

    def copy(self):
        return AutoencoderParams(
            [l.copy() for l in self.encoder], [l.copy() for l in self.decoder]
        )


def init_layer(rng, out_dim, in_dim):
    """Uniform(-b, b) weights with b = sqrt(6 / (fan_in + fan_out)), zero bias."""
    bound = np.sqrt(6.0 / (in_dim + out_dim))
    return LayerParams(rng.uniform(-bound, bound, (out_dim, in_dim)), np.zeros(out_dim))


def build_autoencoder(n, hidden_sizes, d, seed):
    """Fresh mirrored autoencoder [n, *hidden_sizes, d, *reversed(hidden), n]."""
    sizes = [int(n), *[int(h) for h in hidden_sizes], int(d)]
    if any(s < 1 for s in sizes):
        raise ValueError("all layer sizes must be positive")
    rng = np.random.default_rng(seed)
    encoder = [init_layer(rng, o, i) for i, o in zip(sizes, sizes[1:])]
    rev = sizes[::-1]
    decoder = [init_layer(rng, o, i) for i, o in zip(rev, rev[1:])]
    return AutoencoderParams(encoder, decoder)


def penalty_matrix_row(s_i, beta):
    """Reconstruction weights b_i: beta where s_i is non-zero, 1 elsewhere."""
    if beta <= 1:
        raise ValueError("beta must be greater than 1")
    return np.where(np.asarray(s_i) == 0, 1.0, float(beta))


def loss_global(x, x_hat, b):
    """Weighted reconstruction error sum(((x_hat - x) * b)^2)."""
    x, x_hat, b = (np.asarray(a, dtype=np.float64) for a in (x, x_hat, b))
    if x.shape != x_hat.shape or x.shape != b.shape:
        raise ValueError("x, x_hat and b must share one shape")
    diff = (x_hat - x) * b
    return float(np.sum(diff * diff))


def loss_local(y_i, y_j, s_ij):
    """First-order proximity term s_ij * ||y_i - y_j||^2."""
    y_i, y_j = np.asarray(y_i, dtype=np.float64), np.asarray(y_j, dtype=np.float64)
    if y_i.shape != y_j.shape:
        raise ValueError("embeddings must share one shape")
    d = y_i - y_j
    return float(s_ij) * float(np.sum(d * d))


@dataclass
class TrainBatch:
    """A minibatch of edges with both endpoint adjacency rows gathered."""

    heads: np.ndarray
    tails: np.ndarray
    weights: np.ndarray
    x_head: np.ndarray
    x_tail: np.ndarray

    def __post_init__(self):
        m = self.heads.shape[0]
        if not (self.tails.shape[0] == self.weights.shape[0] == m):
            raise ValueError("batch arrays must share their leading length")
        if self.x_head.shape != self.x_tail.shape or self.x_head.shape[0] != m:
            raise ValueError("adjacency row blocks must match the edge count")
        if np.any(self.weights <= 0):
            raise ValueError("edge weights must be positive")


def make_batch(snapshot, heads, tails, weights):
    heads = np.asarray(heads, dtype=np.intp)
    tails = np.asarray(tails, dtype=np.intp)
    weights = np.asarray(weights, dtype=np.float64)
    return TrainBatch(heads, tails, weights, snapshot.dense_rows(heads), snapshot.dense_rows(tails))


def loss_net_batch(params, batch, hyper):
    """Objective value, per-term breakdown, and parameter gradients for one batch.

    Returns ``(total, parts, (encoder_grads, decoder_grads))`` where parts
    holds the raw, unweighted values of the four terms and
    ``total = global + alpha*local + nu1*l1 + nu2*l2``.
    """
    if batch.x_head.shape[1] != params.n:
        raise ValueError("batch row width does not match the model input width")
    m = batch.heads.shape[0]
    x = np.vstack([batch.x_head, batch.x_tail])
    acts_enc = nn.forward(params.encoder, x)
    y = acts_enc[-1]
    acts_dec = nn.forward(params.decoder, y)
    x_hat = acts_dec[-1]

    b = np.where(x == 0.0, 1.0, hyper.beta)
    diff = (x_hat - x) * b
    l_glob = float(np.sum(diff * diff))
    g_xhat = 2.0 * diff * b

    pair_diff = y[:m] - y[m:]
    sq = np.einsum("ij,ij->i", pair_diff, pair_diff)
    l_loc = float(batch.weights @ sq)
    g_y = np.zeros_like(y)
    g_y[:m] = (2.0 * hyper.alpha) * batch.weights[:, None] * pair_diff
    g_y[m:] = -g_y[:m]

    l1 = 0.0
    l2 = 0.0
    for layer in params.layers():
        w = layer.weights
        l1 += float(np.abs(w).sum())
        l2 += float((w * w).sum())

    dec_grads, g_y_rec = nn.backward(params.decoder, acts_dec, g_xhat)
    enc_grads, _ = nn.backward(params.encoder, acts_enc, g_y_rec + g_y)

    _, reg_grads = nn.regularizer_value_and_grads(params.layers(), hyper.nu1, hyper.nu2)
    k = len(params.encoder)
    enc_grads = [(gw + rw, gb + rb) for (gw, gb), (rw, rb) in zip(enc_grads, reg_grads[:k])]
    dec_grads = [(gw + rw, gb + rb) for (gw, gb), (rw, rb) in zip(dec_grads, reg_grads[k:])]

    total = l_glob + hyper.alpha * l_loc + hyper.nu1 * l1 + hyper.nu2 * l2
    parts = {"global": l_glob, "local": l_loc, "l1": l1, "l2": l2}
    return total, parts, (enc_grads, dec_grads)


def _flatten(params):
    flat = []
    for layer in params.layers():
        flat.append(layer.weights)
        flat.append(layer.bias)
    return flat


def train_snapshot(params, snapshot, hyper, epochs, seed=None):
    """Minibatch SGD over the snapshot's edge set, mutating params in place.

    Each epoch shuffles the edges with the seeded generator and consumes them
    in ``hyper.batch_size`` chunks; the Nesterov optimizer state is fresh per
    call.  Returns ``(params, trace)`` where ``trace[e]`` is the summed
    minibatch objective of epoch e (empty for ``epochs == 0``).
    """
    if snapshot.node_count != params.n:
        raise ValueError("snapshot node count does not match the model input width")
    if snapshot.edge_count == 0:
        raise ValueError("snapshot has no edges to train on")
    edges = snapshot.edges()
    heads = np.fromiter((e[0] for e in edges), dtype=np.intp, count=len(edges))
    tails = np.fromiter((e[1] for e in edges), dtype=np.intp, count=len(edges))
    weights = np.fromiter((e[2] for e in edges), dtype=np.float64, count=len(edges))

    rng = np.random.default_rng(hyper.seed if seed is None else seed)
    flat = _flatten(params)
    state = OptimizerState.for_params(flat, hyper.base_lr, hyper.momentum, hyper.decay)
    trace = []
    for _ in range(epochs):
        perm = rng.permutation(len(edges))
        epoch_loss = 0.0
        for start in range(0, len(edges), hyper.batch_size):
            idx = perm[start : start + hyper.batch_size]
            batch = make_batch(snapshot, heads[idx], tails[idx], weights[idx])
            total, _, (enc_grads, dec_grads) = loss_net_batch(params, batch, hyper)
            flat_grads = []
            for gw, gb in enc_grads + dec_grads:
                flat_grads.append(gw)
                flat_grads.append(gb)
            nn.nesterov_step(flat, flat_grads, state)
            epoch_loss += total
        trace.append(epoch_loss)
    return params, trace


def embed(params, snapshot, block=512):
    """Encode every adjacency row; returns the (node_count, d) embedding matrix."""
    if snapshot.node_count != params.n:
        raise ValueError("snapshot node count does not match the model input width")
    n = snapshot.node_count
    out = np.empty((n, params.d))
    for start in range(0, n, block):
        rows = snapshot.dense_rows(np.arange(start, min(start + block, n)))
        out[start : start + rows.shape[0]] = nn.forward(params.encoder, rows)[-1]
    return out


def reconstruct_scores(params, snapshot, block=512):
    """Decoder outputs for every node row; entry (i, j) scores j as a neighbor of i."""
    if snapshot.node_count != params.n:
        raise ValueError("snapshot node count does not match the model input width")
    n = snapshot.node_count
    out = np.empty((n, n))
    for start in range(0, n, block):
        rows = snapshot.dense_rows(np.arange(start, min(start + block, n)))
        y = nn.forward(params.encoder, rows)[-1]
        out[start : start + rows.shape[0]] = nn.forward(params.decoder, y)[-1]
    return out


def symmetrize_scores(scores):
    """Symmetric pair scores (s_ij + s_ji) / 2 used for ranking."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 2 or scores.shape[0] != scores.shape[1]:
        raise ValueError("scores must be a square matrix")
    return 0.5 * (scores + scores.T)


def save_checkpoint(params, path):
    """Write parameters as text; values keep 17 significant digits so the
    load/save round trip is exact for float64."""
    path = Path(path)
    lines = [CHECKPOINT_HEADER, f"n {params.n} d {params.d} K {len(params.encoder)}"]
    for tag, side in (("enc", params.encoder), ("dec", params.decoder)):
        for k, layer in enumerate(side, 1):
            lines.append(f"{tag} {k} {layer.out_dim} {layer.in_dim}")
            for row in layer.weights:
                lines.append(" ".join(f"{v:.17g}" for v in row))
            lines.append(" ".join(f"{v:.17g}" for v in layer.bias))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def _parse_floats(line, count, path, lineno):
    parts = line.split()
    if len(parts) != count:
        raise ParseError(f"{path}:{lineno}: expected {count} values, found {len(parts)}")
    try:
        return np.array([float(p) for p in parts])
    except ValueError:
        raise ParseError(f"{path}:{lineno}: non-numeric value") from None


def load_checkpoint(path):
    """Read a checkpoint written by :func:`save_checkpoint`."""
    path = Path(path)
    raw = path.read_text(encoding="utf-8").splitlines()
    if not raw or raw[0] != CHECKPOINT_HEADER:
        raise ParseError(f"{path}:1: expected header {CHECKPOINT_HEADER!r}")
    if len(raw) < 2:
        raise ParseError(f"{path}:2: missing dimension line")
    parts = raw[1].split()
    if len(parts) != 6 or parts[0] != "n" or parts[2] != "d" or parts[4] != "K":
        raise ParseError(f"{path}:2: expected 'n <n> d <d> K <K>'")
    try:
        n, d, k = int(parts[1]), int(parts[3]), int(parts[5])
    except ValueError:
        raise ParseError(f"{path}:2: dimensions must be integers") from None
    if n < 1 or d < 1 or k < 1:
        raise ParseError(f"{path}:2: dimensions must be positive")

    sides = {"enc": [], "dec": []}
    lineno = 2
    while lineno < len(raw):
        header = raw[lineno].split()
        lineno += 1
        if len(header) != 4 or header[0] not in sides:
            raise ParseError(f"{path}:{lineno}: expected 'enc|dec <k> <out> <in>'")
        try:
            idx, out_dim, in_dim = int(header[1]), int(header[2]), int(header[3])
        except ValueError:
            raise ParseError(f"{path}:{lineno}: layer header must be integers") from None
        if idx != len(sides[header[0]]) + 1:
            raise ParseError(f"{path}:{lineno}: layer index {idx} out of order")
        rows = []
        for _ in range(out_dim):
            if lineno >= len(raw):
                raise ParseError(f"{path}:{lineno + 1}: unexpected end of file in weights")
            rows.append(_parse_floats(raw[lineno], in_dim, path, lineno + 1))
            lineno += 1
        if lineno >= len(raw):
            raise ParseError(f"{path}:{lineno + 1}: unexpected end of file in bias")
        bias = _parse_floats(raw[lineno], out_dim, path, lineno + 1)
        lineno += 1
        sides[header[0]].append(LayerParams(np.array(rows).reshape(out_dim, in_dim), bias))

    if len(sides["enc"]) != k:
        raise ParseError(f"{path}: expected {k} encoder layers, found {len(sides['enc'])}")
    if not sides["dec"]:
        raise ParseError(f"{path}: missing decoder layers")
    params = AutoencoderParams(sides["enc"], sides["dec"])
    if params.n != n or params.d != d:
        raise ParseError(f"{path}: layer shapes disagree with the header dimensions")
    return params
