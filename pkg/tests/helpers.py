"""Shared test utilities: independent oracles and synthetic series builders.

The oracles here are deliberately written from the definitions (plain loops,
no shared code with the package) so the tests compare two routes.
"""

from __future__ import annotations

import numpy as np

from dyngem import nn
from dyngem.graph import DynamicGraph, GraphSnapshot, SbmConfig, generate_sbm_series
from dyngem.model import Hyperparameters, build_autoencoder, loss_net_batch, make_batch


def exhaustive_ap(scores_row, candidates, truth):
    """Average precision straight from the definition, O(c^2) loops.

    Candidates are ranked by descending score with ties broken by ascending
    id; returns None when truth is empty.
    """
    truth = set(truth)
    if not truth:
        return None
    ranked = sorted(candidates, key=lambda c: (-scores_row[c], c))
    hits = 0
    total = 0.0
    for rank, c in enumerate(ranked, 1):
        if c in truth:
            hits += 1
            total += hits / rank
    return total / len(truth)


def random_snapshot(rng, n, p=0.3, max_weight=2.0):
    """Random undirected weighted graph, guaranteed at least one edge."""
    while True:
        edges = {}
        for i in range(n - 1):
            for j in range(i + 1, n):
                if rng.random() < p:
                    edges[(i, j)] = float(rng.uniform(0.5, max_weight))
        if edges:
            return GraphSnapshot(n, edges)


def random_symmetric_scores(rng, n):
    r = rng.standard_normal((n, n))
    return (r + r.T) / 2.0


def _min_preactivation(params, x):
    """Smallest |pre-activation| over all layers of both stacks."""
    worst = np.inf
    a = np.asarray(x, dtype=np.float64)
    for layer in params.encoder + params.decoder:
        z = a @ layer.weights.T + layer.bias
        worst = min(worst, float(np.min(np.abs(z))))
        a = nn.relu(z)
    return worst


def jittered_model_and_batch(seed, n=12, hidden=(8, 5), d=3, batch_edges=6):
    """A small model/batch pair kept away from the ReLU and |W| kinks.

    Finite differences with step h misbehave when some pre-activation or
    weight sits within h of a kink, so candidates are resampled until every
    |pre-activation| > 1e-3 and every |w| > 1e-4.
    """
    for attempt in range(200):
        rng = np.random.default_rng((seed, attempt))
        params = build_autoencoder(n, hidden, d, seed=int(rng.integers(2**31)))
        # small bias jitter moves pre-activations off 0 without changing scale
        for layer in params.encoder + params.decoder:
            layer.bias += rng.uniform(0.05, 0.3, layer.bias.shape) * rng.choice([-1.0, 1.0], layer.bias.shape)
        snap = random_snapshot(rng, n)
        edges = snap.edges()
        take = min(batch_edges, len(edges))
        idx = rng.choice(len(edges), size=take, replace=False)
        heads = [edges[k][0] for k in idx]
        tails = [edges[k][1] for k in idx]
        weights = [edges[k][2] for k in idx]
        batch = make_batch(snap, heads, tails, weights)
        x = np.vstack([batch.x_head, batch.x_tail])
        min_w = min(float(np.min(np.abs(l.weights))) for l in params.encoder + params.decoder)
        if _min_preactivation(params, x) > 1e-3 and min_w > 1e-4:
            return params, batch
    raise AssertionError("could not find a kink-free model/batch pair")


def finite_difference_max_rel_error(params, batch, hyper, h=1e-5):
    """Worst norm-relative error between analytic and central-difference
    gradients, taken over every weight matrix and bias vector.

    Norm-relative (per array, not per entry) because individual entries can
    have near-zero gradients from cancellation, where the difference quotient
    is pure roundoff.
    """

    def value():
        return loss_net_batch(params, batch, hyper)[0]

    _, _, (enc_grads, dec_grads) = loss_net_batch(params, batch, hyper)
    analytic = []
    for gw, gb in enc_grads + dec_grads:
        analytic.append(gw)
        analytic.append(gb)
    arrays = []
    for layer in params.encoder + params.decoder:
        arrays.append(layer.weights)
        arrays.append(layer.bias)

    worst = 0.0
    for arr, grad in zip(arrays, analytic):
        flat = arr.reshape(-1)
        fd = np.empty_like(flat)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + h
            up = value()
            flat[k] = orig - h
            down = value()
            flat[k] = orig
            fd[k] = (up - down) / (2.0 * h)
        gflat = grad.reshape(-1)
        denom = max(float(np.linalg.norm(fd)), float(np.linalg.norm(gflat)), 1e-10)
        worst = max(worst, float(np.linalg.norm(fd - gflat)) / denom)
    return worst


def toy_hyper(**overrides):
    """Hyperparameters where every loss term carries visible weight."""
    base = dict(alpha=0.2, beta=3.0, nu1=1e-3, nu2=1e-3, d=3, base_lr=1e-4, seed=0)
    base.update(overrides)
    return Hyperparameters(**base)


def merge_series(n=300, merge_at=8, steps=12, p_in=0.2, p_out=0.01, seed=0):
    """Constant 3-community SBM; from ``merge_at`` on, communities 0 and 1
    behave as one block (their cross pairs resampled at p_in)."""
    cfg = SbmConfig(node_count=n, p_in=p_in, p_out=p_out, steps=1, communities=3)
    graphs, labels = generate_sbm_series(cfg, seed)
    base = graphs[0]
    lab = labels[0]
    rng = np.random.default_rng(seed + 7777)
    a = np.nonzero(lab == 0)[0]
    b = np.nonzero(lab == 1)[0]
    edges = {}
    for i, j, w in base.edges():
        cross = (lab[i] == 0 and lab[j] == 1) or (lab[i] == 1 and lab[j] == 0)
        if not cross:
            edges[(i, j)] = w
    for i in a:
        draws = rng.random(b.size) < p_in
        for j in b[draws]:
            key = (int(i), int(j)) if i < j else (int(j), int(i))
            edges[key] = 1.0
    merged = GraphSnapshot(n, edges)
    return DynamicGraph([base] * merge_at + [merged] * (steps - merge_at))


def growing_series(n_start=100, n_end=200, steps=10, p_in=0.2, p_out=0.02, seed=0):
    """Node-growing series: prefix-induced subgraphs of one fixed SBM."""
    cfg = SbmConfig(node_count=n_end, p_in=p_in, p_out=p_out, steps=1, communities=3)
    graphs, _ = generate_sbm_series(cfg, seed)
    full = graphs[0]
    counts = np.linspace(n_start, n_end, steps).round().astype(int)
    snaps = []
    for m in counts:
        kept = [(i, j, w) for i, j, w in full.edges() if j < m]
        snaps.append(GraphSnapshot(int(m), kept))
    return DynamicGraph(snaps)
