"""Ranking quality (precision@k, MAP), embedding stability constants,
anomaly deltas, and the warm-start speedup model."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from dyngem.errors import UndefinedMetricError


def ranked_candidates(scores, candidates):
    """Candidate ids ordered by descending score, ties broken by ascending id."""
    candidates = np.asarray(candidates, dtype=np.intp)
    scores = np.asarray(scores, dtype=np.float64)
    if scores.shape != candidates.shape:
        raise ValueError("scores and candidates must align")
    order = np.lexsort((candidates, -scores))
    return candidates[order]


@dataclass
class RankedPrediction:
    """One node's candidates sorted by descending score (ties by ascending id)."""

    node: int
    candidates: np.ndarray
    scores: np.ndarray

    @classmethod
    def from_scores(cls, node, candidates, scores):
        candidates = np.asarray(candidates, dtype=np.intp)
        scores = np.asarray(scores, dtype=np.float64)
        if node in candidates:
            raise ValueError("candidates must not include the node itself")
        if not np.isfinite(scores).all():
            raise ValueError("scores must be finite")
        order = np.lexsort((candidates, -scores))
        return cls(int(node), candidates[order], scores[order])


def precision_at_k(ranked, truth, k):
    """Fraction of the top k ranked items that are true."""
    ranked = list(ranked)
    if not (1 <= k <= len(ranked)):
        raise ValueError(f"k must lie in [1, {len(ranked)}]")
    truth = set(truth)
    return sum(1 for item in ranked[:k] if item in truth) / k


def average_precision(ranked, truth):
    """Mean of precision@rank over the ranks holding true items.

    Returns None when ``truth`` is empty (the node contributes nothing).
    """
    truth = set(truth)
    if not truth:
        return None
    hits = 0
    total = 0.0
    for rank, item in enumerate(ranked, 1):
        if item in truth:
            hits += 1
            total += hits / rank
    return total / len(truth)


def mean_average_precision(rankings, truths):
    """Mean AP over the nodes that have at least one true item.

    ``rankings`` and ``truths`` are parallel sequences (one ranked candidate
    list and one truth collection per node).  Raises UndefinedMetricError if
    no node has any truth.
    """
    values = []
    for ranked, truth in zip(rankings, truths):
        ap = average_precision(ranked, truth)
        if ap is not None:
            values.append(ap)
    if not values:
        raise UndefinedMetricError("MAP is undefined: no node has a true neighbor")
    return float(np.mean(values))


def _ap_from_row(scores_row, candidates, truth_idx):
    order = np.lexsort((candidates, -scores_row[candidates]))
    ranked = candidates[order]
    hits = np.isin(ranked, truth_idx)
    if not hits.any():
        return 0.0
    prec = np.cumsum(hits) / np.arange(1, ranked.size + 1)
    return float(prec[hits].sum() / truth_idx.size)


def eval_reconstruction(scores, snapshot):
    """MAP of neighborhood reconstruction from a symmetric pair-score matrix.

    For every node the candidates are all other nodes and the truth is its
    neighbor set; nodes without neighbors are skipped.
    """
    scores = np.asarray(scores, dtype=np.float64)
    n = snapshot.node_count
    if scores.shape != (n, n):
        raise ValueError("scores must be (n, n) for the snapshot")
    everyone = np.arange(n)
    values = []
    for i in range(n):
        truth, _ = snapshot.neighbors(i)
        if truth.size == 0:
            continue
        candidates = np.delete(everyone, i)
        values.append(_ap_from_row(scores[i], candidates, truth))
    if not values:
        raise UndefinedMetricError("reconstruction MAP undefined: the graph has no edges")
    return float(np.mean(values))


def eval_link_prediction(scores, train_snapshot, hidden):
    """MAP of ranking the hidden edges among the unobserved pairs.

    Candidates for node i exclude i itself and every edge present in the
    training snapshot; the truth is the hidden edges incident to i.  Nodes
    without hidden edges are skipped; an empty ``hidden`` is an error.
    """
    scores = np.asarray(scores, dtype=np.float64)
    n = train_snapshot.node_count
    if scores.shape != (n, n):
        raise ValueError("scores must be (n, n) for the snapshot")
    if not hidden:
        raise UndefinedMetricError("link-prediction MAP undefined: no hidden edges")
    truth_of = {}
    for i, j, _ in hidden:
        truth_of.setdefault(i, []).append(j)
        truth_of.setdefault(j, []).append(i)
    everyone = np.arange(n)
    values = []
    for i in sorted(truth_of):
        observed, _ = train_snapshot.neighbors(i)
        drop = np.zeros(n, dtype=bool)
        drop[i] = True
        drop[observed] = True
        candidates = everyone[~drop]
        truth = np.array(sorted(truth_of[i]), dtype=np.intp)
        values.append(_ap_from_row(scores[i], candidates, truth))
    return float(np.mean(values))


def stability_absolute(f_next, f_curr, s_next, s_curr):
    """||F_{t+1} - F_t||_F / ||S_{t+1} - S_t||_F over the common nodes.

    Returns None (undefined) when the adjacency did not change.
    """
    f_next, f_curr, s_next, s_curr = (np.asarray(a, dtype=np.float64) for a in (f_next, f_curr, s_next, s_curr))
    if f_next.shape != f_curr.shape or s_next.shape != s_curr.shape:
        raise ValueError("matrix pairs must share their shapes")
    ds = float(np.linalg.norm(s_next - s_curr))
    if ds == 0.0:
        return None
    return float(np.linalg.norm(f_next - f_curr)) / ds


def stability_relative(f_next, f_curr, s_next, s_curr):
    """Relative embedding drift over relative adjacency drift.

    ``(||dF|| / ||F_t||) / (||dS|| / ||S_t||)``; None when any required
    denominator is zero.
    """
    f_next, f_curr, s_next, s_curr = (np.asarray(a, dtype=np.float64) for a in (f_next, f_curr, s_next, s_curr))
    if f_next.shape != f_curr.shape or s_next.shape != s_curr.shape:
        raise ValueError("matrix pairs must share their shapes")
    nf = float(np.linalg.norm(f_curr))
    ns = float(np.linalg.norm(s_curr))
    ds = float(np.linalg.norm(s_next - s_curr))
    if nf == 0.0 or ns == 0.0 or ds == 0.0:
        return None
    return (float(np.linalg.norm(f_next - f_curr)) / nf) / (ds / ns)


@dataclass
class StabilityReport:
    """Per-transition stability values plus the spread of the defined ones."""

    s_abs: list
    s_rel: list
    skipped: list
    k_s: float


def _common_views(embeddings, graphs, t):
    m = graphs[t].node_count
    f_curr = embeddings[t]
    f_next = embeddings[t + 1][:m]
    common = np.arange(m)
    s_curr = graphs[t].induced_adjacency(common)
    s_next = graphs[t + 1].induced_adjacency(common)
    return f_next, f_curr, s_next, s_curr


def stability_constant(series, graphs):
    """Per-step S_abs and S_rel plus the stability constant K_S.

    ``series`` may be an EmbeddingSeries or a plain list of matrices.  K_S is
    the spread (max minus min) of the defined S_rel values; transitions with
    an unchanged adjacency are recorded in ``skipped`` and excluded.  Fewer
    than two defined values leave K_S undefined (error).
    """
    embeddings = getattr(series, "embeddings", series)
    if len(embeddings) != len(graphs):
        raise ValueError("embedding series and graph series must share their length")
    s_abs, s_rel, skipped = [], [], []
    for t in range(len(graphs) - 1):
        f_next, f_curr, s_next, s_curr = _common_views(embeddings, graphs, t)
        a = stability_absolute(f_next, f_curr, s_next, s_curr)
        r = stability_relative(f_next, f_curr, s_next, s_curr)
        s_abs.append(a)
        s_rel.append(r)
        if r is None:
            skipped.append(t)
    defined = [r for r in s_rel if r is not None]
    if len(defined) < 2:
        raise UndefinedMetricError(
            "stability constant undefined: fewer than two defined S_rel values"
        )
    return StabilityReport(s_abs, s_rel, skipped, float(max(defined) - min(defined)))


def anomaly_series(series, graphs):
    """Embedding deltas ||F_{t+1}(V_t) - F_t(V_t)||_F for each transition."""
    embeddings = getattr(series, "embeddings", series)
    if len(embeddings) != len(graphs):
        raise ValueError("embedding series and graph series must share their length")
    if len(embeddings) < 2:
        raise UndefinedMetricError("anomaly deltas need at least two steps")
    deltas = []
    for t in range(len(graphs) - 1):
        m = graphs[t].node_count
        deltas.append(float(np.linalg.norm(embeddings[t + 1][:m] - embeddings[t])))
    return np.array(deltas)


@dataclass
class AnomalyReport:
    """Deltas, the threshold applied, and the flagged transition indices."""

    deltas: np.ndarray
    threshold: float
    flagged: list


def flag_anomalies(deltas, rule="std", factor=2.0, threshold=None):
    """Flag transitions whose delta strictly exceeds a threshold.

    ``rule == 'std'`` uses mean + factor * population std of the deltas;
    ``rule == 'absolute'`` uses the given threshold directly.  Accepts the
    raw delta array or an AnomalyReport.
    """
    deltas = np.asarray(getattr(deltas, "deltas", deltas), dtype=np.float64)
    if deltas.size == 0:
        raise UndefinedMetricError("no deltas to flag")
    if rule == "std":
        if deltas.size < 2:
            raise UndefinedMetricError("statistical rule needs at least two deltas")
        cut = float(deltas.mean() + factor * deltas.std())
    elif rule == "absolute":
        if threshold is None:
            raise ValueError("absolute rule needs a threshold")
        cut = float(threshold)
    else:
        raise ValueError(f"unknown rule {rule!r}")
    flagged = [int(t) for t in np.nonzero(deltas > cut)[0]]
    return AnomalyReport(deltas, cut, flagged)


def expected_speedup(n_s, n_i, big_t):
    """Iteration-count speedup T*n_s / (n_s + (T-1)*n_i) of warm starting.

    ``n_s`` is the cold-start iteration count, ``n_i`` the warm-start count
    per later step, ``big_t`` the number of snapshots.
    """
    if n_s < 1 or n_i < 1 or big_t < 1:
        raise ValueError("n_s, n_i and T must all be at least 1")
    return big_t * n_s / (n_s + (big_t - 1) * n_i)
