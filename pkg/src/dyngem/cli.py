"""Command-line interface: generate synthetic series, train embedding runs,
evaluate them, and export plot-ready artifacts.

Every command writes or consumes a manifest so a run can be reproduced from
its artifacts alone.  Exit codes: 0 success, 2 validation error, 3
runtime/numerical error.
"""

from __future__ import annotations

import functools
import json
from dataclasses import asdict
from pathlib import Path

import click
import numpy as np
from click.core import ParameterSource

from dyngem import __version__, metrics, model
from dyngem.engine import METHODS, RunConfig, run_method
from dyngem.errors import ConfigError, ConvergenceError, ParseError, UndefinedMetricError
from dyngem.graph import (
    DynamicGraph,
    SbmConfig,
    generate_sbm_series,
    hide_edges,
    load_series,
    save_series,
)
from dyngem.model import Hyperparameters

SCHEMA_VERSION = 1
EMB_FMT = "emb_{:04d}.csv"
CKPT_FMT = "checkpoint_{:04d}.txt"

# Methods whose stored decoder matches their stored embeddings; everything
# else (rotated or factorized) is scored by embedding inner products.
DECODER_SCORED = ("dyngem", "sdne_retrain")

_HYPER_FIELDS = (
    "alpha", "beta", "nu1", "nu2", "rho", "d", "base_lr", "momentum",
    "decay", "batch_size", "epochs_first", "epochs_warm", "seed",
)


class _ExitError(click.ClickException):
    def __init__(self, message, exit_code):
        super().__init__(message)
        self.exit_code = exit_code


def _guarded(f):
    @functools.wraps(f)
    def wrapper(*args, **kwargs):
        try:
            return f(*args, **kwargs)
        except (ConvergenceError, FloatingPointError, np.linalg.LinAlgError) as exc:
            raise _ExitError(str(exc), 3) from exc
        except (ParseError, ValueError) as exc:
            raise _ExitError(str(exc), 2) from exc
        except OSError as exc:
            raise _ExitError(str(exc), 2) from exc

    return wrapper


def _write_json(path, payload):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_report(path, method, config, per_step, aggregate):
    report = {
        "schema_version": SCHEMA_VERSION,
        "method": method,
        "config": config,
        "per_step": per_step,
        "aggregate": aggregate,
    }
    _write_json(path, report)
    return report


def _parse_hidden(text):
    if not isinstance(text, str):
        return tuple(int(h) for h in text)
    text = text.strip()
    if not text:
        return ()
    try:
        return tuple(int(part) for part in text.split(","))
    except ValueError:
        raise ConfigError(f"hidden sizes {text!r} must be comma-separated integers") from None


def _config_from_flags(flags):
    hyper = Hyperparameters(**{name: flags[name] for name in _HYPER_FIELDS})
    return RunConfig(
        hyper=hyper,
        method=flags["method"],
        hidden_sizes=_parse_hidden(flags["hidden"]),
        gf_lambda=flags["gf_lambda"],
        gf_iters=flags["gf_iters"],
        gf_lr=flags["gf_lr"],
        growth_noise=flags["growth_noise"],
        jobs=flags["jobs"],
    )


def _config_to_flat(config):
    flat = {name: getattr(config.hyper, name) for name in _HYPER_FIELDS}
    flat.update(
        method=config.method,
        hidden=",".join(str(h) for h in config.hidden_sizes),
        gf_lambda=config.gf_lambda,
        gf_iters=config.gf_iters,
        gf_lr=config.gf_lr,
        growth_noise=config.growth_noise,
        jobs=config.jobs,
    )
    return flat


def _config_to_dict(config):
    payload = asdict(config)
    payload["hidden_sizes"] = [int(h) for h in config.hidden_sizes]
    return payload


def _config_from_dict(payload):
    data = dict(payload)
    hyper = Hyperparameters(**data.pop("hyper"))
    data["hidden_sizes"] = tuple(int(h) for h in data["hidden_sizes"])
    return RunConfig(hyper=hyper, **data)


_H = Hyperparameters()
_R = RunConfig()


def train_options(f):
    opts = [
        click.option("--method", type=click.Choice(METHODS), default="dyngem",
                     show_default=True, help="embedding method"),
        click.option("--d", "d", type=int, default=_H.d, show_default=True,
                     help="embedding dimension"),
        click.option("--hidden", default=",".join(str(h) for h in _R.hidden_sizes),
                     show_default=True, help="comma-separated hidden widths"),
        click.option("--alpha", type=float, default=_H.alpha, show_default=True,
                     help="first-order proximity weight"),
        click.option("--beta", type=float, default=_H.beta, show_default=True,
                     help="reconstruction penalty on observed edges"),
        click.option("--nu1", type=float, default=_H.nu1, show_default=True,
                     help="L1 weight decay"),
        click.option("--nu2", type=float, default=_H.nu2, show_default=True,
                     help="L2 weight decay"),
        click.option("--rho", type=float, default=_H.rho, show_default=True,
                     help="minimum layer-size ratio driving growth"),
        click.option("--base-lr", type=float, default=_H.base_lr, show_default=True,
                     help="initial SGD learning rate"),
        click.option("--momentum", type=float, default=_H.momentum, show_default=True),
        click.option("--decay", type=float, default=_H.decay, show_default=True,
                     help="learning-rate decay per update"),
        click.option("--batch-size", type=int, default=_H.batch_size, show_default=True),
        click.option("--epochs-first", type=int, default=_H.epochs_first, show_default=True,
                     help="epochs on the first snapshot"),
        click.option("--epochs-warm", type=int, default=_H.epochs_warm, show_default=True,
                     help="epochs on warm-started snapshots"),
        click.option("--seed", type=int, default=_H.seed, show_default=True),
        click.option("--gf-lambda", type=float, default=_R.gf_lambda, show_default=True,
                     help="factorization regularizer"),
        click.option("--gf-iters", type=int, default=_R.gf_iters, show_default=True,
                     help="factorization epochs"),
        click.option("--gf-lr", type=float, default=_R.gf_lr, show_default=True,
                     help="factorization learning rate"),
        click.option("--growth-noise", type=float, default=_R.growth_noise, show_default=True,
                     help="symmetry-breaking noise on widened units"),
        click.option("--jobs", type=int, default=_R.jobs, show_default=True,
                     help="parallel snapshot workers for cold-start baselines"),
    ]
    for opt in reversed(opts):
        f = opt(f)
    return f


@click.group()
@click.version_option(__version__, prog_name="dyngem")
def main():
    """Dynamic-graph embeddings: generate data, train, evaluate, export."""


@main.command("generate")
@click.option("--nodes", type=int, required=True, help="nodes per snapshot")
@click.option("--communities", type=int, default=3, show_default=True)
@click.option("--p-in", "p_in", type=float, required=True, help="within-community edge probability")
@click.option("--p-out", "p_out", type=float, required=True, help="cross-community edge probability")
@click.option("--steps", type=int, required=True, help="number of snapshots")
@click.option("--migrate", type=int, default=0, show_default=True,
              help="nodes switching community per step")
@click.option("--edge-weight", type=float, default=1.0, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "output_dir", required=True, type=click.Path(file_okay=False))
@_guarded
def cmd_generate(nodes, communities, p_in, p_out, steps, migrate, edge_weight, seed, output_dir):
    """Write a stochastic-block-model snapshot series with migrating nodes."""
    config = SbmConfig(
        node_count=nodes,
        p_in=p_in,
        p_out=p_out,
        steps=steps,
        communities=communities,
        migrate_per_step=migrate,
        edge_weight=edge_weight,
    )
    graph, labels = generate_sbm_series(config, seed)
    out = Path(output_dir)
    paths = save_series(graph, out)
    with open(out / "labels.csv", "w", encoding="utf-8") as fh:
        fh.write("step,node,community\n")
        for t in range(labels.shape[0]):
            for node in range(labels.shape[1]):
                fh.write(f"{t},{node},{int(labels[t, node])}\n")
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "command": "generate",
        "config": {
            "nodes": nodes,
            "communities": communities,
            "p_in": p_in,
            "p_out": p_out,
            "steps": steps,
            "migrate": migrate,
            "edge_weight": edge_weight,
            "seed": seed,
        },
        "artifacts": {"snapshots": [p.name for p in paths], "labels": "labels.csv"},
        "edge_counts": [int(snap.edge_count) for snap in graph],
    }
    _write_json(out / "manifest.json", manifest)
    click.echo(f"wrote {len(paths)} snapshots to {out}")


def _write_embedding_csv(path, emb):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("node," + ",".join(f"y{k}" for k in range(1, emb.shape[1] + 1)) + "\n")
        for node, row in enumerate(emb):
            fh.write(f"{node}," + ",".join(f"{v:.17g}" for v in row) + "\n")


def _read_embedding_csv(path):
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split(",")
        if header[:1] != ["node"] or len(header) < 2:
            raise ParseError(f"{path}:1: expected 'node,y1,...' header")
        rows = []
        for lineno, raw in enumerate(fh, 2):
            line = raw.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != len(header):
                raise ParseError(f"{path}:{lineno}: expected {len(header)} fields")
            try:
                rows.append([float(v) for v in parts[1:]])
            except ValueError:
                raise ParseError(f"{path}:{lineno}: non-numeric embedding value") from None
    return np.array(rows, dtype=np.float64).reshape(len(rows), len(header) - 1)


def _write_run(out_dir, input_dir, series, config, result, growth):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    per_step = []
    for t, emb in enumerate(result.embeddings):
        emb_name = EMB_FMT.format(t)
        _write_embedding_csv(out_dir / emb_name, emb)
        entry = {
            "step": t,
            "embedding": emb_name,
            "checkpoint": None,
            "seconds": result.seconds[t],
            "iterations": int(result.iterations[t]),
            "final_objective": result.traces[t][-1] if result.traces[t] else None,
            "growth": growth[t] if growth else None,
        }
        if result.checkpoints is not None:
            ckpt_name = CKPT_FMT.format(t)
            model.save_checkpoint(result.checkpoints[t], out_dir / ckpt_name)
            entry["checkpoint"] = ckpt_name
        per_step.append(entry)
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "command": "train",
        "method": config.method,
        "config": _config_to_dict(config),
        "input": str(input_dir),
        "node_counts": [int(c) for c in series.node_counts],
        "per_step": per_step,
        "aggregate": {
            "total_seconds": float(sum(result.seconds)),
            "total_iterations": int(sum(result.iterations)),
        },
    }
    _write_json(out_dir / "manifest.json", manifest)
    return manifest


@main.command("train")
@click.option("--in", "input_dir", required=True,
              type=click.Path(exists=True, file_okay=False), help="snapshot series directory")
@click.option("--out", "output_dir", required=True, type=click.Path(file_okay=False))
@click.option("--from-manifest", "from_manifest", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="reuse the config echoed in a previous run manifest")
@train_options
@click.pass_context
@_guarded
def cmd_train(ctx, input_dir, output_dir, from_manifest, **flags):
    """Train one method over a snapshot series and write embeddings."""
    if from_manifest:
        with open(from_manifest, encoding="utf-8") as fh:
            payload = json.load(fh)
        if "config" not in payload:
            raise ConfigError(f"{from_manifest}: manifest has no config echo")
        flat = _config_to_flat(_config_from_dict(payload["config"]))
        for name, value in flags.items():
            if ctx.get_parameter_source(name) is ParameterSource.COMMANDLINE:
                flat[name] = value
        config = _config_from_flags(flat)
    else:
        config = _config_from_flags(flags)
    series = load_series(input_dir)
    result, growth = run_method(series, config)
    _write_run(output_dir, input_dir, series, config, result, growth)
    click.echo(f"trained {config.method} on {len(series)} snapshots -> {output_dir}")


def _load_run(run_dir):
    run_dir = Path(run_dir)
    manifest_path = run_dir / "manifest.json"
    if not manifest_path.exists():
        raise ConfigError(f"no manifest.json in {run_dir}")
    with open(manifest_path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    embeddings = []
    checkpoints = []
    for entry in manifest["per_step"]:
        embeddings.append(_read_embedding_csv(run_dir / entry["embedding"]))
        name = entry.get("checkpoint")
        checkpoints.append(run_dir / name if name else None)
    return manifest, embeddings, checkpoints


def _step_scores(method, snapshot, embedding, checkpoint):
    if method in DECODER_SCORED:
        if checkpoint is None:
            raise ConfigError(f"method {method!r} needs checkpoints for scoring")
        params = checkpoint if isinstance(checkpoint, model.AutoencoderParams) else model.load_checkpoint(checkpoint)
        return model.symmetrize_scores(model.reconstruct_scores(params, snapshot))
    return embedding @ embedding.T


@main.group("eval")
def cmd_eval():
    """Evaluate runs: reconstruction, linkpred, stability, anomaly, speedup."""


@cmd_eval.command("reconstruction")
@click.option("--run", "run_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--data", "data_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@_guarded
def eval_reconstruction_cmd(run_dir, data_dir, out_path):
    """Average MAP of reconstructing each snapshot's neighborhoods."""
    manifest, embeddings, checkpoints = _load_run(run_dir)
    series = load_series(data_dir)
    if len(series) != len(embeddings):
        raise ConfigError("run and data directories disagree on the number of steps")
    method = manifest["method"]
    per_step = []
    values = []
    for t, snap in enumerate(series):
        scores = _step_scores(method, snap, embeddings[t], checkpoints[t])
        value = metrics.eval_reconstruction(scores, snap)
        values.append(value)
        per_step.append({"step": t, "map": value})
    aggregate = {"average_map": float(np.mean(values))}
    _write_report(out_path, method, manifest["config"], per_step, aggregate)
    click.echo(f"average reconstruction MAP: {aggregate['average_map']:.6f}")


@cmd_eval.command("linkpred")
@click.option("--data", "data_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--hide-fraction", type=float, default=0.15, show_default=True,
              help="fraction of last-snapshot edges to hide")
@click.option("--hide-seed", type=int, default=0, show_default=True)
@train_options
@_guarded
def eval_linkpred_cmd(data_dir, out_path, hide_fraction, hide_seed, **flags):
    """Hide last-snapshot edges, train on the modified series, rank them."""
    config = _config_from_flags(flags)
    series = load_series(data_dir)
    last = len(series) - 1
    train_last, hidden = hide_edges(series[last], hide_fraction, hide_seed)
    modified = DynamicGraph([series[t] for t in range(last)] + [train_last])
    result, _ = run_method(modified, config)
    if config.method in DECODER_SCORED:
        scores = _step_scores(config.method, train_last, result.embeddings[last], result.checkpoints[last])
    else:
        scores = _step_scores(config.method, train_last, result.embeddings[last], None)
    value = metrics.eval_link_prediction(scores, train_last, hidden)
    per_step = [{"step": last, "map": value, "hidden_edges": len(hidden)}]
    aggregate = {"average_map": value, "hide_fraction": hide_fraction, "hide_seed": hide_seed}
    _write_report(out_path, config.method, _config_to_dict(config), per_step, aggregate)
    click.echo(f"link-prediction MAP: {value:.6f}")


@cmd_eval.command("stability")
@click.option("--run", "run_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--data", "data_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@_guarded
def eval_stability_cmd(run_dir, data_dir, out_path):
    """Relative/absolute stability per transition plus the constant K_S."""
    manifest, embeddings, _ = _load_run(run_dir)
    series = load_series(data_dir)
    if len(series) != len(embeddings):
        raise ConfigError("run and data directories disagree on the number of steps")
    if len(series) < 2:
        raise ConfigError("stability needs at least two snapshots")
    per_step = []
    for t in range(len(series) - 1):
        m = series[t].node_count
        common = np.arange(m)
        f_curr, f_next = embeddings[t], embeddings[t + 1][:m]
        s_curr = series[t].induced_adjacency(common)
        s_next = series[t + 1].induced_adjacency(common)
        s_abs = metrics.stability_absolute(f_next, f_curr, s_next, s_curr)
        s_rel = metrics.stability_relative(f_next, f_curr, s_next, s_curr)
        entry = {"step": t + 1, "s_abs": s_abs, "s_rel": s_rel, "defined": s_rel is not None}
        if s_rel is None:
            entry["reason"] = "adjacency unchanged" if s_abs is None else "zero embedding or adjacency norm"
        per_step.append(entry)
    defined = [e["s_rel"] for e in per_step if e["defined"]]
    aggregate = {"defined_transitions": len(defined)}
    if len(defined) >= 2:
        aggregate["k_s"] = float(max(defined) - min(defined))
    else:
        aggregate["k_s"] = None
        aggregate["reason"] = "fewer than two defined relative stabilities"
    _write_report(out_path, manifest["method"], manifest["config"], per_step, aggregate)
    shown = "undefined" if aggregate["k_s"] is None else f"{aggregate['k_s']:.6g}"
    click.echo(f"stability constant K_S: {shown}")


@cmd_eval.command("anomaly")
@click.option("--run", "run_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--data", "data_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--rule", type=click.Choice(("std", "absolute")), default="std", show_default=True)
@click.option("--factor", type=float, default=2.0, show_default=True,
              help="std multiplier for the statistical rule")
@click.option("--threshold", type=float, default=None, help="cutoff for the absolute rule")
@_guarded
def eval_anomaly_cmd(run_dir, data_dir, out_path, rule, factor, threshold):
    """Embedding-drift deltas per transition with threshold flags."""
    manifest, embeddings, _ = _load_run(run_dir)
    series = load_series(data_dir)
    if len(series) != len(embeddings):
        raise ConfigError("run and data directories disagree on the number of steps")
    deltas = metrics.anomaly_series(embeddings, series)
    try:
        report = metrics.flag_anomalies(deltas, rule=rule, factor=factor, threshold=threshold)
        flagged = {t for t in report.flagged}
        per_step = [
            {"step": t + 1, "delta": float(dv), "flagged": t in flagged}
            for t, dv in enumerate(deltas)
        ]
        aggregate = {
            "rule": rule,
            "threshold": report.threshold,
            "flagged_steps": [t + 1 for t in report.flagged],
        }
        if rule == "std":
            aggregate["factor"] = factor
    except UndefinedMetricError as exc:
        per_step = [{"step": t + 1, "delta": float(dv), "flagged": None} for t, dv in enumerate(deltas)]
        aggregate = {"rule": rule, "threshold": None, "flagged_steps": None, "reason": str(exc)}
    _write_report(out_path, manifest["method"], manifest["config"], per_step, aggregate)
    click.echo(f"flagged steps: {aggregate['flagged_steps']}")


@cmd_eval.command("speedup")
@click.option("--ns", "n_s", type=int, required=True, help="cold-start iterations")
@click.option("--ni", "n_i", type=int, required=True, help="warm-start iterations per step")
@click.option("--T", "big_t", type=int, required=True, help="number of snapshots")
@click.option("--out", "out_path", default=None, type=click.Path(dir_okay=False))
@_guarded
def eval_speedup_cmd(n_s, n_i, big_t, out_path):
    """Expected warm-start speedup T*ns / (ns + (T-1)*ni)."""
    value = metrics.expected_speedup(n_s, n_i, big_t)
    if out_path:
        _write_report(
            out_path, None, {"ns": n_s, "ni": n_i, "T": big_t}, [], {"expected_speedup": value}
        )
    click.echo(f"expected speedup: {value:.3f}")


def _load_ids(path):
    mapping = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in line.split(",")]
            if len(parts) != 2:
                raise ParseError(f"{path}:{lineno}: expected 'external,internal'")
            try:
                internal = int(parts[1])
            except ValueError:
                if lineno == 1:
                    continue
                raise ParseError(f"{path}:{lineno}: internal index {parts[1]!r} is not an integer") from None
            mapping[internal] = parts[0]
    return mapping


@main.command("export")
@click.option("--run", "run_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--out", "output_dir", required=True, type=click.Path(file_okay=False))
@click.option("--ids", "ids_path", default=None, type=click.Path(exists=True, dir_okay=False),
              help="external-id,internal-index mapping joined onto the export")
@_guarded
def cmd_export(run_dir, output_dir, ids_path):
    """Concatenate a run into long-format embeddings.csv plus deltas.csv."""
    _, embeddings, _ = _load_run(run_dir)
    if not embeddings:
        raise ConfigError(f"run {run_dir} holds no embeddings")
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    ext_of = _load_ids(ids_path) if ids_path else None
    d = embeddings[0].shape[1]
    with open(out / "embeddings.csv", "w", encoding="utf-8") as fh:
        head = "t,node"
        if ext_of is not None:
            head += ",external_id"
        fh.write(head + "," + ",".join(f"y{k}" for k in range(1, d + 1)) + "\n")
        for t, emb in enumerate(embeddings):
            for node, row in enumerate(emb):
                prefix = f"{t},{node}"
                if ext_of is not None:
                    prefix += f",{ext_of.get(node, node)}"
                fh.write(prefix + "," + ",".join(f"{v:.17g}" for v in row) + "\n")
    with open(out / "deltas.csv", "w", encoding="utf-8") as fh:
        fh.write("step,delta\n")
        for t in range(len(embeddings) - 1):
            m = embeddings[t].shape[0]
            delta = float(np.linalg.norm(embeddings[t + 1][:m] - embeddings[t]))
            fh.write(f"{t + 1},{delta:.17g}\n")
    rows = sum(e.shape[0] for e in embeddings)
    click.echo(f"exported {rows} embedding rows to {out}")


if __name__ == "__main__":
    main()
