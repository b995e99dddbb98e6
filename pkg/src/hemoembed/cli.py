"""Command line entry point: ``hemoembed <subcommand> ...``."""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import pipeline as P
from .clustering import ClusterMethod, cluster
from .encoder import EncoderConfig, desk_config, load_checkpoint, save_checkpoint
from .explain import ForestConfig, MLPConfig, per_subject_cv
from .signals import normalize, windows_for
from .synthetic import SyntheticConfig, generate_synthetic
from .timeembed import TimeAttachMode, attach_time
from .training import TrainConfig, train, write_trace

log = logging.getLogger("hemoembed")


def _read_json(path: str | None) -> dict:
    return json.loads(Path(path).read_text()) if path else {}


def _out(args) -> Path:
    if args.out is None:
        raise SystemExit(f"{args.command}: --out is required")
    return Path(args.out)


def _series(data_dir: str):
    return [normalize(s) for s in P.load_data_dir(data_dir)]


def cmd_gen_data(args) -> None:
    d = _read_json(args.config)
    if args.seed is not None:
        d["seed"] = args.seed
    cfg = SyntheticConfig.from_dict(d)
    out = P.write_data_dir(generate_synthetic(cfg), _out(args), cfg.to_dict())
    print(f"wrote {cfg.num_subjects} subjects to {out}")


def _train_config(args) -> TrainConfig:
    d = _read_json(args.train_config)
    for key, val in (
        ("iterations", args.iterations),
        ("negatives", args.negatives),
        ("scheme", args.scheme),
        ("min_length", args.min_length),
        ("seed", args.seed),
        ("threads", args.threads),
    ):
        if val is not None:
            d[key] = val
    return TrainConfig.from_dict(d)


def _encoder_config(args, in_channels: int) -> EncoderConfig:
    d = _read_json(args.enc_config)
    if not d:
        return desk_config(in_channels)
    return EncoderConfig.from_dict({"in_channels": in_channels, **d})


def cmd_train(args) -> None:
    series = _series(args.data)
    enc = _encoder_config(args, series[0].num_channels)
    tc = _train_config(args)
    out = _out(args)
    out.mkdir(parents=True, exist_ok=True)
    result = train(series, enc, tc, checkpoint_dir=out if tc.checkpoint_every else None)
    save_checkpoint(result.params, out / "encoder")
    write_trace(result.trace, out / "loss_trace.csv")
    losses = result.losses()
    if len(losses):
        print(f"trained {len(losses)} iterations, final loss {losses[-1]:.6f}")
    print(f"checkpoint: {out / 'encoder.json'}")


def cmd_embed(args) -> None:
    params = load_checkpoint(args.checkpoint)
    windows = windows_for(_series(args.data), args.window)
    table = P.embed_all(params, windows, args.threads or 1)
    P.write_embeddings(table, _out(args))
    print(f"{len(table)} embeddings -> {args.out}")


def cmd_attach_time(args) -> None:
    table = P.read_embeddings(args.embeddings)
    E = attach_time(table.embeddings, table.window_index(), TimeAttachMode(args.mode), table.bleed_window_index(), args.scale)
    P.write_embeddings(table.with_embeddings(E), _out(args))


def cmd_cluster(args) -> None:
    table = P.read_embeddings(args.embeddings)
    seed = args.seed if args.seed is not None else 0
    res = cluster(table.embeddings, args.k, ClusterMethod(args.method), seed)
    P.write_labels(table, res.labels, _out(args))
    print(f"{args.method} k={args.k}: sizes {np.bincount(res.labels, minlength=args.k).tolist()}")


def cmd_features(args) -> None:
    series = _series(args.data)
    windows = windows_for(series, args.window)
    P.write_features(windows, series[0].channels, _out(args))


def cmd_classify(args) -> None:
    f_subj, f_start, F = P.read_features(args.features)
    l_subj, l_start, _, labels = P.read_labels(args.labels)
    if f_subj != l_subj or not np.array_equal(f_start, l_start):
        raise SystemExit("features and labels rows do not describe the same windows")
    seed = args.seed if args.seed is not None else 0
    threads = args.threads or 1
    k = args.num_classes or int(labels.max()) + 1
    rep = per_subject_cv(
        F, labels, f_subj, args.folds, args.model, ForestConfig(seed=seed, threads=threads), MLPConfig(seed=seed), num_classes=k
    )
    P.write_cv_report({k: rep}, args.model, _out(args))
    print(f"{args.model}: mean accuracy {rep.mean:.4f} (std {rep.std:.4f}) over {len(rep.subjects)} subjects")


def cmd_crossval(args) -> None:
    series = _series(args.data)
    enc = _encoder_config(args, series[0].num_channels)
    tc = _train_config(args)
    out = _out(args)
    out.mkdir(parents=True, exist_ok=True)
    for fr in P.encoder_cv(series, enc, tc, args.folds, args.k, args.method, args.window):
        P.render_timeline(fr.timeline, out / f"fold{fr.fold}_timeline")
        P.write_labels(fr.table, fr.labels, out / f"fold{fr.fold}_labels.csv")
        print(f"fold {fr.fold}: test {','.join(fr.test_subjects)}")


def cmd_report(args) -> None:
    subj, starts, secs, labels = P.read_labels(args.labels)
    draws = P.draw_seconds_of(P.load_data_dir(args.data)) if args.data else {}
    table = P.EmbeddingTable(subj, starts, secs, np.zeros(len(subj), bool), np.full(len(subj), -1), np.zeros((len(subj), 0)))
    if args.data:
        series = {s.subject_id: s for s in P.load_data_dir(args.data)}
        table.overlaps_draw = np.array(
            [any(st <= d < st + args.window for d in series[s].draw_events) for s, st in zip(subj, starts)]
        )
        rate = next(iter(series.values())).sample_rate_hz
    else:
        rate = args.sample_rate
    k = int(labels.max()) + 1
    tl = P.build_timeline(table, labels, k, args.method, args.window / rate, draws)
    P.render_timeline(tl, _out(args))
    print(f"timeline -> {Path(args.out).with_suffix('.svg')}")


def cmd_run(args) -> None:
    if args.manifest:
        cfg = P.PipelineConfig.from_dict(P.RunManifest.read(args.manifest).config)
    else:
        cfg = P.PipelineConfig.from_dict(_read_json(args.config))
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    if args.threads is not None:
        cfg = dataclasses.replace(cfg, threads=args.threads)
    m = P.run_pipeline(cfg, _out(args))
    print(f"{len(m.artifacts)} artifacts; manifest {Path(args.out) / 'manifest.json'}")


def build_parser() -> argparse.ArgumentParser:
    def common_args(default):
        c = argparse.ArgumentParser(add_help=False)
        c.add_argument("--seed", type=int, default=default, help="seed for every stochastic stage")
        c.add_argument("--threads", type=int, default=default)
        c.add_argument("--out", default=default, help="output file or directory")
        c.add_argument("-v", "--verbose", action="store_true", default=False if default is None else default)
        return c

    # subcommands suppress their defaults so options given before the subcommand survive
    common = common_args(argparse.SUPPRESS)
    p = argparse.ArgumentParser(prog="hemoembed", parents=[common_args(None)], description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help):
        sp = sub.add_parser(name, parents=[common], help=help)
        sp.set_defaults(fn=fn)
        return sp

    def train_args(sp):
        sp.add_argument("--data", required=True, help="directory of subject CSVs")
        sp.add_argument("--enc-config")
        sp.add_argument("--train-config")
        sp.add_argument("--iterations", type=int)
        sp.add_argument("--negatives", type=int)
        sp.add_argument("--scheme", choices=["cross", "within"])
        sp.add_argument("--min-length", type=int)

    sp = add("gen-data", cmd_gen_data, "generate synthetic subjects")
    sp.add_argument("--config")

    train_args(add("train", cmd_train, "train the encoder"))

    sp = add("embed", cmd_embed, "embed every window")
    sp.add_argument("--data", required=True)
    sp.add_argument("--checkpoint", required=True, help="checkpoint path (with or without .json)")
    sp.add_argument("--window", type=int, default=120)

    sp = add("attach-time", cmd_attach_time, "add sinusoidal time vectors to embeddings")
    sp.add_argument("--embeddings", required=True)
    sp.add_argument("--mode", choices=[m.value for m in TimeAttachMode], default="none")
    sp.add_argument("--scale", type=float, default=2.0)

    sp = add("cluster", cmd_cluster, "cluster embeddings")
    sp.add_argument("--embeddings", required=True)
    sp.add_argument("--method", choices=[m.value for m in ClusterMethod], default="ward")
    sp.add_argument("--k", type=int, default=10)

    sp = add("features", cmd_features, "explainable per-window features")
    sp.add_argument("--data", required=True)
    sp.add_argument("--window", type=int, default=120)

    sp = add("classify", cmd_classify, "predict cluster labels from features under per-subject CV")
    sp.add_argument("--features", required=True)
    sp.add_argument("--labels", required=True)
    sp.add_argument("--model", choices=["rf", "mlp"], default="rf")
    sp.add_argument("--folds", type=int, default=16)
    sp.add_argument("--num-classes", type=int)

    sp = add("crossval", cmd_crossval, "encoder robustness by subject folds")
    train_args(sp)
    sp.add_argument("--folds", type=int, default=4)
    sp.add_argument("--k", type=int, default=10)
    sp.add_argument("--method", choices=[m.value for m in ClusterMethod], default="ward")
    sp.add_argument("--window", type=int, default=120)

    sp = add("report", cmd_report, "render a cluster timeline (SVG and CSV)")
    sp.add_argument("--labels", required=True)
    sp.add_argument("--data", help="data directory, for draw markers")
    sp.add_argument("--window", type=int, default=120)
    sp.add_argument("--sample-rate", type=float, default=50.0)
    sp.add_argument("--method", default="ward")

    sp = add("run", cmd_run, "full pipeline from a config or a previous manifest")
    g = sp.add_mutually_exclusive_group(required=True)
    g.add_argument("--config")
    g.add_argument("--manifest")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.fn(args)
    except (ValueError, FileNotFoundError, P.StageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
