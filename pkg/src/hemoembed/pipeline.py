"""End-to-end orchestration: data -> encoder -> embeddings -> clusters -> explanations.

Every stage writes plain CSV/JSON/SVG (checkpoints aside) and the run manifest
lists each artifact with its SHA-256 so a rerun can be checked byte for byte.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .clustering import ClusterMethod, adjusted_rand_index, cluster, kmeans, ward_linkage
from .encoder import EncoderConfig, EncoderParams, embed_many, load_checkpoint, save_checkpoint
from .explain import (
    ForestConfig,
    MLPConfig,
    CVReport,
    feature_matrix,
    feature_names,
    per_subject_cv,
    subject_folds,
)
from .render import confusion_svg, timeline_svg
from .signals import SubjectSeries, WindowSet, load_series, normalize, save_series, windows_for
from .synthetic import SyntheticConfig, generate_synthetic
from .timeembed import TimeAttachMode, attach_time
from .training import TrainConfig, train, write_trace

log = logging.getLogger(__name__)


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage


def sha256_file(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _strict(cls, d: dict | None, section: str):
    d = dict(d or {})
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(d) - known
    if unknown:
        raise ValueError(f"unknown keys in {section!r}: {sorted(unknown)}")
    return cls(**d)


# --- data directories ------------------------------------------------------------


def write_data_dir(series: Sequence[SubjectSeries], out: str | Path, config: dict | None = None) -> Path:
    """One CSV per subject plus ``manifest.json``."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for s in series:
        p = save_series(s, out / f"{s.subject_id}.csv")
        files.append(p.name)
    manifest = {"subjects": [s.subject_id for s in series], "files": files}
    if config is not None:
        manifest["config"] = config
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return out


def load_data_dir(path: str | Path) -> list[SubjectSeries]:
    path = Path(path)
    manifest = path / "manifest.json"
    if manifest.exists():
        files = json.loads(manifest.read_text())["files"]
    else:
        files = sorted(p.name for p in path.glob("*.csv"))
    if not files:
        raise FileNotFoundError(f"no series CSV files in {path}")
    return [load_series(path / f) for f in files]


# --- embeddings ------------------------------------------------------------------------


@dataclass
class EmbeddingTable:
    subject_ids: list[str]
    window_starts: np.ndarray
    seconds_from_bleed: np.ndarray
    overlaps_draw: np.ndarray
    regime_labels: np.ndarray  # -1 when unknown
    embeddings: np.ndarray  # [n, d]

    def __len__(self) -> int:
        return len(self.subject_ids)

    def window_index(self) -> np.ndarray:
        """Index of each window within its subject's record (rows are time-ordered)."""
        out = np.empty(len(self), dtype=np.int64)
        counters: dict[str, int] = {}
        for i, s in enumerate(self.subject_ids):
            out[i] = counters.get(s, 0)
            counters[s] = out[i] + 1
        return out

    def bleed_window_index(self) -> np.ndarray:
        """Per row: index of the subject's first window starting at or after bleed onset."""
        idx = self.window_index()
        first: dict[str, int] = {}
        for i, s in enumerate(self.subject_ids):
            if self.seconds_from_bleed[i] >= 0 and s not in first:
                first[s] = int(idx[i])
        return np.array([first.get(s, idx[i] + 1) for i, s in enumerate(self.subject_ids)])

    def with_embeddings(self, E: np.ndarray) -> "EmbeddingTable":
        return dataclasses.replace(self, embeddings=np.asarray(E))


def embed_all(params: EncoderParams, windows: WindowSet, threads: int = 1) -> EmbeddingTable:
    if windows.windows and windows[0].values.shape[0] != params.config.in_channels:
        raise ValueError(
            f"windows have {windows[0].values.shape[0]} channels, encoder expects {params.config.in_channels}"
        )
    E = embed_many(params, [w.values for w in windows], threads)
    return EmbeddingTable(
        subject_ids=[w.subject_id for w in windows],
        window_starts=np.array([w.start_idx for w in windows], dtype=np.int64),
        seconds_from_bleed=np.array([w.seconds_from_bleed for w in windows]),
        overlaps_draw=np.array([w.overlaps_draw for w in windows], dtype=bool),
        regime_labels=np.array([-1 if w.regime_label is None else w.regime_label for w in windows], dtype=np.int64),
        embeddings=E,
    )


_EMB_META = ["subject_id", "window_start", "seconds_from_bleed", "overlaps_draw", "regime_label"]


def write_embeddings(table: EmbeddingTable, path: str | Path) -> None:
    d = table.embeddings.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(_EMB_META + [f"e{i}" for i in range(d)])
        for i in range(len(table)):
            w.writerow(
                [
                    table.subject_ids[i],
                    int(table.window_starts[i]),
                    repr(float(table.seconds_from_bleed[i])),
                    int(table.overlaps_draw[i]),
                    int(table.regime_labels[i]),
                    *map(repr, table.embeddings[i].tolist()),
                ]
            )


def read_embeddings(path: str | Path) -> EmbeddingTable:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if header[: len(_EMB_META)] != _EMB_META:
            raise ValueError(f"{path}: not an embeddings CSV")
        rows = list(r)
    return EmbeddingTable(
        subject_ids=[row[0] for row in rows],
        window_starts=np.array([int(row[1]) for row in rows], dtype=np.int64),
        seconds_from_bleed=np.array([float(row[2]) for row in rows]),
        overlaps_draw=np.array([bool(int(row[3])) for row in rows]),
        regime_labels=np.array([int(row[4]) for row in rows], dtype=np.int64),
        embeddings=np.array([[float(v) for v in row[5:]] for row in rows]).reshape(len(rows), -1),
    )


# --- timelines -----------------------------------------------------------------------------


@dataclass
class TimelineEntry:
    seconds_from_bleed: float
    label: int
    overlaps_draw: bool


@dataclass
class ClusterTimeline:
    k: int
    method: str
    window_seconds: float
    entries: dict[str, list[TimelineEntry]] = field(default_factory=dict)
    draw_seconds: dict[str, list[float]] = field(default_factory=dict)
    tags: dict[str, str] = field(default_factory=dict)  # e.g. train/test per subject

    def validate(self) -> None:
        for s, rows in self.entries.items():
            t = [e.seconds_from_bleed for e in rows]
            if any(b <= a for a, b in zip(t, t[1:])):
                raise ValueError(f"timeline for {s} is not strictly increasing in time")


def draw_seconds_of(series: Sequence[SubjectSeries]) -> dict[str, list[float]]:
    return {s.subject_id: [s.seconds_from_bleed(i) for i in s.draw_events] for s in series}


def build_timeline(
    table: EmbeddingTable,
    labels,
    k: int,
    method: str,
    window_seconds: float,
    draw_seconds: dict[str, list[float]] | None = None,
    tags: dict[str, str] | None = None,
) -> ClusterTimeline:
    tl = ClusterTimeline(k, str(method), window_seconds, draw_seconds=dict(draw_seconds or {}), tags=dict(tags or {}))
    for i, s in enumerate(table.subject_ids):
        tl.entries.setdefault(s, []).append(
            TimelineEntry(float(table.seconds_from_bleed[i]), int(labels[i]), bool(table.overlaps_draw[i]))
        )
    for s in tl.entries:
        tl.entries[s].sort(key=lambda e: e.seconds_from_bleed)
    tl.validate()
    return tl


def timeline_csv(tl: ClusterTimeline) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["subject_id", "tag", "seconds_from_bleed", "label", "overlaps_draw"])
    for s, rows in tl.entries.items():
        for e in rows:
            w.writerow([s, tl.tags.get(s, ""), repr(e.seconds_from_bleed), e.label, int(e.overlaps_draw)])
    w.writerow([])
    w.writerow(["subject_id", "draw_seconds_from_bleed"])
    for s, times in tl.draw_seconds.items():
        for t in times:
            w.writerow([s, repr(t)])
    return buf.getvalue()


def render_timeline(tl: ClusterTimeline, out_stem: str | Path | None = None) -> tuple[str, str]:
    """SVG figure and its CSV twin; written to ``<out_stem>.svg/.csv`` when given."""
    if not tl.entries:
        raise ValueError("empty timeline")
    svg, text = timeline_svg(tl), timeline_csv(tl)
    if out_stem is not None:
        out_stem = Path(out_stem)
        out_stem.with_suffix(".svg").write_text(svg)
        out_stem.with_suffix(".csv").write_text(text)
    return svg, text


def write_labels(table: EmbeddingTable, labels, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["subject_id", "window_start", "seconds_from_bleed", "label"])
        for i in range(len(table)):
            w.writerow([table.subject_ids[i], int(table.window_starts[i]), repr(float(table.seconds_from_bleed[i])), int(labels[i])])


def read_labels(path: str | Path) -> tuple[list[str], np.ndarray, np.ndarray, np.ndarray]:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if header != ["subject_id", "window_start", "seconds_from_bleed", "label"]:
            raise ValueError(f"{path}: not a labels CSV")
        rows = list(r)
    return (
        [row[0] for row in rows],
        np.array([int(row[1]) for row in rows], dtype=np.int64),
        np.array([float(row[2]) for row in rows]),
        np.array([int(row[3]) for row in rows], dtype=np.int64),
    )


# --- evaluation helpers ---------------------------------------------------------------------


def draw_cluster_share(labels, overlaps_draw, purity: float = 0.7) -> float:
    """Fraction of draw-overlapping windows that sit in clusters whose members are
    at least ``purity`` draw-overlapping."""
    labels = np.asarray(labels)
    draw = np.asarray(overlaps_draw, dtype=bool)
    if not draw.any():
        return 0.0
    pure = [c for c in np.unique(labels) if draw[labels == c].mean() >= purity]
    return float(np.isin(labels[draw], pure).mean())


def timeline_repeats(tl: ClusterTimeline) -> int:
    from .clustering import label_repeats

    return sum(label_repeats([e.label for e in rows]) for rows in tl.entries.values())


# --- features / classification -------------------------------------------------------------


def write_features(windows: WindowSet, channels: Sequence[str], path: str | Path) -> np.ndarray:
    F = feature_matrix(windows)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["subject_id", "window_start", *feature_names(channels)])
        for win, row in zip(windows, F):
            w.writerow([win.subject_id, win.start_idx, *map(repr, row.tolist())])
    return F


def read_features(path: str | Path) -> tuple[list[str], np.ndarray, np.ndarray]:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if header[:2] != ["subject_id", "window_start"]:
            raise ValueError(f"{path}: not a features CSV")
        rows = list(r)
    return (
        [row[0] for row in rows],
        np.array([int(row[1]) for row in rows], dtype=np.int64),
        np.array([[float(v) for v in row[2:]] for row in rows]).reshape(len(rows), -1),
    )


def accuracy_table_csv(reports: dict[int, CVReport]) -> str:
    """Rows per k: per-subject accuracies, then mean and std (one row per cluster count)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    first = next(iter(reports.values()))
    w.writerow(["clusters", *first.subjects, "mean", "std"])
    for k in sorted(reports, reverse=True):
        rep = reports[k]
        w.writerow([k, *(f"{rep.subject_accuracy[s]:.6f}" for s in rep.subjects), f"{rep.mean:.6f}", f"{rep.std:.6f}"])
    return buf.getvalue()


def confusion_csv(matrix) -> str:
    m = np.asarray(matrix)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["true\\pred", *range(m.shape[1])])
    for i, row in enumerate(m):
        w.writerow([i, *map(int, row)])
    return buf.getvalue()


def write_cv_report(reports: dict[int, CVReport], model: str, out: str | Path) -> list[Path]:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    written = [out / f"{model}_accuracy.csv"]
    written[0].write_text(accuracy_table_csv(reports))
    for k, rep in sorted(reports.items()):
        p = out / f"{model}_confusion_k{k}.csv"
        p.write_text(confusion_csv(rep.confusion))
        s = out / f"{model}_confusion_k{k}.svg"
        s.write_text(confusion_svg(rep.confusion, f"{model}, k={k}, aggregate over folds"))
        written += [p, s]
    return written


# --- pipeline configuration ----------------------------------------------------------------


@dataclass
class DataSection:
    dir: str | None = None
    synthetic: dict | None = None


@dataclass
class WindowSection:
    length: int = 120


@dataclass
class TimeSection:
    mode: str = "none"
    scale: float = 2.0


@dataclass
class ClusterSection:
    method: str = "ward"
    k: list[int] = field(default_factory=lambda: list(range(2, 13)))
    seed: int = 0


@dataclass
class ClassifySection:
    models: list[str] = field(default_factory=lambda: ["rf"])
    k: list[int] = field(default_factory=lambda: [2, 10])
    folds: int | None = None  # default: one fold per subject
    forest: dict = field(default_factory=dict)
    mlp: dict = field(default_factory=dict)


@dataclass
class CrossvalSection:
    enabled: bool = False
    folds: int = 4
    k: int = 10
    method: str = "ward"


@dataclass
class PipelineConfig:
    data: DataSection = field(default_factory=DataSection)
    windows: WindowSection = field(default_factory=WindowSection)
    encoder: dict = field(default_factory=dict)  # EncoderConfig fields except in_channels
    train: TrainConfig = field(default_factory=TrainConfig)
    time: TimeSection = field(default_factory=TimeSection)
    cluster: ClusterSection = field(default_factory=ClusterSection)
    classify: ClassifySection = field(default_factory=ClassifySection)
    crossval: CrossvalSection = field(default_factory=CrossvalSection)
    threads: int = 1

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        d = dict(d)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown pipeline config sections: {sorted(unknown)}")
        enc = dict(d.get("encoder", {}))
        if "in_channels" in enc:
            raise ValueError("encoder.in_channels is inferred from the data")
        EncoderConfig.from_dict({"in_channels": 1, **enc})  # key check
        classify = _strict(ClassifySection, d.get("classify"), "classify")
        _strict(ForestConfig, classify.forest, "classify.forest")
        _strict(MLPConfig, classify.mlp, "classify.mlp")
        data = _strict(DataSection, d.get("data"), "data")
        if data.synthetic is not None:
            SyntheticConfig.from_dict(data.synthetic)
        if (data.dir is None) == (data.synthetic is None):
            raise ValueError("data needs exactly one of 'dir' or 'synthetic'")
        cfg = cls(
            data=data,
            windows=_strict(WindowSection, d.get("windows"), "windows"),
            encoder=enc,
            train=TrainConfig.from_dict(d.get("train", {})),
            time=_strict(TimeSection, d.get("time"), "time"),
            cluster=_strict(ClusterSection, d.get("cluster"), "cluster"),
            classify=classify,
            crossval=_strict(CrossvalSection, d.get("crossval"), "crossval"),
            threads=int(d.get("threads", 1)),
        )
        TimeAttachMode(cfg.time.mode)
        ClusterMethod(cfg.cluster.method)
        return cfg

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def with_seed(self, seed: int) -> "PipelineConfig":
        """Copy with every stage seed set to ``seed``."""
        d = self.to_dict()
        d["train"]["seed"] = seed
        d["cluster"]["seed"] = seed
        d["classify"]["forest"] = {**d["classify"]["forest"], "seed": seed}
        d["classify"]["mlp"] = {**d["classify"]["mlp"], "seed": seed}
        if d["data"]["synthetic"] is not None:
            d["data"]["synthetic"] = {**d["data"]["synthetic"], "seed": seed}
        return PipelineConfig.from_dict(d)


def config_digest(cfg: PipelineConfig) -> str:
    return hashlib.sha256(json.dumps(cfg.to_dict(), sort_keys=True).encode()).hexdigest()


# --- encoder cross-validation -------------------------------------------------------------


@dataclass
class FoldResult:
    fold: int
    train_subjects: list[str]
    test_subjects: list[str]
    timeline: ClusterTimeline
    table: EmbeddingTable
    labels: np.ndarray


def encoder_cv(
    sources: Sequence[SubjectSeries],
    enc_cfg: EncoderConfig,
    train_cfg: TrainConfig,
    num_folds: int = 4,
    k: int = 10,
    method: str = "ward",
    window_length: int = 120,
) -> list[FoldResult]:
    """Train on each fold's training subjects, embed all subjects, cluster jointly."""
    ids = [s.subject_id for s in sources]
    if len(ids) < num_folds:
        raise ValueError(f"{len(ids)} subjects cannot fill {num_folds} folds")
    windows = windows_for(sources, window_length)
    draws = draw_seconds_of(sources)
    window_seconds = window_length / sources[0].sample_rate_hz
    results = []
    for f, test in enumerate(subject_folds(ids, num_folds)):
        train_ids = [s for s in ids if s not in test]
        if set(train_ids) & set(test):
            raise RuntimeError("fold leakage")
        params = train([s for s in sources if s.subject_id in train_ids], enc_cfg, train_cfg).params
        table = embed_all(params, windows, train_cfg.threads)
        labels = cluster(table.embeddings, k, method, train_cfg.seed).labels
        tags = {s: ("test" if s in test else "train") for s in ids}
        tl = build_timeline(table, labels, k, method, window_seconds, draws, tags)
        results.append(FoldResult(f + 1, train_ids, list(test), tl, table, labels))
    return results


# --- full run ----------------------------------------------------------------------------------


@dataclass
class RunManifest:
    tool: str
    version: str
    config: dict
    config_sha256: str
    seeds: dict
    inputs: dict[str, str]
    artifacts: dict[str, str]
    notes: dict[str, Any] = field(default_factory=dict)

    def write(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True) + "\n")

    @classmethod
    def read(cls, path: str | Path) -> "RunManifest":
        return cls(**json.loads(Path(path).read_text()))


class _Stage:
    def __init__(self, name: str):
        self.name = name

    def __enter__(self):
        log.info("stage %s", self.name)

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and not isinstance(exc, StageError):
            raise StageError(self.name, exc) from exc


def run_pipeline(cfg: PipelineConfig | dict, out_dir: str | Path) -> RunManifest:
    """Run every stage and write artifacts plus ``manifest.json`` under ``out_dir``.

    Partial artifacts are left in place if a stage fails.
    """
    if isinstance(cfg, dict):
        cfg = PipelineConfig.from_dict(cfg)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    inputs: dict[str, str] = {}
    notes: dict[str, Any] = {
        "encoder_cv_clustering": (
            "joint over train and test subjects, as in the published figure; "
            "the alternative reading assigns test windows to clusters fit on training subjects"
        ),
        "normalization": "per subject, per channel, full record",
    }

    with _Stage("data"):
        if cfg.data.synthetic is not None:
            syn = SyntheticConfig.from_dict(cfg.data.synthetic)
            raw = generate_synthetic(syn)
            write_data_dir(raw, out / "data", syn.to_dict())
        else:
            data_dir = Path(cfg.data.dir)
            raw = load_data_dir(data_dir)
            for p in sorted(data_dir.iterdir()):
                if p.is_file():
                    inputs[str(p)] = sha256_file(p)
    with _Stage("normalize"):
        series = [normalize(s) for s in raw]
        windows = windows_for(series, cfg.windows.length)
        if not len(windows):
            raise ValueError("no windows: records shorter than the window length")
    enc_cfg = EncoderConfig.from_dict({"in_channels": series[0].num_channels, **cfg.encoder})
    train_cfg = dataclasses.replace(cfg.train, threads=max(cfg.train.threads, cfg.threads))
    with _Stage("train"):
        result = train(series, enc_cfg, train_cfg)
        (out / "encoder").mkdir(exist_ok=True)
        save_checkpoint(result.params, out / "encoder" / "encoder")
        write_trace(result.trace, out / "encoder" / "loss_trace.csv")
    with _Stage("embed"):
        table = embed_all(result.params, windows, train_cfg.threads)
        write_embeddings(table, out / "embeddings.csv")
    with _Stage("attach-time"):
        mode = TimeAttachMode(cfg.time.mode)
        if mode is not TimeAttachMode.NONE:
            E = attach_time(table.embeddings, table.window_index(), mode, table.bleed_window_index(), cfg.time.scale)
            table = table.with_embeddings(E)
            write_embeddings(table, out / "embeddings_time.csv")
    window_seconds = cfg.windows.length / series[0].sample_rate_hz
    draws = draw_seconds_of(series)
    labels_by_k: dict[int, np.ndarray] = {}
    with _Stage("cluster"):
        (out / "clusters").mkdir(exist_ok=True)
        method = ClusterMethod(cfg.cluster.method)
        dend = ward_linkage(table.embeddings) if method is ClusterMethod.WARD else None
        summary = ["k,ari_vs_regimes,draw_cluster_share,timeline_repeats"]
        for k in cfg.cluster.k:
            labels = dend.cut(k) if dend is not None else kmeans(table.embeddings, k, cfg.cluster.seed).labels
            labels_by_k[k] = labels
            write_labels(table, labels, out / "clusters" / f"labels_k{k}.csv")
            tl = build_timeline(table, labels, k, method.value, window_seconds, draws)
            render_timeline(tl, out / "clusters" / f"timeline_k{k}")
            ari = adjusted_rand_index(labels, table.regime_labels) if (table.regime_labels >= 0).all() else float("nan")
            summary.append(f"{k},{ari!r},{draw_cluster_share(labels, table.overlaps_draw)!r},{timeline_repeats(tl)}")
        (out / "clusters" / "summary.csv").write_text("\n".join(summary) + "\n")
    with _Stage("features"):
        F = write_features(windows, series[0].channels, out / "features.csv")
    with _Stage("classify"):
        subjects = table.subject_ids
        folds = cfg.classify.folds or len(series)
        forest_cfg = ForestConfig(**{"threads": cfg.threads, **cfg.classify.forest})
        mlp_cfg = MLPConfig(**cfg.classify.mlp)
        for model in cfg.classify.models:
            reports = {}
            for k in cfg.classify.k:
                if k not in labels_by_k:
                    raise ValueError(f"classify k={k} is not in the cluster sweep")
                reports[k] = per_subject_cv(F, labels_by_k[k], subjects, folds, model, forest_cfg, mlp_cfg, num_classes=k)
            write_cv_report(reports, model, out / "classify")
    if cfg.crossval.enabled:
        with _Stage("crossval"):
            (out / "crossval").mkdir(exist_ok=True)
            folds_out = encoder_cv(
                series, enc_cfg, train_cfg, cfg.crossval.folds, cfg.crossval.k, cfg.crossval.method, cfg.windows.length
            )
            for fr in folds_out:
                render_timeline(fr.timeline, out / "crossval" / f"fold{fr.fold}_timeline")

    artifacts = {
        str(p.relative_to(out)): sha256_file(p)
        for p in sorted(out.rglob("*"))
        if p.is_file() and p != out / "manifest.json"
    }
    seeds = {
        "train": cfg.train.seed,
        "cluster": cfg.cluster.seed,
        "forest": forest_cfg.seed,
        "mlp": mlp_cfg.seed,
    }
    if cfg.data.synthetic is not None:
        seeds["synthetic"] = SyntheticConfig.from_dict(cfg.data.synthetic).seed
    manifest = RunManifest(
        tool="hemoembed",
        version=__version__,
        config=cfg.to_dict(),
        config_sha256=config_digest(cfg),
        seeds=seeds,
        inputs=inputs,
        artifacts=artifacts,
        notes=notes,
    )
    manifest.write(out / "manifest.json")
    return manifest


def rerun_from_manifest(manifest_path: str | Path, out_dir: str | Path) -> RunManifest:
    m = RunManifest.read(manifest_path)
    return run_pipeline(PipelineConfig.from_dict(m.config), out_dir)
