from __future__ import annotations

import csv
import json

import numpy as np
import pytest

from hemoembed import pipeline as P
from hemoembed.cli import main
from hemoembed.encoder import EncoderConfig, init_params
from hemoembed.signals import normalize, windows_for
from hemoembed.synthetic import SyntheticConfig, generate_synthetic
from hemoembed.training import TrainConfig

TINY = {
    "data": {"synthetic": {"num_subjects": 4, "baseline_minutes": 1.0, "bleed_minutes": 3.0, "draw_interval_minutes": 1.0}},
    "windows": {"length": 120},
    "encoder": {"hidden_channels": 6, "num_layers": 3, "embedding_dim": 8},
    "train": {"iterations": 4, "batch_size": 3, "negatives": 2, "sequence_length": 300},
    "time": {"mode": "full"},
    "cluster": {"k": [2, 3, 4]},
    "classify": {"models": ["rf", "mlp"], "k": [2, 4], "folds": 4, "forest": {"num_trees": 8}, "mlp": {"epochs": 30}},
    "crossval": {"enabled": True, "folds": 2, "k": 3},
}


def syn_series(n=4):
    cfg = SyntheticConfig(num_subjects=n, baseline_minutes=1.0, bleed_minutes=3.0, draw_interval_minutes=1.0)
    return [normalize(s) for s in generate_synthetic(cfg)]


@pytest.fixture(scope="module")
def run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    return out, P.run_pipeline(TINY, out)


def test_run_writes_everything(run):
    out, m = run
    assert (out / "manifest.json").exists()
    for k in (2, 3, 4):
        assert (out / "clusters" / f"labels_k{k}.csv").exists()
        assert (out / "clusters" / f"timeline_k{k}.svg").exists()
    for name, digest in m.artifacts.items():
        assert P.sha256_file(out / name) == digest
    listed = set(m.artifacts)
    on_disk = {str(p.relative_to(out)) for p in out.rglob("*") if p.is_file()}
    assert on_disk == listed | {"manifest.json"}
    assert m.seeds["train"] == 0 and m.version
    assert "joint" in m.notes["encoder_cv_clustering"]


def test_rerun_from_manifest_identical(run, tmp_path):
    out, m = run
    m2 = P.rerun_from_manifest(out / "manifest.json", tmp_path)
    assert m2.artifacts == m.artifacts
    assert (tmp_path / "manifest.json").read_bytes() == (out / "manifest.json").read_bytes()


def test_k_sweep_default_is_2_to_12():
    cfg = P.PipelineConfig.from_dict({"data": {"dir": "x"}})
    assert cfg.cluster.k == list(range(2, 13))


def test_config_rejects_unknown_keys():
    with pytest.raises(ValueError, match="unknown"):
        P.PipelineConfig.from_dict({**TINY, "extra": {}})
    with pytest.raises(ValueError, match="unknown"):
        P.PipelineConfig.from_dict({**TINY, "cluster": {"kk": [2]}})
    with pytest.raises(ValueError, match="unknown"):
        P.PipelineConfig.from_dict({**TINY, "encoder": {"width": 3}})
    with pytest.raises(ValueError):
        P.PipelineConfig.from_dict({**TINY, "data": {}})


def test_stage_error_names_stage(tmp_path):
    bad = {**TINY, "classify": {**TINY["classify"], "k": [7]}}
    with pytest.raises(P.StageError, match="classify"):
        P.run_pipeline(bad, tmp_path)
    assert (tmp_path / "embeddings.csv").exists()  # partial artifacts kept


def test_embeddings_round_trip_and_rows(tmp_path):
    series = syn_series(2)
    ws = windows_for(series, 120)
    p = init_params(EncoderConfig(6, hidden_channels=4, num_layers=2, embedding_dim=5), 0)
    t = P.embed_all(p, ws)
    assert len(t) == len(ws) == 2 * (4 * 60 * 50 // 120)
    P.write_embeddings(t, tmp_path / "e.csv")
    u = P.read_embeddings(tmp_path / "e.csv")
    assert u.embeddings.tobytes() == t.embeddings.tobytes()
    assert u.subject_ids == t.subject_ids
    np.testing.assert_array_equal(u.overlaps_draw, t.overlaps_draw)
    P.write_embeddings(P.embed_all(p, ws), tmp_path / "f.csv")
    assert (tmp_path / "e.csv").read_bytes() == (tmp_path / "f.csv").read_bytes()
    with pytest.raises(ValueError, match="channels"):
        P.embed_all(init_params(EncoderConfig(3), 0), ws)


def test_window_index_and_bleed_index():
    ws = windows_for(syn_series(2), 600)
    p = init_params(EncoderConfig(6, hidden_channels=2, num_layers=1, embedding_dim=2), 0)
    t = P.embed_all(p, ws)
    idx = t.window_index()
    assert idx[0] == 0 and idx[20] == 0 and idx[19] == 19
    assert np.all(t.bleed_window_index() == 5)  # 1 minute at 50 Hz = 5 windows of 600


def test_timeline_bijection_and_draw_dots():
    series = syn_series(2)
    ws = windows_for(series, 120)
    t = P.embed_all(init_params(EncoderConfig(6, hidden_channels=2, num_layers=1, embedding_dim=2), 0), ws)
    labels = np.arange(len(t)) % 3
    tl = P.build_timeline(t, labels, 3, "ward", 2.4, P.draw_seconds_of(series))
    assert sum(len(v) for v in tl.entries.values()) == len(ws)
    s = series[0]
    assert tl.draw_seconds["S01"] == [(d - s.bleed_start_idx) / 50.0 for d in s.draw_events]
    svg, text = P.render_timeline(tl)
    assert svg.count("<circle") == sum(len(v) for v in tl.draw_seconds.values())
    assert "t=0" in svg
    rows = [r for r in csv.reader(text.splitlines()) if r and r[0] in ("S01", "S02") and len(r) == 5]
    assert len(rows) == len(ws)


def test_single_cluster_single_band():
    t = P.EmbeddingTable(["A"] * 3, np.arange(3), np.array([0.0, 1.0, 2.0]), np.zeros(3, bool), np.zeros(3, int), np.zeros((3, 1)))
    svg, _ = P.render_timeline(P.build_timeline(t, [0, 0, 0], 1, "ward", 1.0))
    assert svg.count("<rect") == 1


def test_palette_deterministic():
    from hemoembed.render import label_color

    assert [label_color(i) for i in range(20)] == [label_color(i) for i in range(20)]
    assert label_color(0) != label_color(1)


def test_draw_cluster_share():
    labels = np.array([0, 0, 1, 1, 1, 2])
    draw = np.array([0, 0, 1, 1, 0, 1], bool)
    # cluster 1 is 2/3 draws (< 0.7), cluster 2 is pure
    assert P.draw_cluster_share(labels, draw) == pytest.approx(1 / 3)
    assert P.draw_cluster_share(labels, draw, purity=0.6) == 1.0


def test_encoder_cv_folds():
    series = syn_series(4)
    enc = EncoderConfig(6, hidden_channels=3, num_layers=2, embedding_dim=4)
    tc = TrainConfig(iterations=2, batch_size=2, negatives=1, sequence_length=200)
    folds = P.encoder_cv(series, enc, tc, num_folds=2, k=3)
    tested = sorted(s for f in folds for s in f.test_subjects)
    assert tested == ["S01", "S02", "S03", "S04"]
    assert folds[0].train_subjects == ["S01", "S02"]
    for f in folds:
        assert set(f.timeline.entries) == {"S01", "S02", "S03", "S04"}
        assert sorted(f.timeline.tags.values()).count("test") == 2
    with pytest.raises(ValueError):
        P.encoder_cv(series[:1], enc, tc, num_folds=2)


def test_cli_stages(tmp_path):
    data = tmp_path / "data"
    (tmp_path / "syn.json").write_text(json.dumps(TINY["data"]["synthetic"]))
    (tmp_path / "enc.json").write_text(json.dumps(TINY["encoder"]))
    assert main(["gen-data", "--config", str(tmp_path / "syn.json"), "--out", str(data)]) == 0
    assert main(["train", "--data", str(data), "--enc-config", str(tmp_path / "enc.json"), "--iterations", "2",
                 "--negatives", "1", "--scheme", "within", "--min-length", "8", "--out", str(tmp_path / "ckpt")]) == 0
    assert main(["embed", "--data", str(data), "--checkpoint", str(tmp_path / "ckpt" / "encoder"), "--out", str(tmp_path / "e.csv")]) == 0
    assert main(["attach-time", "--embeddings", str(tmp_path / "e.csv"), "--mode", "from-bleed", "--out", str(tmp_path / "et.csv")]) == 0
    assert main(["cluster", "--embeddings", str(tmp_path / "et.csv"), "--k", "3", "--out", str(tmp_path / "l.csv")]) == 0
    assert main(["features", "--data", str(data), "--out", str(tmp_path / "f.csv")]) == 0
    assert main(["classify", "--features", str(tmp_path / "f.csv"), "--labels", str(tmp_path / "l.csv"), "--folds", "4",
                 "--out", str(tmp_path / "rep")]) == 0
    assert (tmp_path / "rep" / "rf_accuracy.csv").exists()
    assert main(["report", "--labels", str(tmp_path / "l.csv"), "--data", str(data), "--out", str(tmp_path / "tl")]) == 0
    assert (tmp_path / "tl.svg").exists()
    header = next(csv.reader(open(tmp_path / "l.csv")))
    assert header == ["subject_id", "window_start", "seconds_from_bleed", "label"]


def test_cli_errors(tmp_path, capsys):
    (tmp_path / "bad.json").write_text(json.dumps({"data": {"dir": "x"}, "bogus": 1}))
    assert main(["run", "--config", str(tmp_path / "bad.json"), "--out", str(tmp_path / "o")]) == 1
    assert "unknown" in capsys.readouterr().err


def test_cli_global_options_before_subcommand():
    from hemoembed.cli import build_parser

    p = build_parser()
    assert p.parse_args(["--seed", "3", "--out", "o", "cluster", "--embeddings", "e"]).seed == 3
    assert p.parse_args(["cluster", "--seed", "4", "--embeddings", "e"]).seed == 4
    assert p.parse_args(["cluster", "--embeddings", "e"]).seed is None
