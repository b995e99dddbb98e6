"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``criterion N: PASS|FAIL ...`` line to the terminal
(even under output capture) and then asserts. The synthetic end-to-end runs
train the desk encoder on three seeds and take several minutes on one core.
"""
from __future__ import annotations

import time

import numpy as np
import pytest

from hemoembed.clustering import adjusted_rand_index, kmeans, ward_linkage, within_ss
from hemoembed.encoder import desk_config, embed_many, feature_map, init_params, load_checkpoint, save_checkpoint
from hemoembed.explain import ForestConfig, feature_matrix, per_subject_cv
from hemoembed.pipeline import build_timeline, draw_cluster_share, embed_all, rerun_from_manifest, run_pipeline, timeline_repeats
from hemoembed.sampling import Span, make_rng, placement_count, sample_negative_start, sample_triplets
from hemoembed.signals import normalize, windows_for
from hemoembed.synthetic import SyntheticConfig, generate_synthetic, repeat_regime_config
from hemoembed.timeembed import attach_time, time_offsets
from hemoembed.training import TrainConfig, grad_check, train, triplet_loss

SEEDS = (1, 2, 3)
WINDOW = 120


@pytest.fixture
def report(capsys):
    def emit(n: int, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'} {detail}")
        assert ok, detail

    return emit


# 1 -----------------------------------------------------------------------------------


def test_c1_gradient_check(report):
    t = time.perf_counter()
    rep = grad_check(step=1e-5)
    dt = time.perf_counter() - t
    report(1, rep.max_rel_error < 1e-4 and dt < 60, f"max rel error {rep.max_rel_error:.2e} over {rep.num_parameters} params in {dt:.1f}s")


# 2 -----------------------------------------------------------------------------------


def test_c2_causality(report):
    rng = np.random.default_rng(0)
    cfg = desk_config(6, embedding_dim=16)
    params = init_params(cfg, 0)
    bad = 0
    for _ in range(100):
        L = int(rng.integers(20, 200))
        t = int(rng.integers(1, L))
        x = rng.standard_normal((6, L))
        y = x.copy()
        y[:, t:] = rng.standard_normal((6, L - t)) * 10
        a, b = feature_map(params, x), feature_map(params, y)
        bad += a[:, :t].tobytes() != b[:, :t].tobytes()
    report(2, bad == 0, f"{bad}/100 trials changed past features")


# 3 -----------------------------------------------------------------------------------


def test_c3_sampler(report):
    rng = np.random.default_rng(1)
    violations = triplets = 0
    for scheme in ("cross", "within"):
        for seed in range(2500):
            seqs = [rng.standard_normal((1, int(rng.integers(40, 200)))) for _ in range(4)]
            b = sample_triplets(seqs, 2, scheme, seed, min_length=8)
            for r, p, negs in zip(b.references, b.positives, b.negatives):
                triplets += 1
                violations += not r.contains(p)
                violations += sum(n.overlaps(r) for n in negs)
                if scheme == "within":
                    violations += sum(n.source != r.source for n in negs)
    # placement uniformity: every legal start equally likely, each count within 3 sigma
    ref = Span(0, 3, 4)
    L, m, draws = 10, 2, 50_000
    g = make_rng(11)
    counts = np.bincount([sample_negative_start(g, L, ref, m) for _ in range(draws)], minlength=L)
    legal = [s for s in range(L - m + 1) if s + m <= ref.start or s >= ref.stop]
    p = 1 / placement_count(L, ref, m)
    sd = np.sqrt(draws * p * (1 - p))
    worst = np.abs(counts[legal] - draws * p).max() / sd
    illegal = counts.sum() - counts[legal].sum()
    ok = violations == 0 and triplets >= 20_000 and worst < 3.0 and illegal == 0
    report(3, ok, f"{violations} violations in {triplets} triplets; max |z| over {len(legal)} placements {worst:.2f}")


# 4 -----------------------------------------------------------------------------------


def test_c4_loss_exactness(report):
    K = 5
    z = np.zeros(4)
    v = triplet_loss(z, z, [z] * K).total
    err = abs(v - (K + 1) * np.log(2))
    big = np.full(1, 100.0)  # dot products of +/- 1e4
    worst = [triplet_loss(big, s * big, [t * big] * K).total for s in (1, -1) for t in (1, -1)]
    finite = np.all(np.isfinite(worst))
    extreme = triplet_loss(big, -big, [big] * K).total  # both terms saturate at 1e4
    ok = err < 1e-12 and finite and extreme == pytest.approx((K + 1) * 1e4, rel=1e-12)
    report(4, ok, f"|L0 - (K+1)ln2| = {err:.1e}; saturated loss {extreme:.6g}")


# 5 -----------------------------------------------------------------------------------


def _brute_ward_first_merge(clusters):
    best = None
    for i in range(len(clusters)):
        for j in range(i + 1, len(clusters)):
            a, b = clusters[i], clusters[j]
            u = np.vstack([a, b])
            cost = ((u - u.mean(0)) ** 2).sum() - ((a - a.mean(0)) ** 2).sum() - ((b - b.mean(0)) ** 2).sum()
            if best is None or cost < best[0] - 1e-12:
                best = (cost, i, j)
    return best


def _partitions(n, k):
    def rec(i, labels, used):
        if i == n:
            if used == k:
                yield list(labels)
            return
        for c in range(min(used + 1, k)):
            labels.append(c)
            yield from rec(i + 1, labels, max(used, c + 1))
            labels.pop()

    yield from rec(0, [], 0)


def test_c5_clustering_oracles(report):
    rng = np.random.default_rng(3)
    ward_ok = True
    for n in (6, 20, 50):
        X = rng.standard_normal((n, 3))
        d = ward_linkage(X)
        members = {i: [i] for i in range(n)}
        for step, m in enumerate(d.merges):
            ids = sorted(members)
            cost, i, j = _brute_ward_first_merge([X[members[c]] for c in ids])
            if {ids[i], ids[j]} != {m.a, m.b} or abs(cost - m.cost) > 1e-9 * max(1.0, cost):
                ward_ok = False
                break
            members[n + step] = members.pop(m.a) + members.pop(m.b)
    trace_ok = optimum_ok = True
    for trial in range(30):
        n, k = int(rng.integers(4, 9)), int(rng.integers(2, 4))
        X = rng.standard_normal((n, 2))
        res = kmeans(X, k, seed=trial)
        trace_ok &= all(b <= a + 1e-12 for a, b in zip(res.objective_trace, res.objective_trace[1:]))
        best = min(within_ss(X, np.array(p)) for p in _partitions(n, k))
        optimum_ok &= within_ss(X, res.labels) >= best - 1e-9
    sep_ok = True
    for trial in range(10):
        centres = np.array([[0.0, 0.0], [100.0, 0.0], [0.0, 100.0]])
        X = np.repeat(centres, [3, 2, 3], axis=0) + rng.standard_normal((8, 2)) * 0.1
        best = min(within_ss(X, np.array(p)) for p in _partitions(8, 3))
        sep_ok &= abs(within_ss(X, kmeans(X, 3, seed=trial).labels) - best) < 1e-9
    ari = adjusted_rand_index([0, 0, 1, 1], [0, 1, 0, 1])
    ok = ward_ok and trace_ok and optimum_ok and sep_ok and abs(ari + 0.5) < 1e-12
    report(5, ok, f"ward={ward_ok} monotone={trace_ok} >=optimum={optimum_ok} separated={sep_ok} ARI={ari!r}")


# 6, 7 --------------------------------------------------------------------------------


@pytest.fixture(scope="module")
def synthetic_runs():
    runs = {}
    for seed in SEEDS:
        series = [normalize(s) for s in generate_synthetic(SyntheticConfig(seed=seed))]
        t = time.perf_counter()
        res = train(series, desk_config(series[0].num_channels), TrainConfig(seed=seed))
        dt = time.perf_counter() - t
        ws = windows_for(series, WINDOW)
        table = embed_all(res.params, ws)
        runs[seed] = (series, ws, table, ward_linkage(table.embeddings), dt)
    return runs


def test_c6_synthetic_regimes_and_draws(report, synthetic_runs):
    aris, shares, secs = [], [], []
    for seed, (_, _, table, dend, dt) in synthetic_runs.items():
        aris.append(adjusted_rand_index(dend.cut(3), table.regime_labels))
        shares.append(min(draw_cluster_share(dend.cut(k), table.overlaps_draw) for k in range(4, 13)))
        secs.append(dt)
    passing = sum(a >= 0.5 for a in aris)
    ok = passing >= 2 and min(shares) > 0.5 and max(secs) < 600
    report(
        6,
        ok,
        f"k=3 ARI per seed {[round(a, 3) for a in aris]} ({passing}/3 >= 0.5); "
        f"min share of draw windows in >=70%-draw clusters over k=4..12: {[round(s, 2) for s in shares]}; "
        f"train {max(secs):.0f}s",
    )


def test_c7_forest_accuracy_trend(report, synthetic_runs):
    series, ws, table, dend, _ = synthetic_runs[SEEDS[0]]
    X = feature_matrix(ws)
    subjects = np.array(table.subject_ids)
    acc = {}
    for k in (2, 10):
        rep = per_subject_cv(X, dend.cut(k), subjects, 4, "rf", ForestConfig(num_trees=50, seed=0), num_classes=k)
        acc[k] = rep.mean
    report(7, acc[2] > acc[10], f"RF per-subject CV accuracy k=2 {acc[2]:.3f} vs k=10 {acc[10]:.3f}")


# 8 -----------------------------------------------------------------------------------


def test_c8_cv_hygiene(report):
    subjects = np.repeat([f"S{i:02d}" for i in range(1, 17)], 6)
    X = np.arange(len(subjects), dtype=float)[:, None]
    y = np.arange(len(subjects)) % 3
    problems = []
    for folds in (16, 4):
        tested = []

        def fit_predict(Xtr, ytr, Xte):
            tr = set(subjects[Xtr[:, 0].astype(int)])
            te = set(subjects[Xte[:, 0].astype(int)])
            if tr & te:
                problems.append(f"{folds}-fold leak {sorted(tr & te)}")
            tested.extend(sorted(te))
            return np.zeros(len(Xte), dtype=int)

        per_subject_cv(X, y, subjects, folds, fit_predict, num_classes=3)
        if sorted(tested) != sorted(set(subjects)):
            problems.append(f"{folds}-fold test sets do not partition the subjects")
    report(8, not problems, "; ".join(problems) or "16- and 4-fold test sets partition subjects with no leakage")


# 9 -----------------------------------------------------------------------------------


def test_c9_time_embedding(report):
    rng = np.random.default_rng(0)
    bound_ok = True
    for _ in range(50):
        E = rng.standard_normal((int(rng.integers(1, 60)), 8)) * rng.uniform(0.01, 100)
        idx = np.arange(len(E))
        for mode in ("full", "from-bleed"):
            off = time_offsets(E, idx, mode, np.full(len(E), len(E) // 2))
            bound_ok &= bool(np.all(np.abs(off) < 2 * E.std()))
        bound_ok &= attach_time(E, idx, "none").tobytes() == E.tobytes()

    series = [normalize(s) for s in generate_synthetic(repeat_regime_config(seed=0))]
    res = train(series, desk_config(series[0].num_channels), TrainConfig(iterations=500, seed=0))
    table = embed_all(res.params, windows_for(series, WINDOW))
    repeats = {}
    for mode in ("none", "full"):
        E = attach_time(table.embeddings, table.window_index(), mode)
        labels = ward_linkage(E).cut(3)
        repeats[mode] = timeline_repeats(build_timeline(table, labels, 3, "ward", WINDOW / 50.0))
    ok = bound_ok and repeats["full"] < repeats["none"]
    report(9, ok, f"bound and identity hold={bound_ok}; k=3 label repeats none={repeats['none']} full={repeats['full']}")


# 10 ----------------------------------------------------------------------------------


TINY = {
    "data": {"synthetic": {"num_subjects": 4, "baseline_minutes": 1.0, "bleed_minutes": 3.0, "draw_interval_minutes": 1.0}},
    "encoder": {"hidden_channels": 8, "num_layers": 3, "embedding_dim": 8},
    "train": {"iterations": 20, "batch_size": 4, "negatives": 2},
    "time": {"mode": "full"},
    "cluster": {"k": [2, 3, 4]},
    "classify": {"models": ["rf"], "k": [2, 4], "folds": 4, "forest": {"num_trees": 10}},
}


def test_c10_reproducibility(report, tmp_path):
    first = run_pipeline(TINY, tmp_path / "a")
    again = rerun_from_manifest(tmp_path / "a" / "manifest.json", tmp_path / "b")
    csvs = sorted(p for p in first.artifacts if p.endswith(".csv"))
    differing = [p for p in csvs if (tmp_path / "a" / p).read_bytes() != (tmp_path / "b" / p).read_bytes()]

    params = init_params(desk_config(6, embedding_dim=16), 5)
    save_checkpoint(params, tmp_path / "ckpt")
    loaded = load_checkpoint(tmp_path / "ckpt")
    x = [np.random.default_rng(2).standard_normal((6, 120)) for _ in range(4)]
    same = embed_many(params, x).tobytes() == embed_many(loaded, x).tobytes()
    ok = not differing and len(csvs) > 0 and same and again.artifacts == first.artifacts
    report(10, ok, f"{len(csvs) - len(differing)}/{len(csvs)} CSV artifacts byte-identical on rerun; checkpoint embeddings identical={same}")
