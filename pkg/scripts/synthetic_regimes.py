"""Train the desk encoder on synthetic data and score Ward clusters against the regimes.

    python3 scripts/synthetic_regimes.py --seeds 1 2 3
    python3 scripts/synthetic_regimes.py --seeds 1 --airway-hz 0.25 --iterations 500

Prints one line per seed with ARI against ground-truth regimes, ARI against
subject identity (should stay near zero) and the share of draw windows that
land in mostly-draw clusters.
"""
from __future__ import annotations

import argparse
import dataclasses
import time

import numpy as np

from hemoembed.clustering import adjusted_rand_index, ward_linkage
from hemoembed.encoder import desk_config
from hemoembed.pipeline import draw_cluster_share, embed_all
from hemoembed.signals import normalize, windows_for
from hemoembed.synthetic import SyntheticConfig, default_channels, generate_synthetic
from hemoembed.training import TrainConfig, train


def channels(airway_hz: float | None):
    ch = default_channels()
    if airway_hz is None:
        return ch
    if airway_hz == 0:
        return [c for c in ch if c.name != "airway"]
    return [dataclasses.replace(c, frequency_hz=airway_hz) if c.name == "airway" else c for c in ch]


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--seeds", type=int, nargs="+", default=[1, 2, 3])
    ap.add_argument("--iterations", type=int, default=TrainConfig.iterations)
    ap.add_argument("--negatives", type=int, default=TrainConfig.negatives)
    ap.add_argument("--scheme", choices=["cross", "within"], default="cross")
    ap.add_argument("--airway-hz", type=float, default=None, help="override airway frequency (0 drops the channel)")
    ap.add_argument("--window", type=int, default=120)
    ap.add_argument("--k", type=int, nargs="+", default=[3, 4, 8, 10])
    args = ap.parse_args()

    for seed in args.seeds:
        series = [normalize(s) for s in generate_synthetic(SyntheticConfig(seed=seed, channels=channels(args.airway_hz)))]
        tc = TrainConfig(iterations=args.iterations, negatives=args.negatives, scheme=args.scheme, seed=seed)
        t = time.perf_counter()
        res = train(series, desk_config(series[0].num_channels), tc)
        dt = time.perf_counter() - t
        table = embed_all(res.params, windows_for(series, args.window))
        dend = ward_linkage(table.embeddings)
        subj = np.unique(table.subject_ids, return_inverse=True)[1]
        parts = []
        for k in args.k:
            lab = dend.cut(k)
            parts.append(
                f"k{k} ari={adjusted_rand_index(lab, table.regime_labels):.3f} "
                f"subj={adjusted_rand_index(lab, subj):.3f} draw={draw_cluster_share(lab, table.overlaps_draw):.2f}"
            )
        losses = res.losses()
        n = max(1, len(losses) // 10)
        head = f"seed {seed} train {dt:.0f}s"
        if len(losses):
            head += f" loss {losses[:n].mean():.2f}->{losses[-n:].mean():.2f}"
        print(head, "|", " | ".join(parts), flush=True)


if __name__ == "__main__":
    main()
