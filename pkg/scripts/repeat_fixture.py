"""Label repeats on the revisit fixture (baseline, A, B, A) with and without time attachment.

    python3 scripts/repeat_fixture.py --iterations 500
"""
from __future__ import annotations

import argparse

from hemoembed.clustering import adjusted_rand_index, ward_linkage
from hemoembed.encoder import desk_config
from hemoembed.pipeline import build_timeline, embed_all, timeline_repeats
from hemoembed.signals import normalize, windows_for
from hemoembed.synthetic import generate_synthetic, repeat_regime_config
from hemoembed.timeembed import attach_time
from hemoembed.training import TrainConfig, train


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--iterations", type=int, default=500)
    ap.add_argument("--window", type=int, default=120)
    ap.add_argument("--k", type=int, nargs="+", default=[3, 4, 6])
    args = ap.parse_args()

    series = [normalize(s) for s in generate_synthetic(repeat_regime_config(seed=args.seed))]
    res = train(series, desk_config(series[0].num_channels), TrainConfig(iterations=args.iterations, seed=args.seed))
    table = embed_all(res.params, windows_for(series, args.window))
    seconds = args.window / series[0].sample_rate_hz
    print("mode        k  repeats  ari")
    for mode in ("none", "full", "from-bleed"):
        E = attach_time(table.embeddings, table.window_index(), mode, table.bleed_window_index())
        dend = ward_linkage(E)
        for k in args.k:
            lab = dend.cut(k)
            reps = timeline_repeats(build_timeline(table, lab, k, "ward", seconds))
            print(f"{mode:<10} {k:>2} {reps:>8}  {adjusted_rand_index(lab, table.regime_labels):.3f}")


if __name__ == "__main__":
    main()
