"""Print SSE-vs-k curves and elbow picks for a features CSV.

Compares the picked k with the 12 (F0) / 15 (duration) defaults.
"""

import argparse
from pathlib import Path

import numpy as np

from prosodylabels import cluster as C
from prosodylabels.features import features_from_csv


def second_diff(curve):
    ks = sorted(curve)
    return {k: curve[a] - 2 * curve[k] + curve[b] for a, k, b in zip(ks, ks[1:], ks[2:])}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("features")
    ap.add_argument("--k-range", type=int, nargs=2, default=C.DEFAULT_K_RANGE)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    feats = features_from_csv(Path(args.features).read_text())
    k_range = tuple(args.k_range)
    f0 = C.build_f0_vocab(feats, k="auto", k_range=k_range, seed=args.seed)
    dur = C.build_duration_vocab(feats, k="auto", k_range=k_range, seed=args.seed)
    for name, vocab, default in (("f0", f0, C.DEFAULT_F0_K), ("duration", dur, C.DEFAULT_DURATION_K)):
        d2 = second_diff(vocab.sse_curve)
        print(f"{name}: elbow k={vocab.k} (default {default})")
        for k, sse in sorted(vocab.sse_curve.items()):
            print(f"  k={k:2d} sse={sse:.6g} d2={d2.get(k, np.nan):.3g}")


if __name__ == "__main__":
    main()
