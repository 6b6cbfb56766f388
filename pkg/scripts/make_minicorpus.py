"""Write the synthetic mini-corpus (phones.txt, uttNNN.wav, uttNNN.lab)."""

import argparse

from prosodylabels.minicorpus import make_minicorpus


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("out_dir")
    ap.add_argument("-n", "--utterances", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--fs", type=int, default=24000)
    args = ap.parse_args()
    stems = make_minicorpus(args.out_dir, args.utterances, args.seed, args.fs)
    print(f"wrote {len(stems)} utterances to {args.out_dir}")


if __name__ == "__main__":
    main()
