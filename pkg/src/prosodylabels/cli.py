"""Command-line front end.

Subcommands: extract, cluster, label, modify, sweep, notes, attn. Every
command writes into the ``--out`` directory. Exit status 2 marks bad input;
3 marks a failed internal check.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import cluster, features as feat, ingest, molattn, notes, pitch
from .audio import read_wav
from .errors import EmptyCorpus, NoVoicedFrames, ProsodyError

log = logging.getLogger("prosodylabels")

EXIT_INPUT = 2
EXIT_INTERNAL = 3

SINGLE_OFFSET_BOUND = 8
JOINT_OFFSET_BOUND = 2


@dataclass
class PipelineConfig:
    corpus_dir: str | None = None
    output_dir: str = "out"
    pitch: pitch.PitchConfig = field(default_factory=pitch.PitchConfig)
    median_w: int = 5
    mean_w: int = 3
    f0_k: int | str = cluster.DEFAULT_F0_K
    dur_k: int | str = cluster.DEFAULT_DURATION_K
    k_range: tuple[int, int] = cluster.DEFAULT_K_RANGE
    n_init: int = cluster.DEFAULT_RESTARTS
    seed: int = 0
    jobs: int = 1

    def __post_init__(self):
        for name in ("f0_k", "dur_k"):
            k = getattr(self, name)
            if k != "auto":
                k = int(k)
                if k < 2:
                    raise ProsodyError(f"{name} must be >= 2 or 'auto', got {k}")
                setattr(self, name, k)
        self.k_range = tuple(int(v) for v in self.k_range)

    @classmethod
    def from_dict(cls, doc: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ProsodyError(f"unknown config keys: {sorted(unknown)}")
        doc = dict(doc)
        if "pitch" in doc:
            doc["pitch"] = pitch.PitchConfig(**doc["pitch"])
        return cls(**doc)


def load_config(args) -> PipelineConfig:
    cfg = PipelineConfig()
    if getattr(args, "config", None):
        cfg = PipelineConfig.from_dict(json.loads(Path(args.config).read_text()))
    overrides = {}
    for name in ("seed", "f0_k", "dur_k", "jobs"):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    if getattr(args, "k_range", None):
        overrides["k_range"] = tuple(args.k_range)
    if getattr(args, "out", None):
        overrides["output_dir"] = args.out
    return replace(cfg, **overrides)


def _out_dir(cfg: PipelineConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _k_arg(text: str):
    return text if text == "auto" else int(text)


# extract


def _pair_corpus(corpus: Path) -> list[tuple[Path, Path]]:
    wavs = {p.stem: p for p in corpus.glob("*.wav")}
    labs = {p.stem: p for p in corpus.glob("*.lab")}
    for stem in sorted(set(wavs) ^ set(labs)):
        missing = ".lab" if stem in wavs else ".wav"
        log.warning("skipping %s: no matching %s file", stem, missing)
    return [(wavs[s], labs[s]) for s in sorted(set(wavs) & set(labs))]


def _process_utterance(job):
    wav_path, lab_path, table, cfg = job
    samples, fs = read_wav(wav_path)
    utt = ingest.parse_label_file(
        lab_path.read_text(encoding="utf-8"),
        table,
        utt_id=lab_path.stem,
        sample_rate_hz=fs,
        audio_path=wav_path.name,
    )
    utt = ingest.mark_phrase_final(utt)
    duration = len(samples) / fs
    if utt.end_s > duration + 1e-3:
        return utt, None, None, f"labels end at {utt.end_s:.3f} s past audio end {duration:.3f} s"
    raw = pitch.extract_pitch_track(samples, fs, cfg.pitch)
    try:
        track = pitch.process_track(raw, cfg.median_w, cfg.mean_w)
    except NoVoicedFrames:
        return utt, raw, None, "no voiced frames"
    return utt, raw, feat.build_features(utt, track), None


def cmd_extract(args) -> int:
    cfg = load_config(args)
    corpus = Path(args.corpus or cfg.corpus_dir or ".")
    if not corpus.is_dir():
        raise EmptyCorpus(f"{corpus} is not a directory")
    pairs = _pair_corpus(corpus)
    if not pairs:
        raise EmptyCorpus(f"no paired .wav/.lab files in {corpus}")
    phones = Path(args.phones) if args.phones else corpus / "phones.txt"
    if phones.exists():
        table = ingest.PhoneClassTable.parse(phones.read_text(encoding="utf-8"))
    else:
        log.warning("no phone table at %s; every label is treated as a phoneme", phones)
        table = ingest.PhoneClassTable()

    jobs = [(w, l, table, cfg) for w, l in pairs]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(cfg.jobs) as pool:
            results = list(pool.map(_process_utterance, jobs))
    else:
        results = [_process_utterance(j) for j in jobs]

    out = _out_dir(cfg)
    (out / "pitch").mkdir(exist_ok=True)
    all_features, utts = [], []
    n_unvoiced = 0
    for utt, raw, feats, problem in results:
        if problem:
            log.warning("skipping %s: %s", utt.id, problem)
            continue
        utts.append(utt)
        all_features.extend(feats)
        n_unvoiced += feat.count_unvoiced_targets(utt, raw)
        (out / "pitch" / f"{utt.id}.csv").write_text(pitch.track_to_csv(raw))
    if not utts:
        raise EmptyCorpus("no utterance survived extraction")

    (out / "features.csv").write_text(feat.features_to_csv(all_features))
    (out / "utterances.jsonl").write_text(ingest.dump_utterances(utts))
    summary = {
        "utterances": len(utts),
        "phonemes": len(all_features),
        "unvoiced_interpolated": n_unvoiced,
        "skipped": len(results) - len(utts),
    }
    (out / "extract_summary.json").write_text(json.dumps(summary, indent=1) + "\n")
    print(" ".join(f"{k}={v}" for k, v in summary.items()))
    return 0


# cluster / label / modify / sweep


def _read_features(path: str) -> list[feat.ProsodicFeature]:
    features = feat.features_from_csv(Path(path).read_text(encoding="utf-8"))
    if not features:
        raise ProsodyError(f"{path} holds no features")
    return features


def _curve_csv(curve: dict) -> str:
    return "k,sse\n" + "".join(f"{k},{float(v)!r}\n" for k, v in sorted(curve.items()))


def cmd_cluster(args) -> int:
    cfg = load_config(args)
    features = _read_features(args.features)
    out = _out_dir(cfg)
    common = dict(seed=cfg.seed, n_init=cfg.n_init, k_range=cfg.k_range, with_curve=True)
    f0_vocab = cluster.build_f0_vocab(features, k=cfg.f0_k, **common)
    dur_vocab = cluster.build_duration_vocab(features, k=cfg.dur_k, **common)
    for vocab in (f0_vocab, dur_vocab):
        (out / f"{vocab.feature}_vocab.json").write_text(vocab.to_json())
        (out / f"{vocab.feature}_sse_curve.csv").write_text(_curve_csv(vocab.sse_curve))
    print(f"f0 k={f0_vocab.k} duration k={dur_vocab.k} groups={len(dur_vocab.groups)}")
    return 0


def _read_vocab(path: str) -> cluster.ClusterVocabulary:
    return cluster.ClusterVocabulary.from_json(Path(path).read_text(encoding="utf-8"))


def cmd_label(args) -> int:
    cfg = load_config(args)
    features = _read_features(args.features)
    out = _out_dir(cfg)
    for path in args.vocab:
        vocab = _read_vocab(path)
        seqs = cluster.label_corpus(features, vocab)
        (out / f"{vocab.feature}_labels.txt").write_text(cluster.labels_to_text(seqs))
    return 0


def _load_sequences(features, vocab, labels_path) -> list[cluster.LabelSequence]:
    by_utt = feat.group_by_utterance(features)
    raw = cluster.labels_from_text(Path(labels_path).read_text(encoding="utf-8"))
    seqs = []
    for uid, labels in raw.items():
        if uid not in by_utt:
            raise ProsodyError(f"{labels_path}: utterance {uid!r} has no features")
        seqs.append(cluster.with_groups(uid, labels, by_utt[uid], vocab))
    return seqs


def cmd_modify(args) -> int:
    cfg = load_config(args)
    bound = JOINT_OFFSET_BOUND if args.joint else SINGLE_OFFSET_BOUND
    if abs(args.delta) > bound and not args.force:
        raise ProsodyError(
            f"offset {args.delta:+d} outside [-{bound}, +{bound}]; pass --force to allow it"
        )
    features = _read_features(args.features)
    vocab = _read_vocab(args.vocab)
    seqs = _load_sequences(features, vocab, args.labels)
    moved = [cluster.offset_labels(s, args.delta, vocab) for s in seqs]
    out = _out_dir(cfg)
    (out / f"{vocab.feature}_labels_d{args.delta:+d}.txt").write_text(cluster.labels_to_text(moved))
    return 0


def cmd_sweep(args) -> int:
    cfg = load_config(args)
    features = _read_features(args.features)
    vocab = _read_vocab(args.vocab)
    templates = cluster.label_corpus(features, vocab)
    sweeps = [cluster.sweep_labels(s, vocab) for s in templates]
    out = _out_dir(cfg)
    for c in range(vocab.max_size):
        text = cluster.labels_to_text(per_utt[c] for per_utt in sweeps)
        (out / f"{vocab.feature}_sweep_c{c:02d}.txt").write_text(text)
    print(f"{vocab.max_size} sweep files")
    return 0


# notes / attn


def cmd_notes(args) -> int:
    cfg = load_config(args)
    features = _read_features(args.features)
    if args.vocab:
        vocab = notes.NoteVocabulary.from_text(Path(args.vocab).read_text(encoding="utf-8"))
    else:
        vocab = notes.build_note_vocab(features)
    rows = [
        (uid, notes.quantize_to_notes(fs, vocab))
        for uid, fs in feat.group_by_utterance(features).items()
    ]
    out = _out_dir(cfg)
    (out / "notes_vocab.txt").write_text(vocab.to_text())
    (out / "notes.txt").write_text(notes.notes_to_text(rows))
    print(f"{len(vocab.labels)} notes in [{vocab.labels[0].name}, {vocab.labels[-1].name}]")
    return 0


def cmd_attn(args) -> int:
    cfg = load_config(args)
    rng = np.random.default_rng(cfg.seed)
    if args.zero_layer:
        layer = molattn.ParamLayer.zeros(args.query_dim, args.hidden, args.components, bias=args.bias)
    else:
        layer = molattn.ParamLayer.random(
            args.query_dim, args.hidden, args.components, rng=rng, bias=args.bias
        )
    queries = rng.normal(size=(args.steps, args.query_dim))
    enc = rng.normal(size=(args.enc_len, args.enc_dim))
    result = molattn.simulate_decode(layer, queries, enc)

    row_mass = result.weights.sum(axis=1)
    summary = {
        "components": args.components,
        "encoder_length": args.enc_len,
        "steps": args.steps,
        "seed": cfg.seed,
        "zero_layer": bool(args.zero_layer),
        "bias": bool(args.bias),
        "monotone": result.monotone,
        "row_mass_min": float(row_mass.min()),
        "row_mass_max": float(row_mass.max()),
        "peak_positions": [int(j) + 1 for j in np.argmax(result.weights, axis=1)],
    }
    out = _out_dir(cfg)
    (out / "alignment.csv").write_text(molattn.alignment_to_csv(result.weights))
    (out / "attn_summary.json").write_text(json.dumps(summary, indent=1) + "\n")
    print(f"monotone={summary['monotone']}")
    if not result.monotone or row_mass.max() > 1 + 1e-9:
        raise AssertionError("attention kernel violated monotonicity or normalization")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="prosodylabels", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help):
        p = sub.add_parser(name, help=help)
        p.add_argument("--config", help="JSON pipeline config")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output directory")
        p.set_defaults(func=func)
        return p

    p = add("extract", cmd_extract, "per-phoneme F0/duration features from .wav/.lab pairs")
    p.add_argument("corpus", nargs="?", help="directory of paired .wav/.lab files")
    p.add_argument("--phones", help="phone class table (default: <corpus>/phones.txt)")
    p.add_argument("--jobs", type=int)

    p = add("cluster", cmd_cluster, "build F0 and duration label vocabularies")
    p.add_argument("features")
    p.add_argument("--f0-k", type=_k_arg)
    p.add_argument("--dur-k", type=_k_arg)
    p.add_argument("--k-range", type=int, nargs=2, metavar=("KMIN", "KMAX"))

    p = add("label", cmd_label, "assign nearest-centroid labels")
    p.add_argument("features")
    p.add_argument("--vocab", action="append", required=True, help="vocabulary JSON (repeatable)")

    p = add("modify", cmd_modify, "offset labels with penultimate-ID clamping")
    p.add_argument("features")
    p.add_argument("--vocab", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--delta", type=int, required=True)
    p.add_argument("--joint", action="store_true", help="use the joint-model offset bound")
    p.add_argument("--force", action="store_true", help="allow offsets beyond the bound")

    p = add("sweep", cmd_sweep, "one label file per cluster ID, ascending")
    p.add_argument("features")
    p.add_argument("--vocab", required=True)

    p = add("notes", cmd_notes, "quantize F0 to octave:note labels")
    p.add_argument("features")
    p.add_argument("--vocab", help="existing note vocabulary file")

    p = add("attn", cmd_attn, "run the mixture-of-logistics attention kernel")
    p.add_argument("--components", "-K", type=int, default=molattn.DEFAULT_COMPONENTS)
    p.add_argument("--enc-len", "-N", type=int, default=30)
    p.add_argument("--steps", type=int, default=40)
    p.add_argument("--enc-dim", type=int, default=8)
    p.add_argument("--query-dim", type=int, default=16)
    p.add_argument("--hidden", type=int, default=256)
    p.add_argument("--zero-layer", action="store_true")
    p.add_argument("--no-bias", dest="bias", action="store_false")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except AssertionError as exc:
        print(f"internal check failed: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except (ValueError, TypeError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
