import json
import math
import shutil

import numpy as np
import pytest

from prosodylabels import cli
from prosodylabels.cluster import ClusterVocabulary
from prosodylabels.features import features_from_csv


def run(*argv):
    return cli.main([str(a) for a in argv])


@pytest.fixture(scope="module")
def pipeline(minicorpus, tmp_path_factory):
    out = tmp_path_factory.mktemp("out")
    assert run("extract", minicorpus, "--out", out) == 0
    assert run("cluster", out / "features.csv", "--out", out) == 0
    assert run("label", out / "features.csv", "--vocab", out / "f0_vocab.json",
               "--vocab", out / "duration_vocab.json", "--out", out) == 0
    return out


def test_extract_outputs(pipeline, capsys):
    summary = json.loads((pipeline / "extract_summary.json").read_text())
    assert summary["utterances"] == 20 and summary["skipped"] == 0
    feats = features_from_csv((pipeline / "features.csv").read_text())
    assert len(feats) == summary["phonemes"]
    assert 0 < summary["unvoiced_interpolated"] < summary["phonemes"]
    assert len(list((pipeline / "pitch").glob("*.csv"))) == 20
    assert all(math.isfinite(f.mean_log_f0) for f in feats)
    assert any(f.phrase_final for f in feats) and not all(f.phrase_final for f in feats)


def test_cluster_outputs(pipeline):
    f0 = ClusterVocabulary.from_json((pipeline / "f0_vocab.json").read_text())
    dur = ClusterVocabulary.from_json((pipeline / "duration_vocab.json").read_text())
    assert f0.k == 12 and len(f0.centroids(())) == 12
    assert all(1 <= len(c) <= 15 for c in dur.groups.values())
    curve = (pipeline / "f0_sse_curve.csv").read_text().splitlines()
    assert curve[0] == "k,sse" and len(curve) > 2


def test_label_outputs(pipeline):
    feats = features_from_csv((pipeline / "features.csv").read_text())
    for name in ("f0_labels.txt", "duration_labels.txt"):
        lines = (pipeline / name).read_text().splitlines()
        assert len(lines) == 20
        assert sum(len(l.split()) - 1 for l in lines) == len(feats)


def test_modify_and_bounds(pipeline, tmp_path):
    common = ["--vocab", pipeline / "f0_vocab.json", "--labels", pipeline / "f0_labels.txt", "--out", tmp_path]
    assert run("modify", pipeline / "features.csv", "--delta", "+2", *common) == 0
    before = [l.split()[1:] for l in (pipeline / "f0_labels.txt").read_text().splitlines()]
    after = [l.split()[1:] for l in (tmp_path / "f0_labels_d+2.txt").read_text().splitlines()]
    for b, a in zip(before, after):
        assert [int(x) for x in a] == [min(max(int(x) + 2, 1), 10) for x in b]
    assert run("modify", pipeline / "features.csv", "--delta", "9", *common) == 2
    assert run("modify", pipeline / "features.csv", "--delta", "3", "--joint", *common) == 2
    assert run("modify", pipeline / "features.csv", "--delta", "9", "--force", *common) == 0


def test_sweep(pipeline, tmp_path):
    assert run("sweep", pipeline / "features.csv", "--vocab", pipeline / "f0_vocab.json", "--out", tmp_path) == 0
    files = sorted(tmp_path.glob("f0_sweep_c*.txt"))
    assert len(files) == 12
    for c, path in enumerate(files):
        assert all(set(l.split()[1:]) <= {str(c)} for l in path.read_text().splitlines())


def test_notes(pipeline, tmp_path):
    assert run("notes", pipeline / "features.csv", "--out", tmp_path) == 0
    vocab = (tmp_path / "notes_vocab.txt").read_text().splitlines()
    assert vocab[0] == "h octave note center_hz" and len(vocab) > 1
    assert run("notes", pipeline / "features.csv", "--vocab", tmp_path / "notes_vocab.txt", "--out", tmp_path / "again") == 0
    assert (tmp_path / "again" / "notes.txt").read_text() == (tmp_path / "notes.txt").read_text()


def test_attn_zero_layer_diagonal(tmp_path):
    assert run("attn", "-K", 5, "--steps", 40, "-N", 30, "--zero-layer", "--out", tmp_path) == 0
    summary = json.loads((tmp_path / "attn_summary.json").read_text())
    assert summary["monotone"]
    assert summary["peak_positions"] == list(range(1, 31)) + [30] * 10
    rows = (tmp_path / "alignment.csv").read_text().splitlines()
    assert rows[0].split(",")[1:] == [str(j) for j in range(1, 31)] and len(rows) == 41


def test_attn_random_layer(tmp_path):
    assert run("attn", "--seed", 3, "--no-bias", "--out", tmp_path) == 0
    assert json.loads((tmp_path / "attn_summary.json").read_text())["bias"] is False


def test_empty_corpus(tmp_path):
    assert run("extract", tmp_path, "--out", tmp_path / "o") == 2
    assert run("extract", tmp_path / "missing", "--out", tmp_path / "o") == 2


def test_unpaired_files_skipped(minicorpus, tmp_path, caplog):
    corpus = tmp_path / "c"
    corpus.mkdir()
    for name in ("phones.txt", "utt000.wav", "utt000.lab", "utt001.wav", "utt002.lab"):
        shutil.copy(minicorpus / name, corpus / name)
    assert run("extract", corpus, "--out", tmp_path / "o") == 0
    summary = json.loads((tmp_path / "o" / "extract_summary.json").read_text())
    assert summary["utterances"] == 1
    assert "utt001" in caplog.text and "utt002" in caplog.text


def test_malformed_label_is_input_error(minicorpus, tmp_path):
    corpus = tmp_path / "c"
    corpus.mkdir()
    shutil.copy(minicorpus / "utt000.wav", corpus / "x.wav")
    (corpus / "x.lab").write_text("0 abc a\n")
    assert run("extract", corpus, "--out", tmp_path / "o") == 2


def test_config_file(pipeline, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"f0_k": 5, "dur_k": 4, "seed": 1, "output_dir": str(tmp_path / "o")}))
    assert run("cluster", pipeline / "features.csv", "--config", cfg) == 0
    assert ClusterVocabulary.from_json((tmp_path / "o" / "f0_vocab.json").read_text()).k == 5
    assert run("cluster", pipeline / "features.csv", "--config", cfg, "--f0-k", 6) == 0
    assert ClusterVocabulary.from_json((tmp_path / "o" / "f0_vocab.json").read_text()).k == 6
    cfg.write_text(json.dumps({"bogus": 1}))
    assert run("cluster", pipeline / "features.csv", "--config", cfg) == 2
    cfg.write_text(json.dumps({"f0_k": 1}))
    assert run("cluster", pipeline / "features.csv", "--config", cfg) == 2


def test_auto_k_three_modes(tmp_path):
    rng = np.random.default_rng(0)
    rows = ["utt_id,seg_idx,phoneme,class,final,duration_s,mean_log_f0"]
    for i, m in enumerate(np.repeat([4.6, 5.0, 5.4], 30)):
        rows.append(f"u{i % 3},{i},a,vowel,0,{0.05 + 0.001 * i!r},{float(m + rng.normal(0, 0.005))!r}")
    (tmp_path / "f.csv").write_text("\n".join(rows) + "\n")
    assert run("cluster", tmp_path / "f.csv", "--f0-k", "auto", "--k-range", 2, 8, "--out", tmp_path) == 0
    assert ClusterVocabulary.from_json((tmp_path / "f0_vocab.json").read_text()).k == 3
    assert (tmp_path / "f0_sse_curve.csv").exists()


# Golden files over a hand-built feature table. Two phonemes, F0 in three
# well-separated values, so every output below can be worked out by hand.

GOLDEN_FEATURES = """utt_id,seg_idx,phoneme,class,final,duration_s,mean_log_f0
u1,0,a,vowel,0,0.05,{lo}
u1,1,t,consonant,0,0.03,{mid}
u1,2,a,vowel,1,0.2,{hi}
u2,0,t,consonant,0,0.04,{lo}
u2,1,a,vowel,0,0.07,{mid}
u2,2,a,vowel,1,0.3,{hi}
""".format(lo=repr(math.log(110.0)), mid=repr(math.log(220.0)), hi=repr(math.log(440.0)))


def test_golden_label_modify_notes(tmp_path):
    (tmp_path / "f.csv").write_text(GOLDEN_FEATURES)
    assert run("cluster", tmp_path / "f.csv", "--f0-k", 3, "--dur-k", 2, "--k-range", 2, 4, "--out", tmp_path) == 0
    dur = json.loads((tmp_path / "duration_vocab.json").read_text())
    assert [(g["phoneme"], g["final"], g["centroids"]) for g in dur["groups"]] == [
        ("a", False, [0.05, 0.07]),
        ("a", True, [0.2, 0.3]),
        ("t", False, [0.03, 0.04]),
    ]
    assert run("label", tmp_path / "f.csv", "--vocab", tmp_path / "f0_vocab.json",
               "--vocab", tmp_path / "duration_vocab.json", "--out", tmp_path) == 0
    assert (tmp_path / "f0_labels.txt").read_text() == "u1 0 1 2\nu2 0 1 2\n"
    assert (tmp_path / "duration_labels.txt").read_text() == "u1 0 0 0\nu2 1 1 1\n"
    assert run("modify", tmp_path / "f.csv", "--vocab", tmp_path / "f0_vocab.json",
               "--labels", tmp_path / "f0_labels.txt", "--delta", -1, "--out", tmp_path) == 0
    assert (tmp_path / "f0_labels_d-1.txt").read_text() == "u1 1 1 1\nu2 1 1 1\n"
    assert run("notes", tmp_path / "f.csv", "--out", tmp_path) == 0
    assert (tmp_path / "notes.txt").read_text() == "u1 2:9 3:9 4:9\nu2 2:9 3:9 4:9\n"
    vocab = (tmp_path / "notes_vocab.txt").read_text().splitlines()
    assert vocab == ["h octave note center_hz", "33 2 9 110.0", "45 3 9 220.0", "57 4 9 440.0"]
