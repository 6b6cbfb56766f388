"""Deterministic synthetic mini-corpus: harmonic "speech" with HTK labels.

Voiced phonemes are five-harmonic tones following a piecewise-linear F0
contour; unvoiced consonants are low-level noise; pauses are digital silence.
Phrase-final phonemes are lengthened so duration groups differ.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .audio import write_wav
from .ingest import TICKS_PER_SECOND

VOWELS = ("a", "e", "i", "o", "u")
VOICED = ("m", "n", "l", "r")
UNVOICED = ("s", "t", "k", "f")

PHONE_TABLE = "\n".join(
    ["; label kind class"]
    + [f"{v} phoneme vowel" for v in VOWELS]
    + [f"{c} phoneme consonant" for c in VOICED + UNVOICED]
    + ["sil pause other", "sp pause other", "# wb other", ", punct other", ". punct other"]
) + "\n"

REGISTERS_HZ = (110.0, 160.0, 230.0)
GRID_S = 0.0005


def _q(t: float) -> float:
    return round(t / GRID_S) * GRID_S


def _word(rng: np.random.Generator) -> list[str]:
    phones = []
    for _ in range(rng.integers(1, 3)):
        onset = rng.choice(VOICED + UNVOICED)
        phones += [str(onset), str(rng.choice(VOWELS))]
    if rng.random() < 0.5:
        phones.append(str(rng.choice(VOICED + UNVOICED)))
    return phones


def _layout(rng: np.random.Generator) -> list[tuple[str, float, bool]]:
    """``(label, duration_s, lengthen)`` tokens for one utterance."""
    tokens = [("sil", _q(rng.uniform(0.12, 0.2)), False)]
    n_words = int(rng.integers(2, 6))
    comma_after = int(rng.integers(1, n_words)) if n_words > 2 and rng.random() < 0.6 else -1
    for w in range(n_words):
        phones = _word(rng)
        phrase_end = w == n_words - 1 or w == comma_after
        last_vowel = max(i for i, p in enumerate(phones) if p in VOWELS)
        for i, p in enumerate(phones):
            base = 0.095 if p in VOWELS else 0.06
            lengthen = phrase_end and i >= last_vowel
            dur = base * float(rng.lognormal(0.0, 0.25)) * (1.6 if lengthen else 1.0)
            tokens.append((p, _q(max(dur, 0.02)), lengthen))
        if w == comma_after:
            tokens.append((",", 0.0, False))
            tokens.append(("sp", _q(rng.uniform(0.18, 0.25)), False))
        elif w < n_words - 1:
            tokens.append(("#", 0.0, False))
            if rng.random() < 0.3:
                tokens.append(("sp", _q(rng.uniform(0.02, 0.06)), False))
    tokens.append((".", 0.0, False))
    tokens.append(("sil", _q(rng.uniform(0.12, 0.2)), False))
    return tokens


def synthesize(rng: np.random.Generator, fs: int = 24000) -> tuple[np.ndarray, str]:
    tokens = _layout(rng)
    register = REGISTERS_HZ[int(rng.integers(len(REGISTERS_HZ)))]
    total = sum(d for _, d, _ in tokens)
    n = int(round(total * fs))
    f0 = np.zeros(n)
    voiced = np.zeros(n, dtype=bool)
    unvoiced = np.zeros(n, dtype=bool)

    # F0 targets at phoneme midpoints, declining over the utterance.
    knots_t, knots_f = [], []
    t = 0.0
    lines = []
    for label, dur, _ in tokens:
        start, end = t, t + dur
        lines.append(f"{round(start * TICKS_PER_SECOND)} {round(end * TICKS_PER_SECOND)} {label}")
        lo, hi = int(round(start * fs)), int(round(end * fs))
        if label in VOWELS or label in VOICED:
            voiced[lo:hi] = True
            level = register * 2.0 ** (float(rng.normal(0.0, 0.2)) - 0.15 * start / max(total, 1e-9))
            knots_t.append(0.5 * (start + end))
            knots_f.append(level)
        elif label in UNVOICED:
            unvoiced[lo:hi] = True
        t = end

    times = np.arange(n) / fs
    f0 = np.interp(times, knots_t, knots_f)
    phase = 2 * np.pi * np.cumsum(f0) / fs
    harmonic = sum(0.6 ** (h - 1) * np.sin(h * phase) for h in range(1, 6))
    noise = rng.normal(0.0, 1.0, n)
    x = np.where(voiced, 0.3 * harmonic, 0.0) + np.where(unvoiced, 0.03 * noise, 0.0)
    return x, "\n".join(lines) + "\n"


def make_minicorpus(
    out_dir: str | Path, n_utterances: int = 20, seed: int = 0, fs: int = 24000
) -> list[Path]:
    """Write ``phones.txt`` plus ``uttNNN.wav``/``uttNNN.lab`` pairs."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "phones.txt").write_text(PHONE_TABLE)
    rng = np.random.default_rng(seed)
    stems = []
    for i in range(n_utterances):
        samples, lab = synthesize(rng, fs)
        stem = out / f"utt{i:03d}"
        write_wav(stem.with_suffix(".wav"), samples, fs)
        stem.with_suffix(".lab").write_text(lab)
        stems.append(stem)
    return stems
