"""Musical-note quantization of F0.

Semitones are counted from C0 with A4 = 440 Hz at h = 57, so
``octave = h // 12`` and ``note = h % 12`` (0 = C).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import NegativeSemitone, NonPositiveF0, TooFewPoints
from .features import ProsodicFeature

A4_HZ = 440.0
A4_SEMITONE = 57
NOTE_NAMES = ("C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B")


def round_half_away(x: float) -> int:
    return int(math.copysign(math.floor(abs(x) + 0.5), x))


def f0_to_semitone(f0: float) -> int:
    if not f0 > 0:
        raise NonPositiveF0(f"f0 must be positive, got {f0!r}")
    return round_half_away(12.0 * math.log2(f0 / A4_HZ)) + A4_SEMITONE


def semitone_to_octave_note(h: int) -> tuple[int, int]:
    if h < 0:
        raise NegativeSemitone(f"h={h} lies below C0")
    return h // 12, h % 12


def note_center_f0(h: int) -> float:
    if h < 0:
        raise NegativeSemitone(f"h={h} lies below C0")
    return A4_HZ * 2.0 ** ((h - A4_SEMITONE) / 12.0)


@dataclass(frozen=True, order=True)
class NoteLabel:
    h: int
    octave: int
    note: int

    @classmethod
    def from_semitone(cls, h: int) -> "NoteLabel":
        octave, note = semitone_to_octave_note(h)
        return cls(h, octave, note)

    @property
    def name(self) -> str:
        return f"{NOTE_NAMES[self.note]}{self.octave}"

    @property
    def center_hz(self) -> float:
        return note_center_f0(self.h)


@dataclass(frozen=True)
class NoteVocabulary:
    labels: tuple[NoteLabel, ...]
    h_min: int
    h_max: int

    def clamp(self, h: int) -> int:
        return min(max(h, self.h_min), self.h_max)

    def to_text(self) -> str:
        rows = ["h octave note center_hz"]
        rows += [f"{n.h} {n.octave} {n.note} {n.center_hz!r}" for n in self.labels]
        return "\n".join(rows) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "NoteVocabulary":
        labels = []
        for line in text.splitlines()[1:]:
            if line.strip():
                labels.append(NoteLabel.from_semitone(int(line.split()[0])))
        if not labels:
            raise TooFewPoints("note vocabulary file lists no notes")
        labels.sort()
        return cls(tuple(labels), labels[0].h, labels[-1].h)


def build_note_vocab(features: Sequence[ProsodicFeature]) -> NoteVocabulary:
    """Every distinct semitone observed in the corpus becomes a label."""
    if not features:
        raise TooFewPoints("notes: no features")
    hs = sorted({f0_to_semitone(math.exp(f.mean_log_f0)) for f in features})
    return NoteVocabulary(tuple(NoteLabel.from_semitone(h) for h in hs), hs[0], hs[-1])


def quantize_to_notes(
    features: Iterable[ProsodicFeature], vocab: NoteVocabulary
) -> list[NoteLabel]:
    """Nearest semitone per feature, clamped into the vocabulary's range.

    A clamped or in-range semitone need not appear in ``vocab.labels``; octave
    and note are still well defined for it.
    """
    return [
        NoteLabel.from_semitone(vocab.clamp(f0_to_semitone(math.exp(f.mean_log_f0))))
        for f in features
    ]


def notes_to_text(rows: Iterable[tuple[str, Sequence[NoteLabel]]]) -> str:
    return "".join(
        " ".join([uid, *(f"{n.octave}:{n.note}" for n in labels)]) + "\n" for uid, labels in rows
    )
