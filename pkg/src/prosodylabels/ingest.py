"""Forced-alignment label files: parsing, token classes and phrase-final marks.

Label files follow the HTK convention: one ``<start> <end> <label>`` line per
segment with integer times in 100 ns units. Anything after the third field
(HTK scores, word labels) is ignored.
"""

from __future__ import annotations

import enum
import json
import logging
from dataclasses import dataclass, field, replace
from typing import Iterable

from .errors import MalformedLine, NonMonotonicTimes

log = logging.getLogger(__name__)

TICKS_PER_SECOND = 10_000_000
OVERLAP_SLACK_TICKS = 10_000  # 1 ms
PHRASE_PAUSE_S = 0.150


class Kind(enum.Enum):
    PHONEME = "phoneme"
    PAUSE = "pause"
    WORD_BOUNDARY = "wb"
    PUNCTUATION = "punct"


class PhoneClass(enum.Enum):
    VOWEL = "vowel"
    CONSONANT = "consonant"
    OTHER = "other"


_KIND_ALIASES = {
    "phoneme": Kind.PHONEME,
    "phone": Kind.PHONEME,
    "pause": Kind.PAUSE,
    "sil": Kind.PAUSE,
    "wb": Kind.WORD_BOUNDARY,
    "wordboundary": Kind.WORD_BOUNDARY,
    "word_boundary": Kind.WORD_BOUNDARY,
    "punct": Kind.PUNCTUATION,
    "punctuation": Kind.PUNCTUATION,
}

_CLASS_ALIASES = {
    "vowel": PhoneClass.VOWEL,
    "v": PhoneClass.VOWEL,
    "consonant": PhoneClass.CONSONANT,
    "c": PhoneClass.CONSONANT,
    "other": PhoneClass.OTHER,
    "-": PhoneClass.OTHER,
}


@dataclass(frozen=True)
class PhonemeSegment:
    label: str
    start_s: float
    end_s: float
    kind: Kind = Kind.PHONEME
    phone_class: PhoneClass = PhoneClass.OTHER
    phrase_final: bool = False

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s


@dataclass(frozen=True)
class Utterance:
    id: str
    segments: tuple[PhonemeSegment, ...]
    sample_rate_hz: int = 24000
    audio_path: str | None = None
    warnings: tuple[str, ...] = field(default=(), compare=False)

    @property
    def end_s(self) -> float:
        return self.segments[-1].end_s if self.segments else 0.0


class PhoneClassTable(dict):
    """Maps a label to its ``(Kind, PhoneClass)``.

    Text form is ``<label> <kind> <class>`` per line, e.g. ``a phoneme vowel``.
    Lines starting with ``;`` are comments (``#`` is a common label).
    """

    @classmethod
    def parse(cls, text: str) -> "PhoneClassTable":
        table = cls()
        for line_no, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith(";"):
                continue
            parts = line.split()
            if len(parts) < 2:
                raise MalformedLine(line_no, "expected '<label> <kind> [<class>]'")
            label, kind_s = parts[0], parts[1].lower()
            class_s = parts[2].lower() if len(parts) > 2 else "other"
            try:
                kind = _KIND_ALIASES[kind_s]
                phone_class = _CLASS_ALIASES[class_s]
            except KeyError as exc:
                raise MalformedLine(line_no, f"unknown kind/class {exc.args[0]!r}") from None
            if kind is not Kind.PHONEME:
                phone_class = PhoneClass.OTHER
            table[label] = (kind, phone_class)
        return table

    def lookup(self, label: str) -> tuple[Kind, PhoneClass] | None:
        return self.get(label)


def parse_label_file(
    text: str,
    symbol_table: PhoneClassTable,
    utt_id: str = "",
    sample_rate_hz: int = 24000,
    audio_path: str | None = None,
) -> Utterance:
    """Parse HTK label text into an :class:`Utterance`.

    Unknown labels become phonemes of class ``OTHER`` and are recorded in
    ``Utterance.warnings``.
    """
    segments = []
    warnings = []
    prev_end = None
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) < 3:
            raise MalformedLine(line_no, "expected '<start> <end> <label>'")
        try:
            start, end = int(parts[0]), int(parts[1])
        except ValueError:
            raise MalformedLine(line_no, "non-numeric time") from None
        if start < 0:
            raise MalformedLine(line_no, "negative time")
        if end < start:
            raise NonMonotonicTimes(line_no, "end before start")
        if prev_end is not None and start < prev_end - OVERLAP_SLACK_TICKS:
            raise NonMonotonicTimes(line_no, "segment starts before previous end")

        label = parts[2]
        entry = symbol_table.lookup(label)
        if entry is None:
            kind, phone_class = Kind.PHONEME, PhoneClass.OTHER
            msg = f"line {line_no}: unknown label {label!r} treated as phoneme/other"
            warnings.append(msg)
            log.warning("%s: %s", utt_id or "<utt>", msg)
        else:
            kind, phone_class = entry
        if kind is Kind.PHONEME and end == start:
            raise NonMonotonicTimes(line_no, "zero-length phoneme")

        segments.append(
            PhonemeSegment(
                label=label,
                start_s=start / TICKS_PER_SECOND,
                end_s=end / TICKS_PER_SECOND,
                kind=kind,
                phone_class=phone_class,
            )
        )
        prev_end = end
    return Utterance(
        id=utt_id,
        segments=tuple(segments),
        sample_rate_hz=sample_rate_hz,
        audio_path=audio_path,
        warnings=tuple(warnings),
    )


def to_ticks(seconds: float) -> int:
    return int(round(seconds * TICKS_PER_SECOND))


def format_label_file(utt: Utterance) -> str:
    return "".join(
        f"{to_ticks(seg.start_s)} {to_ticks(seg.end_s)} {seg.label}\n" for seg in utt.segments
    )


def _is_boundary(seg: PhonemeSegment) -> bool:
    if seg.kind is Kind.PUNCTUATION:
        return True
    return seg.kind is Kind.PAUSE and seg.duration_s >= PHRASE_PAUSE_S - 1e-9


def phrases(utt: Utterance) -> list[list[int]]:
    """Indices of phoneme segments grouped by phrase.

    A phrase ends at a punctuation token, a pause of at least 150 ms, or the
    end of the utterance. Phrases without phonemes are dropped.
    """
    groups: list[list[int]] = [[]]
    for i, seg in enumerate(utt.segments):
        if seg.kind is Kind.PHONEME:
            groups[-1].append(i)
        elif _is_boundary(seg) and groups[-1]:
            groups.append([])
    return [g for g in groups if g]


def mark_phrase_final(utt: Utterance) -> Utterance:
    """Flag the phonemes of each phrase's last syllable.

    The syllable is approximated by its rime: from the phrase's last vowel to
    the boundary. A phrase with no vowel flags only its last phoneme.
    """
    final = set()
    for idx in phrases(utt):
        vowels = [i for i in idx if utt.segments[i].phone_class is PhoneClass.VOWEL]
        if vowels:
            final.update(i for i in idx if i >= vowels[-1])
        else:
            final.add(idx[-1])
    segments = tuple(
        replace(seg, phrase_final=(i in final)) for i, seg in enumerate(utt.segments)
    )
    return replace(utt, segments=segments)


def prosodic_targets(utt: Utterance) -> list[int]:
    """Indices of the segments that carry a prosodic label (phonemes only)."""
    return [i for i, seg in enumerate(utt.segments) if seg.kind is Kind.PHONEME]


# Line-delimited JSON records, one utterance per line.


def utterance_to_record(utt: Utterance) -> dict:
    return {
        "id": utt.id,
        "sample_rate_hz": utt.sample_rate_hz,
        "audio_path": utt.audio_path,
        "segments": [
            {
                "label": s.label,
                "start_s": s.start_s,
                "end_s": s.end_s,
                "kind": s.kind.value,
                "class": s.phone_class.value,
                "final": s.phrase_final,
            }
            for s in utt.segments
        ],
    }


def utterance_from_record(rec: dict) -> Utterance:
    segments = tuple(
        PhonemeSegment(
            label=s["label"],
            start_s=float(s["start_s"]),
            end_s=float(s["end_s"]),
            kind=Kind(s["kind"]),
            phone_class=PhoneClass(s["class"]),
            phrase_final=bool(s["final"]),
        )
        for s in rec["segments"]
    )
    return Utterance(
        id=rec["id"],
        segments=segments,
        sample_rate_hz=int(rec["sample_rate_hz"]),
        audio_path=rec.get("audio_path"),
    )


def dump_utterances(utts: Iterable[Utterance]) -> str:
    return "".join(json.dumps(utterance_to_record(u)) + "\n" for u in utts)


def load_utterances(text: str) -> list[Utterance]:
    return [utterance_from_record(json.loads(line)) for line in text.splitlines() if line.strip()]
