"""Per-phoneme prosodic features: mean log-F0 and duration."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import EmptyTrack
from .ingest import Kind, PhoneClass, PhonemeSegment, Utterance, prosodic_targets
from .pitch import PitchTrack

CSV_FIELDS = ["utt_id", "seg_idx", "phoneme", "class", "final", "duration_s", "mean_log_f0"]


@dataclass(frozen=True)
class ProsodicFeature:
    utterance_id: str
    segment_index: int
    phoneme: str
    mean_log_f0: float
    duration_s: float
    phone_class: PhoneClass = PhoneClass.OTHER
    phrase_final: bool = False

    @property
    def f0_hz(self) -> float:
        return math.exp(self.mean_log_f0)


def _frames_in_span(times: np.ndarray, start_s: float, end_s: float) -> np.ndarray:
    return (times >= start_s) & (times < end_s)


def phoneme_mean_log_f0(track: PitchTrack, seg: PhonemeSegment) -> float:
    """Mean of ln(F0) over frames whose centres fall in ``[start, end)``.

    Phonemes too short to contain a frame centre take the frame nearest their
    midpoint. The track must already be interpolated.
    """
    if len(track) == 0:
        raise EmptyTrack("pitch track has no frames")
    inside = _frames_in_span(track.times, seg.start_s, seg.end_s)
    if np.any(inside):
        values = track.f0[inside]
    else:
        mid = 0.5 * (seg.start_s + seg.end_s)
        values = track.f0[[int(np.argmin(np.abs(track.times - mid)))]]
    if np.any(np.isnan(values)) or np.any(values <= 0):
        raise ValueError(f"segment {seg.label!r} overlaps unvoiced frames; interpolate first")
    return float(np.mean(np.log(values)))


def build_features(utt: Utterance, track: PitchTrack) -> list[ProsodicFeature]:
    """One feature per prosodic target, in utterance order.

    ``track`` is the interpolated and smoothed contour, so unvoiced phonemes
    receive interpolated F0 rather than zero.
    """
    out = []
    for i in prosodic_targets(utt):
        seg = utt.segments[i]
        out.append(
            ProsodicFeature(
                utterance_id=utt.id,
                segment_index=i,
                phoneme=seg.label,
                mean_log_f0=phoneme_mean_log_f0(track, seg),
                duration_s=seg.duration_s,
                phone_class=seg.phone_class,
                phrase_final=seg.phrase_final,
            )
        )
    return out


def count_unvoiced_targets(utt: Utterance, raw_track: PitchTrack) -> int:
    """Phonemes whose span holds no voiced frame before interpolation."""
    n = 0
    voiced = raw_track.voiced
    for i in prosodic_targets(utt):
        seg = utt.segments[i]
        if seg.kind is Kind.PHONEME and not np.any(
            voiced & _frames_in_span(raw_track.times, seg.start_s, seg.end_s)
        ):
            n += 1
    return n


def features_to_csv(features: Iterable[ProsodicFeature]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_FIELDS)
    for f in features:
        writer.writerow(
            [
                f.utterance_id,
                f.segment_index,
                f.phoneme,
                f.phone_class.value,
                int(f.phrase_final),
                repr(float(f.duration_s)),
                repr(float(f.mean_log_f0)),
            ]
        )
    return buf.getvalue()


def features_from_csv(text: str) -> list[ProsodicFeature]:
    reader = csv.DictReader(io.StringIO(text))
    missing = set(CSV_FIELDS) - set(reader.fieldnames or ())
    if missing:
        raise ValueError(f"feature CSV is missing columns: {sorted(missing)}")
    return [
        ProsodicFeature(
            utterance_id=row["utt_id"],
            segment_index=int(row["seg_idx"]),
            phoneme=row["phoneme"],
            mean_log_f0=float(row["mean_log_f0"]),
            duration_s=float(row["duration_s"]),
            phone_class=PhoneClass(row["class"]),
            phrase_final=row["final"].strip() in ("1", "true", "True"),
        )
        for row in reader
    ]


def group_by_utterance(features: Iterable[ProsodicFeature]) -> dict[str, list[ProsodicFeature]]:
    out: dict[str, list[ProsodicFeature]] = {}
    for f in features:
        out.setdefault(f.utterance_id, []).append(f)
    return out
