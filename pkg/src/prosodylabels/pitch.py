"""Frame-wise F0 by normalized autocorrelation, plus gap filling and smoothing.

The per-frame estimator follows the usual Boersma recipe: Hann-window the
mean-removed frame, take its autocorrelation, divide by the autocorrelation
of the window itself, and pick the strongest peak in the allowed lag range
with a small octave cost favouring shorter lags.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import AudioTooShort, EvenWindow, NoVoicedFrames, WindowTooShort


@dataclass(frozen=True)
class PitchConfig:
    floor_hz: float = 60.0
    ceil_hz: float = 500.0
    voicing_threshold: float = 0.45
    frame_len_s: float = 0.040
    hop_s: float = 0.010
    octave_cost: float = 0.05


@dataclass(frozen=True)
class PitchFrame:
    time_s: float
    f0_hz: float | None
    voicing: float


@dataclass(frozen=True, eq=False)
class PitchTrack:
    """Equally spaced F0 frames. ``f0`` holds NaN for unvoiced frames."""

    times: np.ndarray
    f0: np.ndarray
    voicing: np.ndarray
    hop_s: float
    config: PitchConfig = field(default_factory=PitchConfig)

    def __len__(self):
        return len(self.times)

    @property
    def voiced(self) -> np.ndarray:
        return ~np.isnan(self.f0)

    @property
    def frames(self) -> list[PitchFrame]:
        return [
            PitchFrame(float(t), None if math.isnan(f) else float(f), float(v))
            for t, f, v in zip(self.times, self.f0, self.voicing)
        ]


@lru_cache(maxsize=32)
def _window_autocorr(n: int, nfft: int) -> tuple[np.ndarray, np.ndarray]:
    win = np.hanning(n)
    rw = np.fft.irfft(np.abs(np.fft.rfft(win, nfft)) ** 2, nfft)[:n]
    return win, rw / rw[0]


def frame_autocorr_f0(
    samples: np.ndarray, fs: float, cfg: PitchConfig = PitchConfig()
) -> tuple[float | None, float]:
    """Estimate F0 of one frame.

    Returns ``(f0_hz, voicing)``; ``f0_hz`` is None when the peak height
    (the voicing value, clipped to [0, 1]) is below the threshold.
    """
    x = np.asarray(samples, dtype=np.float64)
    n = len(x)
    if n < math.ceil(2 * fs / cfg.floor_hz):
        raise WindowTooShort(
            f"{n} samples < two periods of the {cfg.floor_hz} Hz floor at {fs} Hz"
        )
    if not np.any(x):
        return None, 0.0
    x = x - x.mean()

    nfft = 1 << (2 * n - 1).bit_length()
    win, rw = _window_autocorr(n, nfft)
    ra = np.fft.irfft(np.abs(np.fft.rfft(x * win, nfft)) ** 2, nfft)[:n]
    if ra[0] <= 0:
        return None, 0.0

    # The last two lags of the Hann autocorrelation are exactly zero.
    lag_min = max(2, int(math.floor(fs / cfg.ceil_hz)))
    lag_max = min(int(math.ceil(fs / cfg.floor_hz)), n - 3)
    r = (ra[: lag_max + 2] / ra[0]) / rw[: lag_max + 2]
    lags = np.arange(lag_min, lag_max + 1)
    mid = r[lags]
    is_peak = (mid > r[lags - 1]) & (mid >= r[lags + 1])
    if not np.any(is_peak):
        return None, float(np.clip(mid.max(), 0.0, 1.0))

    peak_lags = lags[is_peak]
    a, b, c = r[peak_lags - 1], r[peak_lags], r[peak_lags + 1]
    denom = a - 2 * b + c
    shift = np.where(denom < 0, 0.5 * (a - c) / np.where(denom < 0, denom, -1.0), 0.0)
    heights = b - 0.25 * (a - c) * shift
    refined = peak_lags + shift
    strength = heights - cfg.octave_cost * np.log2(cfg.floor_hz * refined / fs)
    best = int(np.argmax(strength))

    voicing = float(np.clip(heights[best], 0.0, 1.0))
    if voicing < cfg.voicing_threshold:
        return None, voicing
    f0 = float(np.clip(fs / refined[best], cfg.floor_hz, cfg.ceil_hz))
    return f0, voicing


def extract_pitch_track(
    samples: np.ndarray, fs: int, cfg: PitchConfig = PitchConfig()
) -> PitchTrack:
    """Slide :func:`frame_autocorr_f0` over the signal.

    Frame ``i`` spans samples ``[i*hop, i*hop + frame_len)``; its time is the
    frame centre. The frame count is ``(len - frame_len) // hop + 1``.
    """
    if fs <= 2 * cfg.ceil_hz:
        raise ValueError(f"sample rate {fs} Hz cannot represent a {cfg.ceil_hz} Hz ceiling")
    x = np.asarray(samples, dtype=np.float64)
    n_win = int(round(cfg.frame_len_s * fs))
    hop = int(round(cfg.hop_s * fs))
    if len(x) < n_win:
        raise AudioTooShort(f"{len(x)} samples is shorter than one {n_win}-sample frame")
    n_frames = (len(x) - n_win) // hop + 1

    times = np.empty(n_frames)
    f0 = np.full(n_frames, np.nan)
    voicing = np.empty(n_frames)
    for i in range(n_frames):
        start = i * hop
        est, v = frame_autocorr_f0(x[start : start + n_win], fs, cfg)
        times[i] = (start + n_win / 2) / fs
        voicing[i] = v
        if est is not None:
            f0[i] = est
    return PitchTrack(times=times, f0=f0, voicing=voicing, hop_s=hop / fs, config=cfg)


def interpolate_unvoiced(track: PitchTrack) -> PitchTrack:
    """Fill unvoiced frames linearly in Hz; hold the edge values outward."""
    voiced = track.voiced
    if not np.any(voiced):
        raise NoVoicedFrames("cannot interpolate a track with no voiced frames")
    idx = np.arange(len(track))
    filled = np.interp(idx, idx[voiced], track.f0[voiced])
    filled[voiced] = track.f0[voiced]
    return replace(track, f0=filled)


def _check_window(w: int, name: str) -> int:
    if w < 1 or w % 2 == 0:
        raise EvenWindow(f"{name}={w} must be a positive odd integer")
    return w // 2


def _shrinking(values: np.ndarray, half: int, reduce) -> np.ndarray:
    if half == 0:
        return values.copy()
    padded = np.pad(values, half, constant_values=np.nan)
    return reduce(sliding_window_view(padded, 2 * half + 1), axis=1)


def smooth_track(track: PitchTrack, median_w: int = 5, mean_w: int = 3) -> PitchTrack:
    """Median filter, then moving average. Windows are truncated at the edges."""
    h_med = _check_window(median_w, "median_w")
    h_mean = _check_window(mean_w, "mean_w")
    if np.any(np.isnan(track.f0)):
        raise ValueError("smooth_track needs an interpolated track (no unvoiced gaps)")
    out = _shrinking(track.f0, h_med, np.nanmedian)
    out = _shrinking(out, h_mean, np.nanmean)
    return replace(track, f0=out)


def process_track(track: PitchTrack, median_w: int = 5, mean_w: int = 3) -> PitchTrack:
    return smooth_track(interpolate_unvoiced(track), median_w, mean_w)


def track_to_csv(track: PitchTrack) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["time_s", "f0_hz", "voicing"])
    for t, f, v in zip(track.times, track.f0, track.voicing):
        writer.writerow([repr(float(t)), "" if math.isnan(f) else repr(float(f)), repr(float(v))])
    return buf.getvalue()


def track_from_csv(text: str, config: PitchConfig = PitchConfig()) -> PitchTrack:
    rows = list(csv.DictReader(io.StringIO(text)))
    times = np.array([float(r["time_s"]) for r in rows])
    f0 = np.array([float(r["f0_hz"]) if r["f0_hz"] else np.nan for r in rows])
    voicing = np.array([float(r["voicing"]) for r in rows])
    hop = float(times[1] - times[0]) if len(times) > 1 else config.hop_s
    return PitchTrack(times=times, f0=f0, voicing=voicing, hop_s=hop, config=config)
