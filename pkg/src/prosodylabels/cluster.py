"""Scalar k-means label vocabularies for F0 and duration.

F0 is clustered globally. Duration is clustered per ``(phoneme, phrase_final)``
group, since phoneme classes and phrase-final lengthening shift durations.
Cluster IDs are ranks of the sorted centroids, so ID order is value order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Sequence

import numpy as np

from .errors import RangeTooNarrow, TooFewPoints
from .features import ProsodicFeature, group_by_utterance

F0 = "f0"
DURATION = "duration"

DEFAULT_F0_K = 12
DEFAULT_DURATION_K = 15
DEFAULT_K_RANGE = (2, 20)
DEFAULT_RESTARTS = 20

# Vocabulary group holding every duration, used when a phoneme was never seen.
POOLED = None


@dataclass(frozen=True, eq=False)
class KMeansResult:
    centroids: np.ndarray
    assignments: np.ndarray
    sse: float
    iterations: int
    sse_history: tuple[float, ...] = ()


def _kmeanspp(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    centroids = [x[rng.integers(len(x))]]
    dist = np.abs(x - centroids[0])
    for _ in range(1, k):
        d2 = dist**2
        total = d2.sum()
        # squares of tiny gaps can underflow; fall back to the farthest point
        idx = rng.choice(len(x), p=d2 / total) if total > 0 else int(np.argmax(dist))
        centroids.append(x[idx])
        dist = np.minimum(dist, np.abs(x - x[idx]))
    return np.sort(np.array(centroids))


# The fitting helpers work on sorted data: nearest-centroid clusters of
# scalars are contiguous runs, described by boundaries b with cluster i
# holding xs[b[i]:b[i+1]].


def _bounds(xs: np.ndarray, c: np.ndarray) -> np.ndarray:
    # Midpoints give the boundary up to rounding; the distance comparison
    # settles it exactly. Equidistant points join the lower cluster.
    n = len(xs)
    guess = np.searchsorted(xs, 0.5 * (c[:-1] + c[1:]), side="right")
    out = [0]
    for i, idx in enumerate(guess.tolist()):
        lo, hi = c[i], c[i + 1]
        while idx < n and abs(xs[idx] - lo) <= abs(xs[idx] - hi):
            idx += 1
        while idx > 0 and abs(xs[idx - 1] - lo) > abs(xs[idx - 1] - hi):
            idx -= 1
        out.append(max(idx, out[-1]))
    out.append(n)
    return np.array(out)


def _sse(xs: np.ndarray, b: np.ndarray, c: np.ndarray) -> float:
    return float(((xs - np.repeat(c, np.diff(b))) ** 2).sum())


def _means(xs: np.ndarray, b: np.ndarray, fallback: np.ndarray) -> np.ndarray:
    # reduceat keeps singleton means exact, unlike prefix-sum differences.
    counts = np.diff(b)
    out = np.array(fallback, dtype=np.float64, copy=True)
    full = counts > 0
    out[full] = np.add.reduceat(xs, b[:-1][full]) / counts[full]
    return out


def _lloyd(xs: np.ndarray, c: np.ndarray, max_iter: int):
    b = _bounds(xs, c)
    history = [_sse(xs, b, c)]
    iterations = 0
    for iterations in range(1, max_iter + 1):
        counts = np.diff(b)
        new = _means(xs, b, c)
        empty = np.flatnonzero(counts == 0)
        if len(empty):
            # Re-seed each empty cluster at the point farthest from every live centroid.
            live = new[counts > 0]
            d2 = ((xs[:, None] - live[None, :]) ** 2).min(axis=1)
            for j in empty:
                far = int(np.argmax(d2))
                new[j] = xs[far]
                d2 = np.minimum(d2, (xs - xs[far]) ** 2)
        c = np.sort(new)
        b_new = _bounds(xs, c)
        history.append(_sse(xs, b_new, c))
        converged = np.array_equal(b_new, b)
        b = b_new
        if converged:
            break
    return c, b, history, iterations


def _hartigan(xs: np.ndarray, b: np.ndarray, history: list) -> np.ndarray | None:
    """Move single points across cluster boundaries while the SSE drops.

    Moving x from cluster i to j changes the SSE by
    ``n_j/(n_j+1) (x-c_j)^2 - n_i/(n_i-1) (x-c_i)^2``, which accounts for both
    means shifting. Returns the new boundaries, or None if nothing moved.
    """
    if len(b) < 3:
        return None
    b = b.copy()
    counts = np.diff(b).astype(np.float64)
    sums = np.add.reduceat(xs, b[:-1])
    moved = False
    for _ in range(len(xs) * len(counts)):
        c = sums / counts
        n_lo, n_hi = counts[:-1], counts[1:]
        x_up = xs[b[1:-1] - 1]  # last point of the lower cluster
        x_down = xs[b[1:-1]]  # first point of the upper cluster
        with np.errstate(divide="ignore", invalid="ignore"):
            up = np.where(
                n_lo > 1,
                n_hi / (n_hi + 1) * (x_up - c[1:]) ** 2 - n_lo / (n_lo - 1) * (x_up - c[:-1]) ** 2,
                np.inf,
            )
            down = np.where(
                n_hi > 1,
                n_lo / (n_lo + 1) * (x_down - c[:-1]) ** 2 - n_hi / (n_hi - 1) * (x_down - c[1:]) ** 2,
                np.inf,
            )
        i_up, i_down = int(np.argmin(up)), int(np.argmin(down))
        sse = history[-1]
        tol = -1e-12 * max(sse, 1e-300)
        if min(up[i_up], down[i_down]) >= tol:
            break
        if up[i_up] <= down[i_down]:
            i, x, delta, shift = i_up, x_up[i_up], up[i_up], -1
        else:
            i, x, delta, shift = i_down, x_down[i_down], down[i_down], 1
        src, dst = (i, i + 1) if shift < 0 else (i + 1, i)
        counts[src] -= 1
        sums[src] -= x
        counts[dst] += 1
        sums[dst] += x
        b[i + 1] += shift
        history.append(max(sse + float(delta), 0.0))
        moved = True
    return b if moved else None


def _fit(xs: np.ndarray, init: np.ndarray, max_iter: int):
    c, b, history, iterations = _lloyd(xs, init, max_iter)
    while (moved := _hartigan(xs, b, history)) is not None:
        c, b, more, it = _lloyd(xs, _means(xs, moved, c), max_iter)
        history.extend(more[1:])
        iterations += it
    return c, b, history, iterations


def kmeans(
    points: Sequence[float],
    k: int,
    seed: int = 0,
    max_iter: int = 300,
    n_init: int = DEFAULT_RESTARTS,
) -> KMeansResult:
    """Lloyd's k-means on scalars with k-means++ seeding and restarts.

    Each restart alternates Lloyd iterations with Hartigan point moves until
    neither improves the SSE. The best of ``n_init`` restarts (lowest SSE,
    first on ties) is returned with centroids sorted ascending, so cluster
    IDs are value ranks. Deterministic for a fixed ``seed``.
    """
    x = np.asarray(points, dtype=np.float64).ravel()
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(x) < k:
        raise TooFewPoints(f"{len(x)} points for k={k}")
    n_distinct = len(np.unique(x))
    if n_distinct < k:
        raise TooFewPoints(f"{n_distinct} distinct values for k={k}")

    order = np.argsort(x, kind="stable")
    xs = x[order]
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(max(1, n_init)):
        fit = _fit(xs, _kmeanspp(xs, k, rng), max_iter)
        if best is None or fit[2][-1] < best[2][-1]:
            best = fit
    c, b, history, iters = best

    assignments = np.empty(len(x), dtype=int)
    assignments[order] = np.repeat(np.arange(k), np.diff(b))
    sse = float(((x - c[assignments]) ** 2).sum())
    return KMeansResult(c, assignments, sse, iters, tuple(history))


def sse_curve(
    points: Sequence[float], ks: Iterable[int], seed: int = 0, n_init: int = DEFAULT_RESTARTS
) -> dict[int, float]:
    return {k: kmeans(points, k, seed=seed, n_init=n_init).sse for k in ks}


def elbow_from_curve(curve: dict[int, float]) -> int:
    """Pick the interior k with the largest discrete second difference.

    ``SSE(k-1) - 2 SSE(k) + SSE(k+1)`` is evaluated only where both neighbours
    are on the curve. Differences within ``1e-9 * SSE(k_first)`` count as ties
    and go to the smaller k.
    """
    ks = sorted(curve)
    if len(ks) < 3:
        raise RangeTooNarrow("need at least three k values for a second difference")
    tol = 1e-9 * abs(curve[ks[0]])
    best_k, best_d = None, -np.inf
    for prev, k, nxt in zip(ks, ks[1:], ks[2:]):
        d = curve[prev] - 2 * curve[k] + curve[nxt]
        if d > best_d + tol:
            best_k, best_d = k, d
    return best_k


def elbow_select(
    points: Sequence[float],
    k_min: int,
    k_max: int,
    seed: int = 0,
    n_init: int = DEFAULT_RESTARTS,
) -> int:
    if k_max - k_min < 2:
        raise RangeTooNarrow(f"[{k_min}, {k_max}] has no interior point")
    if k_max > len(points):
        raise TooFewPoints(f"k_max={k_max} exceeds {len(points)} points")
    return elbow_from_curve(sse_curve(points, range(k_min, k_max + 1), seed, n_init))


GroupKey = Hashable


@dataclass(frozen=True, eq=False)
class ClusterVocabulary:
    """Ascending centroids per group.

    F0 has the single group ``()``. Duration groups are keyed
    ``(phoneme, phrase_final)``; :data:`POOLED` names the all-durations
    fallback group.
    """

    feature: str
    groups: dict
    k: int
    seed: int = 0
    pooled: tuple[float, ...] | None = None
    sse_curve: dict = field(default_factory=dict)

    def centroids(self, key: GroupKey) -> tuple[float, ...]:
        if key is POOLED and self.feature == DURATION:
            return self.pooled
        return self.groups[key]

    def size(self, key: GroupKey) -> int:
        return len(self.centroids(key))

    @property
    def max_size(self) -> int:
        sizes = [len(c) for c in self.groups.values()]
        if self.pooled is not None:
            sizes.append(len(self.pooled))
        return max(sizes)

    def resolve(self, feature: ProsodicFeature) -> GroupKey:
        if self.feature == F0:
            return ()
        key = (feature.phoneme, feature.phrase_final)
        if key in self.groups:
            return key
        other = (feature.phoneme, not feature.phrase_final)
        if other in self.groups:
            return other
        return POOLED

    def value(self, feature: ProsodicFeature) -> float:
        return feature.mean_log_f0 if self.feature == F0 else feature.duration_s

    def to_json(self) -> str:
        if self.feature == F0:
            groups = [{"centroids": list(self.groups[()])}]
        else:
            groups = [
                {"phoneme": p, "final": final, "centroids": list(c)}
                for (p, final), c in sorted(self.groups.items())
            ]
        doc = {
            "feature": self.feature,
            "k": self.k,
            "seed": self.seed,
            "groups": groups,
            "pooled": list(self.pooled) if self.pooled is not None else None,
            "sse_curve": {str(k): v for k, v in sorted(self.sse_curve.items())},
        }
        return json.dumps(doc, indent=1) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ClusterVocabulary":
        doc = json.loads(text)
        feature = doc["feature"]
        if feature == F0:
            groups = {(): tuple(doc["groups"][0]["centroids"])}
        elif feature == DURATION:
            groups = {(g["phoneme"], bool(g["final"])): tuple(g["centroids"]) for g in doc["groups"]}
        else:
            raise ValueError(f"unknown vocabulary feature {feature!r}")
        pooled = tuple(doc["pooled"]) if doc.get("pooled") is not None else None
        curve = {int(k): float(v) for k, v in doc.get("sse_curve", {}).items()}
        return cls(feature, groups, int(doc["k"]), int(doc.get("seed", 0)), pooled, curve)


def _feasible_range(n_distinct: int, k_range: tuple[int, int]) -> range:
    return range(k_range[0], min(k_range[1], n_distinct) + 1)


def build_f0_vocab(
    features: Sequence[ProsodicFeature],
    k: int | str = DEFAULT_F0_K,
    seed: int = 0,
    n_init: int = DEFAULT_RESTARTS,
    k_range: tuple[int, int] = DEFAULT_K_RANGE,
    with_curve: bool = False,
) -> ClusterVocabulary:
    values = np.array([f.mean_log_f0 for f in features])
    if len(values) == 0:
        raise TooFewPoints("f0: no features")
    curve = {}
    if k == "auto" or with_curve:
        ks = _feasible_range(len(np.unique(values)), k_range)
        curve = sse_curve(values, ks, seed, n_init)
    if k == "auto":
        k = elbow_from_curve(curve)
    try:
        result = kmeans(values, int(k), seed=seed, n_init=n_init)
    except TooFewPoints as exc:
        raise TooFewPoints(f"f0: {exc}") from None
    return ClusterVocabulary(F0, {(): tuple(result.centroids.tolist())}, int(k), seed, None, curve)


def _duration_groups(features: Sequence[ProsodicFeature]) -> dict:
    groups: dict = {}
    for f in features:
        groups.setdefault((f.phoneme, f.phrase_final), []).append(f.duration_s)
    return {key: np.array(groups[key]) for key in sorted(groups)}


def _cluster_group(values: np.ndarray, k: int, seed: int, n_init: int) -> KMeansResult:
    return kmeans(values, min(k, len(np.unique(values))), seed=seed, n_init=n_init)


def build_duration_vocab(
    features: Sequence[ProsodicFeature],
    k: int | str = DEFAULT_DURATION_K,
    seed: int = 0,
    n_init: int = DEFAULT_RESTARTS,
    k_range: tuple[int, int] = DEFAULT_K_RANGE,
    with_curve: bool = False,
) -> ClusterVocabulary:
    """Cluster durations per ``(phoneme, phrase_final)`` group.

    Each group gets ``min(k, distinct values)`` clusters. For ``k="auto"`` the
    elbow is taken on the total within-group SSE as a function of k.
    """
    if not features:
        raise TooFewPoints("duration: no features")
    groups = _duration_groups(features)
    curve = {}
    if k == "auto" or with_curve:
        widest = max(len(np.unique(v)) for v in groups.values())
        for kk in _feasible_range(widest, k_range):
            curve[kk] = sum(_cluster_group(v, kk, seed, n_init).sse for v in groups.values())
    if k == "auto":
        k = elbow_from_curve(curve)
    k = int(k)
    centroids = {
        key: tuple(_cluster_group(v, k, seed, n_init).centroids.tolist())
        for key, v in groups.items()
    }
    pooled_values = np.concatenate(list(groups.values()))
    pooled = tuple(_cluster_group(pooled_values, k, seed, n_init).centroids.tolist())
    return ClusterVocabulary(DURATION, centroids, k, seed, pooled, curve)


@dataclass(frozen=True)
class LabelSequence:
    utterance_id: str
    labels: tuple[int, ...]
    groups: tuple  # resolved vocabulary group per label
    vocabulary_ref: str = ""

    def __len__(self):
        return len(self.labels)


def nearest_label(value: float, centroids: Sequence[float]) -> int:
    """Index of the nearest centroid; exact ties go to the lower ID."""
    c = np.asarray(centroids)
    return int(np.argmin((value - c) ** 2))


def assign_labels(
    features: Sequence[ProsodicFeature], vocab: ClusterVocabulary, utterance_id: str | None = None
) -> LabelSequence:
    if utterance_id is None:
        utterance_id = features[0].utterance_id if features else ""
    keys = tuple(vocab.resolve(f) for f in features)
    labels = tuple(nearest_label(vocab.value(f), vocab.centroids(key)) for f, key in zip(features, keys))
    return LabelSequence(utterance_id, labels, keys, vocab.feature)


def label_corpus(features: Sequence[ProsodicFeature], vocab: ClusterVocabulary) -> list[LabelSequence]:
    return [assign_labels(fs, vocab, uid) for uid, fs in group_by_utterance(features).items()]


def offset_labels(seq: LabelSequence, delta: int, vocab: ClusterVocabulary) -> LabelSequence:
    """Shift every label by ``delta``, clamped to ``[1, size - 2]`` per group.

    The extreme IDs are never produced by a non-zero shift. Groups of two
    or fewer clusters are left alone.
    """
    if delta == 0:
        return seq
    out = []
    for label, key in zip(seq.labels, seq.groups):
        size = vocab.size(key)
        out.append(label if size <= 2 else min(max(label + delta, 1), size - 2))
    return LabelSequence(seq.utterance_id, tuple(out), seq.groups, seq.vocabulary_ref)


def sweep_labels(seq: LabelSequence, vocab: ClusterVocabulary) -> list[LabelSequence]:
    """One sequence per cluster ID c, every label set to c (capped per group)."""
    sizes = [vocab.size(key) for key in seq.groups]
    return [
        LabelSequence(
            seq.utterance_id,
            tuple(min(c, s - 1) for s in sizes),
            seq.groups,
            seq.vocabulary_ref,
        )
        for c in range(vocab.max_size)
    ]


def with_groups(
    utterance_id: str,
    labels: Sequence[int],
    features: Sequence[ProsodicFeature],
    vocab: ClusterVocabulary,
) -> LabelSequence:
    """Rebuild a :class:`LabelSequence` from bare labels and their features."""
    if len(labels) != len(features):
        raise ValueError(
            f"{utterance_id}: {len(labels)} labels for {len(features)} prosodic targets"
        )
    keys = tuple(vocab.resolve(f) for f in features)
    for label, key in zip(labels, keys):
        if not 0 <= label < vocab.size(key):
            raise ValueError(f"{utterance_id}: label {label} outside group {key!r}")
    return LabelSequence(utterance_id, tuple(int(x) for x in labels), keys, vocab.feature)


def labels_to_text(seqs: Iterable[LabelSequence]) -> str:
    return "".join(
        " ".join([s.utterance_id, *map(str, s.labels)]) + "\n" for s in seqs
    )


def labels_from_text(text: str) -> dict[str, list[int]]:
    """Parse ``<utt_id> <label> ...`` lines; ``-`` placeholders are skipped."""
    out = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        parts = line.split()
        if not parts:
            continue
        try:
            out[parts[0]] = [int(tok) for tok in parts[1:] if tok != "-"]
        except ValueError:
            raise ValueError(f"label file line {line_no}: non-integer label") from None
    return out
