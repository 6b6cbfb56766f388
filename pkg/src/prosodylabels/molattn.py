"""Mixture-of-logistics location attention, as a plain numpy kernel.

A decoder step turns a query into raw mixture parameters with a two-layer
MLP, advances the component means by a positive increment, and spreads
attention over encoder positions ``j = 1..N`` as the mixture's probability
mass on ``[j - 0.5, j + 0.5]``. The context is the weighted sum of encoder
rows. Analytic Jacobians of the query-to-context chain are provided so the
kernel can be checked against finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NonFiniteInput, NonPositiveScale

DEFAULT_COMPONENTS = 5


def _sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def logistic_cdf(x, mu, s):
    """CDF of the logistic distribution, ``sigmoid((x - mu) / s)``."""
    s = np.asarray(s, dtype=np.float64)
    if np.any(s <= 0):
        raise NonPositiveScale("logistic scale must be > 0")
    z = (np.asarray(x, dtype=np.float64) - mu) / s
    out = _sigmoid(np.atleast_1d(z))
    return out.reshape(np.shape(z)) if np.ndim(z) else float(out[0])


def _bin_mass(lo, hi):
    """``sigmoid(hi) - sigmoid(lo)``, taken on the tail side to avoid cancellation."""
    flip = (lo + hi) > 0
    a = np.where(flip, -hi, lo)
    b = np.where(flip, -lo, hi)
    return _sigmoid(b) - _sigmoid(a)


@dataclass(frozen=True, eq=False)
class MoLState:
    mu: np.ndarray
    s: np.ndarray
    w: np.ndarray

    @property
    def K(self) -> int:
        return len(self.mu)

    @classmethod
    def initial(cls, K: int = DEFAULT_COMPONENTS) -> "MoLState":
        return cls(np.zeros(K), np.ones(K), np.full(K, 1.0 / K))

    def validate(self):
        if np.any(self.s <= 0):
            raise NonPositiveScale("mixture scales must be > 0")
        if abs(self.w.sum() - 1.0) > 1e-9 or np.any(self.w < 0):
            raise ValueError("mixture weights must be non-negative and sum to 1")


def _zgrid(state: MoLState, N: int):
    j = np.arange(1, N + 1, dtype=np.float64)[:, None]
    lo = (j - 0.5 - state.mu[None, :]) / state.s[None, :]
    hi = (j + 0.5 - state.mu[None, :]) / state.s[None, :]
    return lo, hi


def component_mass(state: MoLState, N: int) -> np.ndarray:
    """``N x K`` mass of each component on each encoder bin."""
    if N < 1:
        raise ValueError("encoder length must be >= 1")
    if np.any(state.s <= 0):
        raise NonPositiveScale("mixture scales must be > 0")
    lo, hi = _zgrid(state, N)
    return _bin_mass(lo, hi)


def alignment_row(state: MoLState, N: int) -> np.ndarray:
    return component_mass(state, N) @ state.w


def softmax(v: np.ndarray) -> np.ndarray:
    e = np.exp(v - np.max(v))
    return e / e.sum()


def advance_state(prev: MoLState, mu_hat, s_hat, w_hat) -> MoLState:
    raw = [np.asarray(r, dtype=np.float64) for r in (mu_hat, s_hat, w_hat)]
    if any(r.shape != (prev.K,) for r in raw):
        raise DimensionMismatch(f"raw parameters must each have {prev.K} entries")
    if not all(np.all(np.isfinite(r)) for r in raw):
        raise NonFiniteInput("raw mixture parameters must be finite")
    return MoLState(prev.mu + np.exp(raw[0]), np.exp(raw[1]), softmax(raw[2]))


@dataclass(frozen=True, eq=False)
class ParamLayer:
    """``raw = W2 tanh(W1 q + b1) + b2``; biases may be None."""

    W1: np.ndarray
    W2: np.ndarray
    b1: np.ndarray | None = None
    b2: np.ndarray | None = None

    def __post_init__(self):
        if self.W2.shape[1] != self.W1.shape[0]:
            raise DimensionMismatch("W2 columns must match W1 rows")
        if self.W2.shape[0] % 3:
            raise DimensionMismatch("W2 must have 3K rows")
        if self.b1 is not None and self.b1.shape != (self.W1.shape[0],):
            raise DimensionMismatch("b1 must match the hidden size")
        if self.b2 is not None and self.b2.shape != (self.W2.shape[0],):
            raise DimensionMismatch("b2 must have 3K entries")

    @property
    def K(self) -> int:
        return self.W2.shape[0] // 3

    @property
    def query_dim(self) -> int:
        return self.W1.shape[1]

    @classmethod
    def zeros(cls, query_dim: int, hidden: int, K: int = DEFAULT_COMPONENTS, bias=True):
        b1 = np.zeros(hidden) if bias else None
        b2 = np.zeros(3 * K) if bias else None
        return cls(np.zeros((hidden, query_dim)), np.zeros((3 * K, hidden)), b1, b2)

    @classmethod
    def random(
        cls,
        query_dim: int,
        hidden: int,
        K: int = DEFAULT_COMPONENTS,
        rng: np.random.Generator | None = None,
        scale: float = 1.0,
        bias: bool = True,
    ):
        rng = rng if rng is not None else np.random.default_rng(0)
        W1 = rng.normal(0, scale / np.sqrt(query_dim), (hidden, query_dim))
        W2 = rng.normal(0, scale / np.sqrt(hidden), (3 * K, hidden))
        b1 = rng.normal(0, 0.1 * scale, hidden) if bias else None
        b2 = rng.normal(0, 0.1 * scale, 3 * K) if bias else None
        return cls(W1, W2, b1, b2)

    def hidden_pre(self, query: np.ndarray) -> np.ndarray:
        q = np.asarray(query, dtype=np.float64)
        if q.shape != (self.query_dim,):
            raise DimensionMismatch(f"query has shape {q.shape}, expected ({self.query_dim},)")
        pre = self.W1 @ q
        return pre + self.b1 if self.b1 is not None else pre


def predict_params(query, layer: ParamLayer):
    """Split the MLP output into ``(mu_hat, s_hat, w_hat)`` blocks of K."""
    raw = layer.W2 @ np.tanh(layer.hidden_pre(query))
    if layer.b2 is not None:
        raw = raw + layer.b2
    K = layer.K
    return raw[:K], raw[K : 2 * K], raw[2 * K :]


def predict_params_jacobian(query, layer: ParamLayer) -> np.ndarray:
    """``3K x query_dim`` derivative of the stacked raw parameters."""
    t = np.tanh(layer.hidden_pre(query))
    return layer.W2 @ ((1.0 - t**2)[:, None] * layer.W1)


def context(weights, enc) -> np.ndarray:
    a = np.asarray(weights, dtype=np.float64)
    e = np.asarray(enc, dtype=np.float64)
    if e.ndim != 2 or a.shape != (e.shape[0],):
        raise DimensionMismatch(f"{a.shape} weights against encoder of shape {e.shape}")
    return a @ e


def step(query, prev: MoLState, layer: ParamLayer, enc):
    """One decoder step: returns ``(state, alignment row, context)``."""
    state = advance_state(prev, *predict_params(query, layer))
    row = alignment_row(state, len(enc))
    return state, row, context(row, enc)


def alignment_jacobian(state: MoLState, N: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Derivatives of the alignment row w.r.t. ``mu``, ``s`` and ``w`` (each ``N x K``)."""
    lo, hi = _zgrid(state, N)
    dlo = _sigmoid(lo) * _sigmoid(-lo)
    dhi = _sigmoid(hi) * _sigmoid(-hi)
    ws = state.w / state.s
    d_mu = -ws * (dhi - dlo)
    d_s = -ws * (hi * dhi - lo * dlo)
    d_w = _bin_mass(lo, hi)
    return d_mu, d_s, d_w


def context_jacobian(query, prev: MoLState, layer: ParamLayer, enc) -> np.ndarray:
    """``d x query_dim`` Jacobian of one step's context vector w.r.t. the query."""
    enc = np.asarray(enc, dtype=np.float64)
    mu_hat, s_hat, w_hat = predict_params(query, layer)
    state = advance_state(prev, mu_hat, s_hat, w_hat)
    d_mu, d_s, d_w = alignment_jacobian(state, len(enc))
    w = state.w
    da_draw = np.hstack(
        [
            d_mu * np.exp(mu_hat)[None, :],
            d_s * state.s[None, :],
            d_w @ (np.diag(w) - np.outer(w, w)),
        ]
    )
    return enc.T @ da_draw @ predict_params_jacobian(query, layer)


@dataclass(frozen=True, eq=False)
class DecodeResult:
    weights: np.ndarray  # steps x N
    contexts: np.ndarray  # steps x d
    mu: np.ndarray  # steps x K
    s: np.ndarray
    w: np.ndarray

    @property
    def monotone(self) -> bool:
        mu = np.vstack([np.zeros((1, self.mu.shape[1])), self.mu])
        return bool(np.all(np.diff(mu, axis=0) > 0))


def simulate_decode(layer: ParamLayer, queries, enc, initial: MoLState | None = None) -> DecodeResult:
    enc = np.asarray(enc, dtype=np.float64)
    if enc.ndim != 2:
        raise DimensionMismatch("encoder representations must be N x d")
    state = initial if initial is not None else MoLState.initial(layer.K)
    if state.K != layer.K:
        raise DimensionMismatch(f"state has {state.K} components, layer predicts {layer.K}")
    rows, ctxs, mus, ss, ws = [], [], [], [], []
    for q in queries:
        state, row, c = step(q, state, layer, enc)
        rows.append(row)
        ctxs.append(c)
        mus.append(state.mu)
        ss.append(state.s)
        ws.append(state.w)
    N, d, K = enc.shape[0], enc.shape[1], layer.K
    stack = lambda xs, width: np.array(xs).reshape(len(xs), width)
    return DecodeResult(stack(rows, N), stack(ctxs, d), stack(mus, K), stack(ss, K), stack(ws, K))


def alignment_to_csv(weights: np.ndarray) -> str:
    n = weights.shape[1]
    lines = ["step," + ",".join(str(j) for j in range(1, n + 1))]
    for i, row in enumerate(weights, start=1):
        lines.append(f"{i}," + ",".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"
