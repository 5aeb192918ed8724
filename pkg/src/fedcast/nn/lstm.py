"""Two-layer LSTM forecaster with a linear head, in float64 numpy.

The model reads a window of K feature rows and predicts the next hour's
normalised consumption from the second layer's final hidden state.  Forward,
loss, and backpropagation through time are written out directly so that the
gradient can be checked against finite differences.

Gate blocks are stacked in a fixed order (forget, input, output, cell
candidate), giving a fixed flat parameter layout that the rest of the
package treats as the unit of averaging and clustering:

    layer 1: input weights (4*hidden, d) row-major,
             recurrent weights (4*hidden, hidden) row-major,
             biases (4*hidden,)
    layer 2: same three blocks with input size = hidden
    head weight (hidden,)
    head bias (1,)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import NumericalError, ValidationError

# Fixed architecture width.  Tests may build narrower models through the
# `hidden` arguments below; the CLI does not expose it.
HIDDEN_SIZE = 20

GATE_ORDER = ("forget", "input", "output", "cell")


def sigmoid(x):
    # Large |x| saturates to exactly 0.0 or 1.0; the overflow inside exp is benign.
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-x))


def _as_float_array(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    return arr


@dataclass(frozen=True)
class LSTMLayerParams:
    """Weights of one LSTM layer.

    The four gates are stacked along the first axis in GATE_ORDER, so
    w_x[:hidden] is the forget gate's input weight, w_x[hidden:2*hidden]
    the input gate's, and so on.
    """

    w_x: np.ndarray  # (4*hidden, input_size)
    w_h: np.ndarray  # (4*hidden, hidden)
    b: np.ndarray    # (4*hidden,)

    def __post_init__(self):
        if self.w_x.ndim != 2 or self.w_x.shape[0] % 4 != 0:
            raise ValidationError("w_x must be (4*hidden, input_size)")
        hidden = self.w_x.shape[0] // 4
        if self.w_h.shape != (4 * hidden, hidden):
            raise ValidationError("w_h must be (4*hidden, hidden)")
        if self.b.shape != (4 * hidden,):
            raise ValidationError("b must be (4*hidden,)")
        for arr in (self.w_x, self.w_h, self.b):
            if not np.all(np.isfinite(arr)):
                raise ValidationError("layer parameters must be finite")

    @property
    def hidden(self) -> int:
        return self.w_x.shape[0] // 4

    @property
    def input_size(self) -> int:
        return self.w_x.shape[1]

    def _blocks(self, arr: np.ndarray) -> dict:
        h = self.hidden
        return {name: arr[i * h:(i + 1) * h] for i, name in enumerate(GATE_ORDER)}

    @property
    def input_weights(self) -> dict:
        """Per-gate views of w_x keyed by GATE_ORDER names."""
        return self._blocks(self.w_x)

    @property
    def recurrent_weights(self) -> dict:
        return self._blocks(self.w_h)

    @property
    def biases(self) -> dict:
        return self._blocks(self.b)


@dataclass(frozen=True)
class LSTMState:
    """Hidden and cell activations of one layer after some time step."""

    hidden: np.ndarray
    cell: np.ndarray

    def __post_init__(self):
        if self.hidden.shape != self.cell.shape or self.hidden.ndim != 1:
            raise ValidationError("state vectors must be 1-d and equally sized")
        if not (np.all(np.isfinite(self.hidden)) and np.all(np.isfinite(self.cell))):
            raise ValidationError("state vectors must be finite")

    @classmethod
    def zeros(cls, hidden: int) -> "LSTMState":
        return cls(np.zeros(hidden, dtype=np.float64), np.zeros(hidden, dtype=np.float64))


@dataclass(frozen=True)
class ForecastModel:
    """Stacked two-layer LSTM plus a scalar linear head on the final hidden state."""

    layer1: LSTMLayerParams
    layer2: LSTMLayerParams
    head_w: np.ndarray  # (hidden,)
    head_b: float

    def __post_init__(self):
        h = self.layer1.hidden
        if self.layer2.hidden != h or self.layer2.input_size != h:
            raise ValidationError("layer 2 must consume layer 1's hidden state")
        if self.head_w.shape != (h,):
            raise ValidationError("head weight must match the hidden size")
        if not (np.all(np.isfinite(self.head_w)) and np.isfinite(self.head_b)):
            raise ValidationError("head parameters must be finite")

    @property
    def feature_dim(self) -> int:
        return self.layer1.input_size

    @property
    def hidden(self) -> int:
        return self.layer1.hidden


def lstm_cell_forward(x_t, prev: LSTMState, params: LSTMLayerParams) -> LSTMState:
    """One LSTM step: gate the previous cell, write the candidate, emit hidden.

    c_t = f_t * c_{t-1} + i_t * g_t and h_t = o_t * tanh(c_t), with f, i, o
    sigmoid gates and g the tanh candidate, each an affine map of (x_t, h_{t-1}).
    """
    x = _as_float_array(x_t, "x_t")
    if x.shape != (params.input_size,):
        raise ValidationError(
            f"x_t has shape {x.shape}, expected ({params.input_size},)"
        )
    if prev.hidden.shape != (params.hidden,):
        raise ValidationError("previous state does not match the layer width")
    h = params.hidden
    z = params.w_x @ x + params.w_h @ prev.hidden + params.b
    f = sigmoid(z[:h])
    i = sigmoid(z[h:2 * h])
    o = sigmoid(z[2 * h:3 * h])
    g = np.tanh(z[3 * h:])
    c_t = prev.cell * f + i * g
    h_t = o * np.tanh(c_t)
    return LSTMState(h_t, c_t)


def param_count(feature_dim: int, hidden: int = HIDDEN_SIZE) -> int:
    """Length of the flat parameter vector for the given input width."""
    layer1 = 4 * (hidden * feature_dim + hidden * hidden + hidden)
    layer2 = 4 * (hidden * hidden + hidden * hidden + hidden)
    return layer1 + layer2 + hidden + 1


def flatten(model: ForecastModel) -> np.ndarray:
    """Serialise a model to the fixed flat layout (see module docstring)."""
    return np.concatenate([
        model.layer1.w_x.ravel(),
        model.layer1.w_h.ravel(),
        model.layer1.b,
        model.layer2.w_x.ravel(),
        model.layer2.w_h.ravel(),
        model.layer2.b,
        model.head_w,
        np.array([model.head_b], dtype=np.float64),
    ])


def unflatten(vec, feature_dim: int, hidden: int = HIDDEN_SIZE) -> ForecastModel:
    """Rebuild a model from a flat vector; inverse of flatten."""
    vec = np.asarray(vec, dtype=np.float64)
    expected = param_count(feature_dim, hidden)
    if vec.shape != (expected,):
        raise ValidationError(
            f"parameter vector has length {vec.shape}, expected ({expected},)"
        )

    def take(n, shape):
        nonlocal offset
        block = vec[offset:offset + n].reshape(shape).copy()
        offset += n
        return block

    offset = 0
    layers = []
    for d in (feature_dim, hidden):
        w_x = take(4 * hidden * d, (4 * hidden, d))
        w_h = take(4 * hidden * hidden, (4 * hidden, hidden))
        b = take(4 * hidden, (4 * hidden,))
        layers.append(LSTMLayerParams(w_x, w_h, b))
    head_w = take(hidden, (hidden,))
    head_b = float(vec[offset])
    return ForecastModel(layers[0], layers[1], head_w, head_b)


def init_model(feature_dim: int, rng: np.random.Generator,
               hidden: int = HIDDEN_SIZE) -> ForecastModel:
    """Fresh model with every coordinate uniform in [-1/sqrt(hidden), 1/sqrt(hidden)].

    The whole flat vector is drawn in one call so the initialisation is a
    deterministic function of the generator state alone.
    """
    if feature_dim < 1 or hidden < 1:
        raise ValidationError("feature_dim and hidden must be positive")
    bound = 1.0 / np.sqrt(hidden)
    vec = rng.uniform(-bound, bound, size=param_count(feature_dim, hidden))
    return unflatten(vec, feature_dim, hidden)


class _LayerCache:
    """Per-step activations kept for backpropagation through time."""

    __slots__ = ("c", "f", "i", "o", "g")

    def __init__(self, b, k, h):
        self.c = np.empty((b, k, h))
        self.f = np.empty((b, k, h))
        self.i = np.empty((b, k, h))
        self.o = np.empty((b, k, h))
        self.g = np.empty((b, k, h))


def _layer_forward(x_seq: np.ndarray, params: LSTMLayerParams, want_cache: bool):
    """Run one layer over (B, K, d) inputs from a zero initial state."""
    b, k, _ = x_seq.shape
    h = params.hidden
    out = np.empty((b, k, h))
    cache = _LayerCache(b, k, h) if want_cache else None
    h_t = np.zeros((b, h))
    c_t = np.zeros((b, h))
    wx_t = params.w_x.T
    wh_t = params.w_h.T
    for t in range(k):
        z = x_seq[:, t] @ wx_t + h_t @ wh_t + params.b
        f = sigmoid(z[:, :h])
        i = sigmoid(z[:, h:2 * h])
        o = sigmoid(z[:, 2 * h:3 * h])
        g = np.tanh(z[:, 3 * h:])
        c_t = c_t * f + i * g
        h_t = o * np.tanh(c_t)
        out[:, t] = h_t
        if want_cache:
            cache.c[:, t] = c_t
            cache.f[:, t] = f
            cache.i[:, t] = i
            cache.o[:, t] = o
            cache.g[:, t] = g
    return out, cache


def _layer_backward(x_seq, hidden_seq, cache, d_hidden, params, need_dx):
    """Backpropagate through one layer; returns flat block grads and dX."""
    b, k, d = x_seq.shape
    h = params.hidden
    d_wx = np.zeros_like(params.w_x)
    d_wh = np.zeros_like(params.w_h)
    d_b = np.zeros_like(params.b)
    d_x = np.zeros_like(x_seq) if need_dx else None
    dh_carry = np.zeros((b, h))
    dc = np.zeros((b, h))
    zeros = np.zeros((b, h))
    for t in range(k - 1, -1, -1):
        dh = d_hidden[:, t] + dh_carry
        c_prev = cache.c[:, t - 1] if t > 0 else zeros
        h_prev = hidden_seq[:, t - 1] if t > 0 else zeros
        f = cache.f[:, t]
        i = cache.i[:, t]
        o = cache.o[:, t]
        g = cache.g[:, t]
        tc = np.tanh(cache.c[:, t])
        do = dh * tc
        dc = dc + dh * o * (1.0 - tc * tc)
        df = dc * c_prev
        di = dc * g
        dg = dc * i
        dz = np.concatenate(
            [df * f * (1.0 - f), di * i * (1.0 - i), do * o * (1.0 - o),
             dg * (1.0 - g * g)],
            axis=1,
        )
        d_wx += dz.T @ x_seq[:, t]
        d_wh += dz.T @ h_prev
        d_b += dz.sum(axis=0)
        if need_dx:
            d_x[:, t] = dz @ params.w_x
        dh_carry = dz @ params.w_h
        dc = dc * f
    return d_wx, d_wh, d_b, d_x


def forward_batch(windows, model: ForecastModel) -> np.ndarray:
    """Predictions for a (B, K, feature_dim) batch of windows."""
    x = _as_float_array(windows, "windows")
    if x.ndim != 3 or x.shape[0] < 1 or x.shape[1] < 1:
        raise ValidationError("windows must be a nonempty (B, K, d) array")
    if x.shape[2] != model.feature_dim:
        raise ValidationError(
            f"windows carry {x.shape[2]} features, model expects {model.feature_dim}"
        )
    h1, _ = _layer_forward(x, model.layer1, want_cache=False)
    h2, _ = _layer_forward(h1, model.layer2, want_cache=False)
    return h2[:, -1] @ model.head_w + model.head_b


def model_forward(window, model: ForecastModel) -> float:
    """Scalar forecast for one (K, feature_dim) window."""
    w = np.asarray(getattr(window, "window", window), dtype=np.float64)
    if w.ndim != 2:
        raise ValidationError("window must be a (K, feature_dim) array")
    return float(forward_batch(w[None, :, :], model)[0])


def mse_loss(predictions, targets) -> float:
    """Mean squared error between two equally sized nonempty vectors."""
    p = _as_float_array(predictions, "predictions").ravel()
    t = _as_float_array(targets, "targets").ravel()
    if p.size == 0 or p.size != t.size:
        raise ValidationError("predictions and targets must have equal nonzero length")
    diff = p - t
    return float(np.mean(diff * diff))


def compute_gradients(windows, targets, model: ForecastModel):
    """Gradient of the batch mean squared error, flattened; also the loss.

    `windows` may be a (B, K, d) array or a sequence of objects with
    .window/.label attributes (in which case `targets` may be None).
    """
    if not isinstance(windows, np.ndarray):
        samples = list(windows)
        if not samples:
            raise ValidationError("empty batch")
        if targets is None:
            targets = [s.label for s in samples]
        windows = np.stack([np.asarray(s.window, dtype=np.float64) for s in samples])
    x = _as_float_array(windows, "windows")
    y = _as_float_array(targets, "targets").ravel()
    if x.ndim != 3 or x.shape[0] != y.size or y.size == 0:
        raise ValidationError("batch windows and targets must align and be nonempty")
    if x.shape[2] != model.feature_dim:
        raise ValidationError("feature width does not match the model")

    b = x.shape[0]
    h1, cache1 = _layer_forward(x, model.layer1, want_cache=True)
    h2, cache2 = _layer_forward(h1, model.layer2, want_cache=True)
    pred = h2[:, -1] @ model.head_w + model.head_b
    resid = pred - y
    # overflow here is caught by the finiteness check, not worth a warning
    with np.errstate(over="ignore"):
        loss = float(np.mean(resid * resid))
    if not np.isfinite(loss):
        raise NumericalError("loss is not finite")

    dpred = (2.0 / b) * resid
    g_head_w = h2[:, -1].T @ dpred
    g_head_b = dpred.sum()
    d_h2 = np.zeros_like(h2)
    d_h2[:, -1] = np.outer(dpred, model.head_w)
    d2_wx, d2_wh, d2_b, d_h1 = _layer_backward(
        h1, h2, cache2, d_h2, model.layer2, need_dx=True)
    d1_wx, d1_wh, d1_b, _ = _layer_backward(
        x, h1, cache1, d_h1, model.layer1, need_dx=False)

    grad = np.concatenate([
        d1_wx.ravel(), d1_wh.ravel(), d1_b,
        d2_wx.ravel(), d2_wh.ravel(), d2_b,
        g_head_w, np.array([g_head_b]),
    ])
    if not np.all(np.isfinite(grad)):
        index = int(np.flatnonzero(~np.isfinite(grad))[0])
        raise NumericalError(
            f"non-finite gradient at parameter index {index}", param_index=index)
    return grad, loss
