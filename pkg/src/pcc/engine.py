"""Minimal deterministic neural-network engine.

Conventions:

* everything is float64; arrays are C-contiguous numpy;
* every operation takes a batch: the leading axis is the batch axis
  (conv/pool work on [B, C, L], dense on [B, D], LSTM on [B, L, D]);
* convolution is cross-correlation (no kernel flip) with valid padding;
* forwards return an opaque cache consumed by the matching backward;
* all ops are deterministic: identical inputs give bitwise-identical
  outputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from numpy.lib.stride_tricks import as_strided

from .errors import NumericError

# ---------------------------------------------------------------------------
# layer parameters


@dataclass
class Conv1dParams:
    weights: np.ndarray  # [out_channels, in_channels, kernel_len]
    bias: np.ndarray     # [out_channels]
    stride: int = 1

    def __post_init__(self):
        if self.weights.ndim != 3:
            raise ValueError("conv weights must be [out, in, kernel]")
        if self.stride < 1 or self.weights.shape[2] < 1:
            raise ValueError("kernel_len and stride must be >= 1")


@dataclass
class DenseParams:
    weights: np.ndarray  # [out_dim, in_dim]
    bias: np.ndarray     # [out_dim]


# Gate order used throughout for the stacked LSTM parameters.
LSTM_GATES = ("input", "forget", "cell", "output")


@dataclass
class LstmParams:
    """Stacked-gate LSTM parameters.

    Rows of ``w_x``/``w_h``/``bias`` hold the input, forget, cell and
    output gates in that order, each block ``hidden`` rows tall.
    """

    w_x: np.ndarray   # [4*hidden, in_dim]
    w_h: np.ndarray   # [4*hidden, hidden]
    bias: np.ndarray  # [4*hidden]

    def __post_init__(self):
        h = self.hidden
        if self.w_h.shape != (4 * h, h) or self.bias.shape != (4 * h,):
            raise ValueError("inconsistent LSTM parameter shapes")

    @property
    def hidden(self) -> int:
        return self.w_h.shape[1]

    @property
    def in_dim(self) -> int:
        return self.w_x.shape[1]


# ---------------------------------------------------------------------------
# convolution


def conv1d_output_len(length: int, kernel_len: int, stride: int) -> int:
    if length < kernel_len:
        raise ValueError(f"input length {length} shorter than kernel {kernel_len}")
    return (length - kernel_len) // stride + 1


def _windows(x: np.ndarray, width: int, stride: int) -> np.ndarray:
    """Strided view [B, C, L_out, width] of sliding windows over x [B, C, L]."""
    b, c, length = x.shape
    l_out = conv1d_output_len(length, width, stride)
    sb, sc, sl = x.strides
    return as_strided(x, (b, c, l_out, width), (sb, sc, sl * stride, sl))


def conv1d_forward(x: np.ndarray, p: Conv1dParams):
    """Valid cross-correlation. x [B, C_in, L] -> y [B, C_out, L_out]."""
    if x.ndim != 3:
        raise ValueError("conv input must be [batch, channels, length]")
    if x.shape[1] != p.weights.shape[1]:
        raise ValueError(f"channel mismatch: input {x.shape[1]}, weights {p.weights.shape[1]}")
    x = np.ascontiguousarray(x)
    win = _windows(x, p.weights.shape[2], p.stride)
    # win [B,C,T,K] . w [O,C,K] summed over C,K -> [B,T,O]
    y = np.tensordot(win, p.weights, axes=([1, 3], [1, 2]))
    y = np.ascontiguousarray(y.transpose(0, 2, 1)) + p.bias[None, :, None]
    return y, (x, win)


def conv1d_backward(dy: np.ndarray, cache, p: Conv1dParams, need_dx: bool = True):
    """Gradients of conv1d_forward. Returns (dx, (dweights, dbias))."""
    x, win = cache
    b, _, length = x.shape
    out_ch, in_ch, kernel = p.weights.shape
    if dy.shape != (b, out_ch, win.shape[2]):
        raise ValueError(f"dy shape {dy.shape} does not match forward output")
    dw = np.tensordot(dy, win, axes=([0, 2], [0, 2]))      # [O, C, K]
    db = dy.sum(axis=(0, 2))
    dx = None
    if need_dx:
        # g[b,t,c,k] = sum_o dy[b,o,t] * w[o,c,k]
        g = np.tensordot(dy.transpose(0, 2, 1), p.weights, axes=([2], [0]))
        dx = np.zeros_like(x)
        t_span = win.shape[2] * p.stride
        for k in range(kernel):
            dx[:, :, k:k + t_span:p.stride] += g[:, :, :, k].transpose(0, 2, 1)
    return dx, (dw, db)


# ---------------------------------------------------------------------------
# elementwise / pooling


def relu(x: np.ndarray):
    return np.maximum(x, 0.0), x


def relu_backward(dy: np.ndarray, cache) -> np.ndarray:
    return dy * (cache > 0)


def maxpool1d_forward(x: np.ndarray, window: int, stride: int):
    """Max over sliding windows; ties go to the lowest index."""
    x = np.ascontiguousarray(x)
    win = _windows(x, window, stride)
    arg = win.argmax(axis=3)                                # first max wins
    y = np.take_along_axis(win, arg[..., None], axis=3)[..., 0]
    return y, (x.shape, stride, arg)


def maxpool1d_backward(dy: np.ndarray, cache) -> np.ndarray:
    x_shape, stride, arg = cache
    if dy.shape != arg.shape:
        raise ValueError(f"dy shape {dy.shape} does not match pool output {arg.shape}")
    dx = np.zeros(x_shape)
    b, c, t = arg.shape
    bb, cc, tt = np.ogrid[:b, :c, :t]
    np.add.at(dx, (bb, cc, tt * stride + arg), dy)
    return dx


# ---------------------------------------------------------------------------
# dense


def dense_forward(x: np.ndarray, p: DenseParams):
    """y = x W^T + b. x [B, in_dim] -> y [B, out_dim]."""
    if x.shape[1] != p.weights.shape[1]:
        raise ValueError(f"dense input dim {x.shape[1]} != weights in_dim {p.weights.shape[1]}")
    return x @ p.weights.T + p.bias, x


def dense_backward(dy: np.ndarray, cache, p: DenseParams):
    x = cache
    dw = dy.T @ x
    db = dy.sum(axis=0)
    dx = dy @ p.weights
    return dx, (dw, db)


# ---------------------------------------------------------------------------
# LSTM


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _gate_split(z: np.ndarray, h: int):
    i = _sigmoid(z[:, :h])
    f = _sigmoid(z[:, h:2 * h])
    g = np.tanh(z[:, 2 * h:3 * h])
    o = _sigmoid(z[:, 3 * h:])
    return i, f, g, o


def lstm_step(x_t: np.ndarray, h_prev: np.ndarray, c_prev: np.ndarray, p: LstmParams):
    """One cell update. Returns (h, c, cache).

    i = sigmoid(.), f = sigmoid(.), g = tanh(.), o = sigmoid(.),
    c = f*c_prev + i*g, h = o*tanh(c).
    """
    h_dim = p.hidden
    if x_t.shape[1] != p.in_dim or h_prev.shape[1] != h_dim:
        raise ValueError("lstm_step shape mismatch")
    z = x_t @ p.w_x.T + h_prev @ p.w_h.T + p.bias
    i, f, g, o = _gate_split(z, h_dim)
    c = f * c_prev + i * g
    tc = np.tanh(c)
    h = o * tc
    return h, c, (x_t, h_prev, c_prev, i, f, g, o, c, tc)


def lstm_forward(seq: np.ndarray, p: LstmParams, lengths: np.ndarray | None = None):
    """Run the cell over seq [B, L, D]; h and c start at zero.

    When ``lengths`` is given, the final state of sample b is its state
    after ``lengths[b]`` steps (later frames do not affect it). Returns
    (h_final [B, hidden], cache).
    """
    b, full_len, d = seq.shape
    if full_len < 1:
        raise ValueError("sequence must have at least one step")
    if d != p.in_dim:
        raise ValueError(f"sequence feature dim {d} != LSTM in_dim {p.in_dim}")
    h_dim = p.hidden
    if lengths is None:
        run_len = full_len
    else:
        lengths = np.asarray(lengths, dtype=np.int64)
        if lengths.shape != (b,) or lengths.min() < 1 or lengths.max() > full_len:
            raise ValueError("lengths must be in [1, L] for every sample")
        run_len = int(lengths.max())

    zx = seq[:, :run_len, :].reshape(b * run_len, d) @ p.w_x.T
    zx = zx.reshape(b, run_len, 4 * h_dim) + p.bias

    gates = np.empty((run_len, b, 4 * h_dim))   # post-activation i,f,g,o
    cells = np.empty((run_len, b, h_dim))
    tanh_c = np.empty((run_len, b, h_dim))
    hidden = np.empty((run_len, b, h_dim))
    h = np.zeros((b, h_dim))
    c = np.zeros((b, h_dim))
    for t in range(run_len):
        z = zx[:, t, :] + h @ p.w_h.T
        i, f, g, o = _gate_split(z, h_dim)
        c = f * c + i * g
        tc = np.tanh(c)
        h = o * tc
        gates[t, :, :h_dim] = i
        gates[t, :, h_dim:2 * h_dim] = f
        gates[t, :, 2 * h_dim:3 * h_dim] = g
        gates[t, :, 3 * h_dim:] = o
        cells[t] = c
        tanh_c[t] = tc
        hidden[t] = h

    if lengths is None:
        h_final = hidden[-1].copy()
    else:
        h_final = hidden[lengths - 1, np.arange(b), :]
    cache = (seq, lengths, run_len, gates, cells, tanh_c, hidden)
    return h_final, cache


def lstm_backward(dh_final: np.ndarray, cache, p: LstmParams):
    """BPTT over the cached forward run. Returns (dw_x, dw_h, dbias)."""
    seq, lengths, run_len, gates, cells, tanh_c, hidden = cache
    b, _, d = seq.shape
    h_dim = p.hidden
    if dh_final.shape != (b, h_dim):
        raise ValueError("dh_final shape mismatch")

    # samples whose final step is t, for injecting dh_final at that step
    if lengths is None:
        last_at = {run_len - 1: np.arange(b)}
    else:
        last_at = {}
        for t in np.unique(lengths - 1):
            last_at[int(t)] = np.nonzero(lengths - 1 == t)[0]

    dz_all = np.empty((run_len, b, 4 * h_dim))
    dh = np.zeros((b, h_dim))
    dc = np.zeros((b, h_dim))
    for t in range(run_len - 1, -1, -1):
        if t in last_at:
            idx = last_at[t]
            dh = dh.copy()
            dh[idx] += dh_final[idx]
        i = gates[t, :, :h_dim]
        f = gates[t, :, h_dim:2 * h_dim]
        g = gates[t, :, 2 * h_dim:3 * h_dim]
        o = gates[t, :, 3 * h_dim:]
        tc = tanh_c[t]
        do = dh * tc
        dc = dc + dh * o * (1.0 - tc * tc)
        c_prev = cells[t - 1] if t > 0 else 0.0
        dz = dz_all[t]
        dz[:, :h_dim] = (dc * g) * i * (1.0 - i)
        dz[:, h_dim:2 * h_dim] = (dc * c_prev) * f * (1.0 - f)
        dz[:, 2 * h_dim:3 * h_dim] = (dc * i) * (1.0 - g * g)
        dz[:, 3 * h_dim:] = do * o * (1.0 - o)
        dh = dz @ p.w_h
        dc = dc * f

    h_prev = np.concatenate([np.zeros((1, b, h_dim)), hidden[:-1]], axis=0)
    dw_h = np.tensordot(dz_all, h_prev, axes=([0, 1], [0, 1]))
    seq_t = seq[:, :run_len, :].transpose(1, 0, 2)
    dw_x = np.tensordot(dz_all, seq_t, axes=([0, 1], [0, 1]))
    dbias = dz_all.sum(axis=(0, 1))
    return dw_x, dw_h, dbias


# ---------------------------------------------------------------------------
# loss


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray):
    """Per-sample softmax + negative log-likelihood.

    logits [B, n_classes], labels [B] integer. Returns
    (losses [B], dlogits [B, n_classes], probs [B, n_classes]) where
    dlogits is the gradient of each sample's own loss.
    """
    if not np.all(np.isfinite(logits)):
        raise NumericError("non-finite logits")
    labels = np.asarray(labels, dtype=np.int64)
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    probs = e / e.sum(axis=1, keepdims=True)
    rows = np.arange(logits.shape[0])
    losses = -np.log(probs[rows, labels])
    dlogits = probs.copy()
    dlogits[rows, labels] -= 1.0
    return losses, dlogits, probs


# ---------------------------------------------------------------------------
# optimizers


@dataclass
class OptimizerState:
    kind: str                    # "sgd" | "adam"
    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list | None = None        # first moments, one per parameter tensor
    v: list | None = None        # second moments


def make_optimizer(kind: str, learning_rate: float,
                   params: Sequence[np.ndarray]) -> OptimizerState:
    if kind not in ("sgd", "adam"):
        raise ValueError(f"unknown optimizer {kind!r}")
    if learning_rate <= 0:
        raise ValueError("learning rate must be > 0")
    state = OptimizerState(kind, learning_rate)
    if kind == "adam":
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    return state


def optimizer_step(params: Sequence[np.ndarray], grads: Sequence[np.ndarray],
                   state: OptimizerState) -> None:
    """Update params in place from congruent grads."""
    if len(params) != len(grads):
        raise ValueError("params/grads length mismatch")
    for p, g in zip(params, grads):
        if p.shape != g.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape}")
    if state.kind == "sgd":
        for p, g in zip(params, grads):
            p -= state.learning_rate * g
        return
    state.step += 1
    b1c = 1.0 - state.beta1 ** state.step
    b2c = 1.0 - state.beta2 ** state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= state.learning_rate * (m / b1c) / (np.sqrt(v / b2c) + state.eps)


# ---------------------------------------------------------------------------
# gradient verification


def grad_check(loss_fn: Callable[[], float], params: Sequence[np.ndarray],
               analytic: Sequence[np.ndarray], eps: float = 1e-4,
               rng: np.random.Generator | None = None,
               max_coords: int = 200) -> float:
    """Compare analytic gradients against central finite differences.

    Perturbs up to ``max_coords`` coordinates of each parameter tensor in
    place (restoring them), re-evaluating ``loss_fn`` at +/- eps. Returns
    the worst relative error |analytic - numeric| / max(|a|, |n|, 1e-8).
    """
    worst = 0.0
    for tensor, grad in zip(params, analytic):
        if tensor.shape != grad.shape:
            raise ValueError("analytic gradient shape mismatch")
        flat = tensor.reshape(-1)
        gflat = grad.reshape(-1)
        n = flat.size
        if n <= max_coords:
            coords = np.arange(n)
        else:
            if rng is None:
                raise ValueError("rng required to subsample coordinates")
            coords = rng.choice(n, size=max_coords, replace=False)
        for idx in coords:
            orig = flat[idx]
            flat[idx] = orig + eps
            lp = loss_fn()
            flat[idx] = orig - eps
            lm = loss_fn()
            flat[idx] = orig
            if not (np.isfinite(lp) and np.isfinite(lm)):
                raise NumericError("non-finite loss during gradient check")
            numeric = (lp - lm) / (2.0 * eps)
            a = gflat[idx]
            err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            worst = max(worst, err)
    return worst
