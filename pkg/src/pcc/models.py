"""The two classifier architectures, inference, and model-file I/O.

ConvNet: input [1, 1024] -> conv1d (6 filters, kernel 32, stride 4)
-> ReLU -> maxpool (4, 4) -> flatten -> dense(-> 2) -> softmax.

LSTM: the valid (unpadded) frame prefix, optionally strided, fed one
scalar per step -> LSTM(hidden) -> final hidden state -> dense(-> 2)
-> softmax. The trailing zero padding is a storage artifact; running a
recurrent cell over hundreds of zero frames washes out both the state
and the gradient, so the recurrent model stops at ``valid_len``.

Model files (extension ``.pcnm``) are binary: magic ``PCNM``, uint32
little-endian format version, one architecture byte, the architecture's
config fields as int32 LE, the parameter tensors in declaration order as
float64 LE, then a uint32-length-prefixed UTF-8 JSON provenance blob.
"""

from __future__ import annotations

import copy
import io
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import engine
from .contour_data import PADDED_LEN, ClassLabel, PaddedSample
from .engine import Conv1dParams, DenseParams, LstmParams
from .errors import DataError

FORMAT_VERSION = 1
MAGIC = b"PCNM"
N_CLASSES = 2

ARCH_CONVNET = "convnet"
ARCH_LSTM = "lstm"
_ARCH_BYTES = {ARCH_CONVNET: 0, ARCH_LSTM: 1}
_BYTE_ARCHS = {v: k for k, v in _ARCH_BYTES.items()}

# LSTM init per the engine's conventions: small uniform weights and a
# positive forget-gate bias so early training does not forget instantly.
LSTM_WEIGHT_SPAN = 0.08
LSTM_FORGET_BIAS = 1.0


@dataclass(frozen=True)
class ConvNetConfig:
    n_filters: int = 6
    kernel_len: int = 32
    conv_stride: int = 4
    pool_window: int = 4
    pool_stride: int = 4

    def __post_init__(self):
        for name in ("n_filters", "kernel_len", "conv_stride", "pool_window", "pool_stride"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        self.dense_in()  # validates layer lengths

    def conv_out_len(self, input_len: int = PADDED_LEN) -> int:
        if input_len < self.kernel_len:
            raise ValueError(f"kernel_len {self.kernel_len} exceeds input length {input_len}")
        return (input_len - self.kernel_len) // self.conv_stride + 1

    def pool_out_len(self, input_len: int = PADDED_LEN) -> int:
        conv_len = self.conv_out_len(input_len)
        if conv_len < self.pool_window:
            raise ValueError(f"pool window {self.pool_window} exceeds conv output {conv_len}")
        return (conv_len - self.pool_window) // self.pool_stride + 1

    def dense_in(self, input_len: int = PADDED_LEN) -> int:
        return self.n_filters * self.pool_out_len(input_len)


@dataclass(frozen=True)
class LstmConfig:
    hidden_size: int = 32
    input_downsample: int = 1

    def __post_init__(self):
        if self.hidden_size < 1:
            raise ValueError("hidden_size must be >= 1")
        if self.input_downsample < 1:
            raise ValueError("input_downsample must be >= 1")


@dataclass
class ConvNetWeights:
    conv: Conv1dParams
    head: DenseParams


@dataclass
class LstmWeights:
    cell: LstmParams
    head: DenseParams


@dataclass
class ModelBundle:
    arch: str
    config: ConvNetConfig | LstmConfig
    weights: ConvNetWeights | LstmWeights
    version: int = FORMAT_VERSION
    provenance: dict = field(default_factory=dict)

    def clone(self) -> "ModelBundle":
        return ModelBundle(self.arch, self.config, copy.deepcopy(self.weights),
                           self.version, dict(self.provenance))


def _glorot_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    span = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-span, span, size=shape)


def build_convnet(cfg: ConvNetConfig = ConvNetConfig(),
                  rng: np.random.Generator | None = None) -> ModelBundle:
    rng = rng if rng is not None else np.random.default_rng(0)
    k = cfg.kernel_len
    conv_w = _glorot_uniform(rng, (cfg.n_filters, 1, k), fan_in=k, fan_out=cfg.n_filters * k)
    conv = Conv1dParams(conv_w, np.zeros(cfg.n_filters), cfg.conv_stride)
    d_in = cfg.dense_in()
    head = DenseParams(_glorot_uniform(rng, (N_CLASSES, d_in), d_in, N_CLASSES),
                       np.zeros(N_CLASSES))
    return ModelBundle(ARCH_CONVNET, cfg, ConvNetWeights(conv, head))


def build_lstm(cfg: LstmConfig = LstmConfig(),
               rng: np.random.Generator | None = None) -> ModelBundle:
    rng = rng if rng is not None else np.random.default_rng(0)
    h = cfg.hidden_size
    w_x = rng.uniform(-LSTM_WEIGHT_SPAN, LSTM_WEIGHT_SPAN, size=(4 * h, 1))
    w_h = rng.uniform(-LSTM_WEIGHT_SPAN, LSTM_WEIGHT_SPAN, size=(4 * h, h))
    bias = np.zeros(4 * h)
    bias[h:2 * h] = LSTM_FORGET_BIAS
    cell = LstmParams(w_x, w_h, bias)
    head = DenseParams(_glorot_uniform(rng, (N_CLASSES, h), h, N_CLASSES),
                       np.zeros(N_CLASSES))
    return ModelBundle(ARCH_LSTM, cfg, LstmWeights(cell, head))


def param_list(bundle: ModelBundle) -> list[np.ndarray]:
    """Parameter tensors in declaration (= serialization) order."""
    w = bundle.weights
    if bundle.arch == ARCH_CONVNET:
        return [w.conv.weights, w.conv.bias, w.head.weights, w.head.bias]
    return [w.cell.w_x, w.cell.w_h, w.cell.bias, w.head.weights, w.head.bias]


def param_names(bundle: ModelBundle) -> list[str]:
    if bundle.arch == ARCH_CONVNET:
        return ["conv.weights", "conv.bias", "head.weights", "head.bias"]
    return ["lstm.w_x", "lstm.w_h", "lstm.bias", "head.weights", "head.bias"]


def param_count(bundle: ModelBundle) -> int:
    return int(sum(p.size for p in param_list(bundle)))


# ---------------------------------------------------------------------------
# forward / backward over a batch


def forward_batch(bundle: ModelBundle, x: np.ndarray, lengths: np.ndarray | None = None):
    """Logits for a batch of padded frame rows x [B, 1024].

    ``lengths`` gives each row's valid prefix; the ConvNet ignores it,
    the LSTM stops there. Returns (logits [B, 2], cache).
    """
    if x.ndim != 2 or x.shape[1] != PADDED_LEN:
        raise ValueError(f"model input must be [batch, {PADDED_LEN}]")
    w = bundle.weights
    if bundle.arch == ARCH_CONVNET:
        z, conv_cache = engine.conv1d_forward(x[:, None, :], w.conv)
        a, relu_cache = engine.relu(z)
        pooled, pool_cache = engine.maxpool1d_forward(
            a, bundle.config.pool_window, bundle.config.pool_stride)
        flat = pooled.reshape(x.shape[0], -1)
        logits, dense_cache = engine.dense_forward(flat, w.head)
        return logits, ("convnet", conv_cache, relu_cache, pool_cache, pooled.shape, dense_cache)

    ds = bundle.config.input_downsample
    seq = x[:, ::ds, None]
    if lengths is None:
        seq_lens = None
    else:
        seq_lens = (np.asarray(lengths, dtype=np.int64) + ds - 1) // ds
    h_final, lstm_cache = engine.lstm_forward(seq, w.cell, seq_lens)
    logits, dense_cache = engine.dense_forward(h_final, w.head)
    return logits, ("lstm", lstm_cache, dense_cache)


def backward_batch(bundle: ModelBundle, cache, dlogits: np.ndarray) -> list[np.ndarray]:
    """Gradients for param_list(bundle), same order."""
    w = bundle.weights
    if cache[0] == "convnet":
        _, conv_cache, relu_cache, pool_cache, pooled_shape, dense_cache = cache
        dflat, (dw_head, db_head) = engine.dense_backward(dlogits, dense_cache, w.head)
        dpooled = dflat.reshape(pooled_shape)
        da = engine.maxpool1d_backward(dpooled, pool_cache)
        dz = engine.relu_backward(da, relu_cache)
        _, (dw_conv, db_conv) = engine.conv1d_backward(dz, conv_cache, w.conv, need_dx=False)
        return [dw_conv, db_conv, dw_head, db_head]

    _, lstm_cache, dense_cache = cache
    dh, (dw_head, db_head) = engine.dense_backward(dlogits, dense_cache, w.head)
    dw_x, dw_h, dbias = engine.lstm_backward(dh, lstm_cache, w.cell)
    return [dw_x, dw_h, dbias, dw_head, db_head]


def predict(bundle: ModelBundle, sample: PaddedSample) -> np.ndarray:
    """Class probabilities [p_statement, p_question] for one sample."""
    if sample.values.size != PADDED_LEN:
        raise ValueError(f"sample length {sample.values.size} != {PADDED_LEN}")
    logits, _ = forward_batch(bundle, sample.values[None, :],
                              np.array([sample.valid_len]))
    shifted = logits[0] - logits[0].max()
    e = np.exp(shifted)
    return e / e.sum()


def classify(bundle: ModelBundle, sample: PaddedSample) -> ClassLabel:
    """Argmax of predict; a tie goes to Statement."""
    return ClassLabel(int(np.argmax(predict(bundle, sample))))


# ---------------------------------------------------------------------------
# serialization


def _config_ints(bundle: ModelBundle) -> list[int]:
    c = bundle.config
    if bundle.arch == ARCH_CONVNET:
        return [c.n_filters, c.kernel_len, c.conv_stride, c.pool_window, c.pool_stride]
    return [c.hidden_size, c.input_downsample]


def save_model(bundle: ModelBundle, sink) -> None:
    """Write the bundle to a path or binary file object."""
    if isinstance(sink, (str, Path)):
        with open(sink, "wb") as fh:
            save_model(bundle, fh)
        return
    sink.write(MAGIC)
    sink.write(struct.pack("<I", bundle.version))
    sink.write(struct.pack("<B", _ARCH_BYTES[bundle.arch]))
    for value in _config_ints(bundle):
        sink.write(struct.pack("<i", value))
    for tensor in param_list(bundle):
        sink.write(np.ascontiguousarray(tensor, dtype="<f8").tobytes())
    blob = json.dumps(bundle.provenance, sort_keys=True).encode("utf-8")
    sink.write(struct.pack("<I", len(blob)))
    sink.write(blob)


def _read_exact(fh, n: int, what: str) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise DataError(f"truncated model file while reading {what}")
    return buf


def load_model(source) -> ModelBundle:
    """Read a model bundle from a path or binary file object."""
    if isinstance(source, (str, Path)):
        try:
            with open(source, "rb") as fh:
                return load_model(fh)
        except FileNotFoundError:
            raise DataError(f"model file not found: {source}") from None
    fh = source
    if _read_exact(fh, 4, "magic") != MAGIC:
        raise DataError("not a model file (bad magic)")
    version = struct.unpack("<I", _read_exact(fh, 4, "version"))[0]
    if version != FORMAT_VERSION:
        raise DataError(f"unknown model format version {version}")
    arch_byte = _read_exact(fh, 1, "architecture")[0]
    if arch_byte not in _BYTE_ARCHS:
        raise DataError(f"unknown architecture tag {arch_byte}")
    arch = _BYTE_ARCHS[arch_byte]

    def read_ints(n):
        return struct.unpack(f"<{n}i", _read_exact(fh, 4 * n, "config"))

    try:
        if arch == ARCH_CONVNET:
            cfg = ConvNetConfig(*read_ints(5))
        else:
            cfg = LstmConfig(*read_ints(2))
    except ValueError as exc:
        raise DataError(f"invalid model config: {exc}") from None

    def read_tensor(shape):
        n = int(np.prod(shape))
        buf = _read_exact(fh, 8 * n, "parameters")
        return np.frombuffer(buf, dtype="<f8").astype(np.float64).reshape(shape)

    if arch == ARCH_CONVNET:
        d_in = cfg.dense_in()
        weights = ConvNetWeights(
            Conv1dParams(read_tensor((cfg.n_filters, 1, cfg.kernel_len)),
                         read_tensor((cfg.n_filters,)), cfg.conv_stride),
            DenseParams(read_tensor((N_CLASSES, d_in)), read_tensor((N_CLASSES,))))
    else:
        h = cfg.hidden_size
        weights = LstmWeights(
            LstmParams(read_tensor((4 * h, 1)), read_tensor((4 * h, h)),
                       read_tensor((4 * h,))),
            DenseParams(read_tensor((N_CLASSES, h)), read_tensor((N_CLASSES,))))

    blob_len = struct.unpack("<I", _read_exact(fh, 4, "provenance length"))[0]
    blob = _read_exact(fh, blob_len, "provenance")
    try:
        provenance = json.loads(blob.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        raise DataError("corrupt provenance record") from None
    if fh.read(1):
        raise DataError("trailing bytes after model payload")
    return ModelBundle(arch, cfg, weights, version, provenance)


def model_bytes(bundle: ModelBundle) -> bytes:
    buf = io.BytesIO()
    save_model(bundle, buf)
    return buf.getvalue()
