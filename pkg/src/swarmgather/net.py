"""From-scratch convolutional actor-critic: forward, backward, weight I/O.

Pipeline for a 1x75x75 binary input, all valid (unpadded) convolutions:
conv 1->32 k8 s4 -> 32x17x17, conv 32->64 k4 s2 -> 64x7x7,
conv 64->64 k3 s1 -> 64x5x5, flatten to 1600, dense to 512, then a 2-unit
actor head and a 1-unit critic head; ReLU everywhere in between. The actor
also owns 2 state-independent log-std parameters used for stochastic
sampling. Training math runs in float32; gradient checks build float64 nets.
"""

from __future__ import annotations

import math
import struct

import numpy as np
from numpy.lib.stride_tricks import as_strided

from .control import Action, wrap_angle
from .errors import ContractViolationError, WeightFormatError
from .sensing import IMAGE_SIZE, Observation, rasterize

WEIGHT_MAGIC = b"S2PW"
WEIGHT_VERSION = 1

FLAT_FEATURES = 1600  # 64 * 5 * 5 out of the conv stack
HIDDEN_FEATURES = 512

# name -> (shape, orthogonal gain); conv kernels are (k, k, in, out), dense
# kernels (in, out): channels-last everywhere keeps the conv pipeline free of
# layout transposes
PARAM_LAYOUT = {
    "conv1.W": ((8, 8, 1, 32), math.sqrt(2.0)),
    "conv1.b": ((32,), None),
    "conv2.W": ((4, 4, 32, 64), math.sqrt(2.0)),
    "conv2.b": ((64,), None),
    "conv3.W": ((3, 3, 64, 64), math.sqrt(2.0)),
    "conv3.b": ((64,), None),
    "fc.W": ((FLAT_FEATURES, HIDDEN_FEATURES), math.sqrt(2.0)),
    "fc.b": ((HIDDEN_FEATURES,), None),
    "actor.W": ((HIDDEN_FEATURES, 2), 0.01),
    "actor.b": ((2,), None),
    "critic.W": ((HIDDEN_FEATURES, 1), 1.0),
    "critic.b": ((1,), None),
    "log_std": ((2,), None),
}

CONV_STRIDES = {"conv1": 4, "conv2": 2, "conv3": 1}


def conv_out_size(size: int, kernel: int, stride: int) -> int:
    return (size - kernel) // stride + 1


def _im2col(x: np.ndarray, k: int, stride: int, h_out: int, w_out: int) -> np.ndarray:
    """Gather conv windows as (B*H_out*W_out, k*k*C_in).

    Copies happen in long contiguous runs (per kernel row for single-channel
    input, per kernel offset otherwise), which is several times faster than a
    direct strided gather.
    """
    batch, h, width, c_in = x.shape
    cols = np.empty((batch, h_out, w_out, k, k, c_in), dtype=x.dtype)
    if c_in == 1:
        plane = x[..., 0]
        s0, s1, s2 = plane.strides
        for ki in range(k):
            cols[:, :, :, ki, :, 0] = as_strided(
                plane[:, ki:],
                shape=(batch, h_out, w_out, k),
                strides=(s0, s1 * stride, s2 * stride, s2),
            )
    else:
        for ki in range(k):
            for kj in range(k):
                cols[:, :, :, ki, kj, :] = x[
                    :, ki : ki + stride * h_out : stride, kj : kj + stride * w_out : stride, :
                ]
    return cols.reshape(batch * h_out * w_out, k * k * c_in)


def conv_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray, stride: int):
    """Valid 2D convolution (cross-correlation) via im2col + one matmul.

    x: (B, H, W, C_in); w: (k, k, C_in, C_out). Returns (out, cache) with
    out (B, H_out, W_out, C_out).
    """
    batch, h, width, c_in = x.shape
    k, _, _, c_out = w.shape
    h_out = conv_out_size(h, k, stride)
    w_out = conv_out_size(width, k, stride)
    cols = _im2col(x, k, stride, h_out, w_out)
    out = cols @ w.reshape(-1, c_out) + b
    cache = (cols, x.shape, stride, k)
    return out.reshape(batch, h_out, w_out, c_out), cache


def conv_backward(dout: np.ndarray, w: np.ndarray, cache):
    """Gradients of conv_forward; returns (dx, dw, db)."""
    cols, x_shape, stride, k = cache
    batch, h, width, c_in = x_shape
    c_out = w.shape[3]
    h_out = conv_out_size(h, k, stride)
    w_out = conv_out_size(width, k, stride)
    dout_mat = np.ascontiguousarray(dout).reshape(-1, c_out)
    dw = (cols.T @ dout_mat).reshape(w.shape)
    db = dout_mat.sum(axis=0)
    dcols = dout_mat @ w.reshape(-1, c_out).T
    dwin = dcols.reshape(batch, h_out, w_out, k, k, c_in)
    dx = np.zeros(x_shape, dtype=dout.dtype)
    for di in range(k):
        for dj in range(k):
            dx[:, di : di + stride * h_out : stride, dj : dj + stride * w_out : stride, :] += (
                dwin[:, :, :, di, dj, :]
            )
    return dx, dw, db


def _orthogonal(rng: np.random.Generator, shape, gain: float, dtype) -> np.ndarray:
    """Orthogonal init on the (fan_out, fan_in) matricization.

    Kernels store fan-out last, so orthogonalize (out, rest) and fold back.
    """
    rows = shape[-1]
    cols = int(np.prod(shape[:-1]))
    flat = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(flat)
    q = q * np.sign(np.diag(r))
    if rows < cols:
        q = q.T
    # C-contiguous so flat views over parameters stay views
    return np.ascontiguousarray((gain * q[:rows, :cols]).T.reshape(shape), dtype=dtype)


class PolicyNet:
    """Parameter container plus forward/backward for the architecture above."""

    def __init__(self, params: dict, dtype=np.float32):
        self.dtype = np.dtype(dtype)
        expected = {name: shape for name, (shape, _) in PARAM_LAYOUT.items()}
        if set(params) != set(expected):
            missing = sorted(set(expected) - set(params))
            extra = sorted(set(params) - set(expected))
            raise WeightFormatError(f"parameter set mismatch: missing={missing} extra={extra}")
        self.params = {}
        for name, arr in params.items():
            arr = np.ascontiguousarray(arr, dtype=self.dtype)
            if arr.shape != expected[name]:
                raise WeightFormatError(
                    f"tensor {name!r} has shape {arr.shape}, expected {expected[name]}"
                )
            self.params[name] = arr

    @classmethod
    def initialize(cls, seed: int = 0, dtype=np.float32) -> "PolicyNet":
        """Orthogonal kernels (gain sqrt(2) hidden, 0.01 actor, 1.0 critic), zero biases."""
        rng = np.random.default_rng(seed)
        params = {}
        for name, (shape, gain) in PARAM_LAYOUT.items():
            if gain is None:
                params[name] = np.zeros(shape, dtype=dtype)
            else:
                params[name] = _orthogonal(rng, shape, gain, dtype)
        return cls(params, dtype=dtype)

    def _as_batch(self, images) -> np.ndarray:
        x = np.asarray(images)
        if x.ndim == 2:
            x = x[None]
        if x.ndim != 3 or x.shape[1:] != (IMAGE_SIZE, IMAGE_SIZE):
            raise ContractViolationError(
                f"expected ({IMAGE_SIZE}, {IMAGE_SIZE}) or (B, {IMAGE_SIZE}, {IMAGE_SIZE}) "
                f"input, got {np.asarray(images).shape}"
            )
        return np.ascontiguousarray(x[..., None], dtype=self.dtype)

    def forward(self, images):
        """(actor_raw (B, 2), value (B,), cache) for a batch of binary images."""
        p = self.params
        x = self._as_batch(images)
        z1, c1 = conv_forward(x, p["conv1.W"], p["conv1.b"], CONV_STRIDES["conv1"])
        a1 = np.maximum(z1, 0)
        z2, c2 = conv_forward(a1, p["conv2.W"], p["conv2.b"], CONV_STRIDES["conv2"])
        a2 = np.maximum(z2, 0)
        z3, c3 = conv_forward(a2, p["conv3.W"], p["conv3.b"], CONV_STRIDES["conv3"])
        a3 = np.maximum(z3, 0)
        flat = a3.reshape(a3.shape[0], -1)
        if flat.shape[1] != FLAT_FEATURES:
            raise ContractViolationError(
                f"flatten produced {flat.shape[1]} features, expected {FLAT_FEATURES}"
            )
        z4 = flat @ p["fc.W"] + p["fc.b"]
        a4 = np.maximum(z4, 0)
        actor_raw = a4 @ p["actor.W"] + p["actor.b"]
        value = (a4 @ p["critic.W"] + p["critic.b"])[:, 0]
        cache = (c1, z1, c2, z2, c3, z3, flat, z4, a4)
        return actor_raw, value, cache

    def forward_single(self, image):
        """(actor_raw (2,), value scalar) for one 75x75 image."""
        actor_raw, value, _ = self.forward(image)
        return actor_raw[0], float(value[0])

    def backward(self, cache, grad_actor_raw, grad_value) -> dict:
        """Parameter gradients given upstream gradients on the two heads."""
        p = self.params
        c1, z1, c2, z2, c3, z3, flat, z4, a4 = cache
        grad_actor_raw = np.asarray(grad_actor_raw, dtype=self.dtype).reshape(-1, 2)
        grad_value = np.asarray(grad_value, dtype=self.dtype).reshape(-1)
        if grad_actor_raw.shape[0] != a4.shape[0] or grad_value.shape[0] != a4.shape[0]:
            raise ContractViolationError("upstream gradient batch size does not match cache")
        grads = {}
        grads["actor.W"] = a4.T @ grad_actor_raw
        grads["actor.b"] = grad_actor_raw.sum(axis=0)
        gv = grad_value[:, None]
        grads["critic.W"] = a4.T @ gv
        grads["critic.b"] = gv.sum(axis=0)
        da4 = grad_actor_raw @ p["actor.W"].T + gv @ p["critic.W"].T
        dz4 = da4 * (z4 > 0)
        grads["fc.W"] = flat.T @ dz4
        grads["fc.b"] = dz4.sum(axis=0)
        dflat = dz4 @ p["fc.W"].T
        da3 = dflat.reshape(z3.shape)
        dz3 = da3 * (z3 > 0)
        da2, grads["conv3.W"], grads["conv3.b"] = conv_backward(dz3, p["conv3.W"], c3)
        dz2 = da2 * (z2 > 0)
        da1, grads["conv2.W"], grads["conv2.b"] = conv_backward(dz2, p["conv2.W"], c2)
        dz1 = da1 * (z1 > 0)
        _, grads["conv1.W"], grads["conv1.b"] = conv_backward(dz1, p["conv1.W"], c1)
        grads["log_std"] = np.zeros_like(p["log_std"])
        return grads

    def copy(self) -> "PolicyNet":
        return PolicyNet({k: v.copy() for k, v in self.params.items()}, dtype=self.dtype)


def squash_raw(raw) -> Action:
    """Map 2 raw head values into the action space: bounds become intrinsic.

    Float tanh saturates to exactly -1, which would land on the excluded -pi
    endpoint; that heading is wrapped to +pi (same direction).
    """
    alpha = wrap_angle(math.pi * math.tanh(float(raw[0])))
    sigma = (math.tanh(float(raw[1])) + 1.0) / 2.0
    return Action(alpha, sigma)


def act(net: PolicyNet, image, mode: str = "deterministic", rng=None) -> Action:
    """Policy action for one observation image.

    Deterministic mode squashes the raw actor outputs; stochastic mode first
    samples a Gaussian around them with the learned state-independent
    log-std. Either way the result satisfies the action-space bounds.
    """
    raw, _ = net.forward_single(image)
    if mode == "deterministic":
        return squash_raw(raw)
    if mode == "stochastic":
        if rng is None:
            raise ContractViolationError("stochastic act() needs an rng")
        std = np.exp(net.params["log_std"].astype(np.float64))
        sample = raw.astype(np.float64) + std * rng.standard_normal(2)
        return squash_raw(sample)
    raise ContractViolationError(f"unknown act mode {mode!r}")


class PolicyController:
    """Drives episodes with a PolicyNet; batches the per-agent forward pass."""

    def __init__(self, net: PolicyNet, mode: str = "deterministic", seed: int = 0):
        if mode not in ("deterministic", "stochastic"):
            raise ContractViolationError(f"unknown policy mode {mode!r}")
        self.net = net
        self.mode = mode
        self._rng = np.random.default_rng(seed)

    def act(self, observation: Observation) -> Action:
        return self.act_all([observation])[0]

    def act_all(self, observations) -> list:
        images = np.stack([rasterize(obs) for obs in observations])
        raw, _, _ = self.net.forward(images)
        if self.mode == "stochastic":
            std = np.exp(self.net.params["log_std"].astype(np.float64))
            raw = raw.astype(np.float64) + std * self._rng.standard_normal(raw.shape)
        return [squash_raw(row) for row in raw]


def save_archive(tensors: dict, path) -> None:
    """Binary tensor archive; exact byte layout in docs/WEIGHTS_FORMAT.md."""
    with open(path, "wb") as fh:
        fh.write(WEIGHT_MAGIC)
        fh.write(struct.pack("<I", WEIGHT_VERSION))
        fh.write(struct.pack("<I", len(tensors)))
        for name, arr in tensors.items():
            encoded = name.encode("utf-8")
            if len(encoded) > 0xFFFF:
                raise WeightFormatError(f"tensor name too long: {name!r}")
            arr32 = np.ascontiguousarray(arr, dtype="<f4")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<I", arr32.ndim))
            for dim in arr32.shape:
                fh.write(struct.pack("<I", dim))
            fh.write(arr32.tobytes())


class _Reader:
    def __init__(self, blob: bytes, path):
        self.blob = blob
        self.pos = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.blob):
            raise WeightFormatError(f"{self.path}: truncated weight file")
        chunk = self.blob[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u16(self) -> int:
        return struct.unpack("<H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]


def load_archive(path) -> dict:
    with open(path, "rb") as fh:
        blob = fh.read()
    reader = _Reader(blob, path)
    magic = reader.take(4)
    if magic != WEIGHT_MAGIC:
        raise WeightFormatError(f"{path}: bad magic {magic!r}, expected {WEIGHT_MAGIC!r}")
    version = reader.u32()
    if version != WEIGHT_VERSION:
        raise WeightFormatError(f"{path}: unsupported weight version {version}")
    count = reader.u32()
    tensors = {}
    for _ in range(count):
        name = reader.take(reader.u16()).decode("utf-8")
        rank = reader.u32()
        shape = tuple(reader.u32() for _ in range(rank))
        size = int(np.prod(shape, dtype=np.int64)) if rank else 1
        data = reader.take(4 * size)
        tensors[name] = np.frombuffer(data, dtype="<f4").reshape(shape).copy()
    if reader.pos != len(blob):
        raise WeightFormatError(f"{path}: {len(blob) - reader.pos} trailing bytes")
    return tensors


def save_weights(net: PolicyNet, path) -> None:
    save_archive(net.params, path)


def load_weights(path, dtype=np.float32) -> PolicyNet:
    """Load and validate a full policy checkpoint (shape-checked)."""
    return PolicyNet(load_archive(path), dtype=dtype)
