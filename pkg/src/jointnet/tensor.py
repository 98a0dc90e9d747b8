"""Dense float64 tensors and a reverse-mode differentiation tape.

Every layer and loss in the package is built from the primitives here. Ops
compute eagerly on numpy arrays; when a Tape is active (``with tape:``) each
op appends a node holding its inputs, output, and a backward closure, in
execution order. ``backward`` then walks the node list in reverse.

Determinism is a hard contract: reductions use fixed numpy orderings, and
maxpool ties break to the first (row-major) window position.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import NumericError

Array = np.ndarray


class Tensor:
    """Immutable dense array of 64-bit floats.

    Values must be finite: NaN/Inf is an error state, never a silent value.
    """

    __slots__ = ("data",)

    def __init__(self, data):
        arr = np.asarray(data, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            raise NumericError("tensor contains non-finite values")
        self.data = arr

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape})"


def zeros(shape) -> Tensor:
    return Tensor(np.zeros(shape))


def zeros_like(t: Tensor) -> Tensor:
    return Tensor(np.zeros(t.shape))


@dataclass
class TapeNode:
    """One recorded primitive: kind, inputs, single output, backward closure.

    The closure maps the output gradient to one gradient array per input
    (None for inputs that do not need one). Saved activations live in the
    closure's captured variables.
    """

    op: str
    inputs: tuple[Tensor, ...]
    output: Tensor
    backward: Callable[[Array], tuple[Array | None, ...]]


class Tape:
    """Execution-ordered record of ops plus the set of watched parameters.

    Activate with ``with tape:``. Parameters must be watched explicitly so
    that ``backward`` can return an exact-zero gradient for any parameter
    the loss never touched. Single-writer: one tape records one forward
    pass on one thread.
    """

    def __init__(self):
        self.nodes: list[TapeNode] = []
        self._watched: dict[int, Tensor] = {}

    def watch(self, parameter: Tensor) -> None:
        """Flag a leaf tensor as trainable for the next backward call."""
        self._watched[id(parameter)] = parameter

    @property
    def watched(self) -> list[Tensor]:
        return list(self._watched.values())

    def __enter__(self) -> "Tape":
        _tls_stack().append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        popped = _tls_stack().pop()
        if popped is not self:  # pragma: no cover - misuse guard
            raise RuntimeError("tape context exited out of order")


_tls = threading.local()


def _tls_stack() -> list[Tape]:
    stack = getattr(_tls, "stack", None)
    if stack is None:
        stack = []
        _tls.stack = stack
    return stack


def active_tape() -> Tape | None:
    stack = _tls_stack()
    return stack[-1] if stack else None


def record(op: str, inputs: tuple[Tensor, ...], output: Tensor,
           backward_fn: Callable[[Array], tuple[Array | None, ...]]) -> None:
    """Append a node to the active tape, if any. No-op during inference."""
    tape = active_tape()
    if tape is not None:
        tape.nodes.append(TapeNode(op, inputs, output, backward_fn))


def backward(tape: Tape, seed: Tensor) -> dict[Tensor, Tensor]:
    """Reverse-traverse the tape from a scalar seed.

    Returns dLoss/dParam for every watched parameter; parameters unreachable
    from the seed get exact zeros of the parameter's shape.
    """
    if seed.shape != ():
        raise ValueError(f"backward seed must be a scalar, got shape {seed.shape}")
    grads: dict[int, Array] = {id(seed): np.ones(())}
    for node in reversed(tape.nodes):
        out_grad = grads.pop(id(node.output), None)
        if out_grad is None:
            continue
        input_grads = node.backward(out_grad)
        for tensor, grad in zip(node.inputs, input_grads):
            if grad is None:
                continue
            key = id(tensor)
            if key in grads:
                grads[key] = grads[key] + grad
            else:
                grads[key] = grad
    result: dict[Tensor, Tensor] = {}
    for param in tape._watched.values():
        grad = grads.get(id(param))
        if grad is None:
            result[param] = zeros_like(param)
        else:
            result[param] = Tensor(np.broadcast_to(grad, param.shape).copy())
    return result


# ---------------------------------------------------------------------------
# primitives


def _require_finite(name: str, *tensors: Tensor) -> None:
    for t in tensors:
        if not np.all(np.isfinite(t.data)):
            raise NumericError(f"{name}: non-finite input")


def conv2d(x: Tensor, kernel: Tensor, bias: Tensor, stride: int = 1,
           padding: str = "same") -> Tensor:
    """2-D cross-correlation over [C,H,W] with a [C_out,C_in,kH,kW] kernel.

    "same" keeps H' = ceil(H/stride) (odd kernels only); "valid" gives
    H' = floor((H-kH)/stride) + 1. Bias is per output channel.
    """
    if x.ndim != 3 or kernel.ndim != 4 or bias.ndim != 1:
        raise ValueError(
            f"conv2d expects input [C,H,W], kernel [C_out,C_in,kH,kW], bias "
            f"[C_out]; got {x.shape}, {kernel.shape}, {bias.shape}")
    c_in, h, w = x.shape
    c_out, kc, kh, kw = kernel.shape
    if kc != c_in:
        raise ValueError(
            f"conv2d channel mismatch: kernel {kernel.shape} expects {kc} input "
            f"channels but input is {x.shape}")
    if bias.shape[0] != c_out:
        raise ValueError(f"conv2d bias {bias.shape} does not match {c_out} output channels")
    if stride < 1:
        raise ValueError(f"conv2d stride must be >= 1, got {stride}")
    if padding not in ("same", "valid"):
        raise ValueError(f"conv2d padding must be 'same' or 'valid', got {padding!r}")
    if padding == "same" and (kh % 2 == 0 or kw % 2 == 0):
        raise ValueError(f"conv2d same padding requires odd kernel dims, got {kh}x{kw}")
    if padding == "valid" and (kh > h or kw > w):
        raise ValueError(f"conv2d kernel {kh}x{kw} larger than input {h}x{w} for valid padding")
    _require_finite("conv2d", x, kernel, bias)

    if padding == "same":
        h_out = -(-h // stride)
        w_out = -(-w // stride)
        pad_h = max((h_out - 1) * stride + kh - h, 0)
        pad_w = max((w_out - 1) * stride + kw - w, 0)
    else:
        h_out = (h - kh) // stride + 1
        w_out = (w - kw) // stride + 1
        pad_h = pad_w = 0
    top, left = pad_h // 2, pad_w // 2
    padded = np.pad(x.data, ((0, 0), (top, pad_h - top), (left, pad_w - left)))
    s0, s1, s2 = padded.strides
    windows = np.lib.stride_tricks.as_strided(
        padded,
        shape=(c_in, h_out, w_out, kh, kw),
        strides=(s0, s1 * stride, s2 * stride, s1, s2),
    )
    out_data = np.tensordot(kernel.data, windows, axes=([1, 2, 3], [0, 3, 4]))
    out = Tensor(out_data + bias.data[:, None, None])

    kdata = kernel.data

    def backward_fn(g: Array):
        db = g.sum(axis=(1, 2))
        dk = np.tensordot(g, windows, axes=([1, 2], [1, 2]))
        dpadded = np.zeros_like(padded)
        for ki in range(kh):
            for kj in range(kw):
                contrib = np.tensordot(kdata[:, :, ki, kj], g, axes=([0], [0]))
                dpadded[:, ki:ki + stride * h_out:stride,
                        kj:kj + stride * w_out:stride] += contrib
        dx = dpadded[:, top:top + h, left:left + w]
        return dx, dk, db

    record("conv2d", (x, kernel, bias), out, backward_fn)
    return out


def maxpool2x2(x: Tensor) -> Tensor:
    """2x2 max pooling with stride 2; requires even spatial dims."""
    if x.ndim != 3:
        raise ValueError(f"maxpool2x2 expects [C,H,W], got {x.shape}")
    c, h, w = x.shape
    if h % 2 or w % 2:
        raise ValueError(f"maxpool2x2 requires even spatial dims, got {h}x{w}")
    _require_finite("maxpool2x2", x)
    windows = (x.data.reshape(c, h // 2, 2, w // 2, 2)
               .transpose(0, 1, 3, 2, 4)
               .reshape(c, h // 2, w // 2, 4))
    # argmax over the row-major window gives the top-left-most tie winner
    idx = windows.argmax(axis=3)
    out = Tensor(np.take_along_axis(windows, idx[..., None], axis=3)[..., 0])

    def backward_fn(g: Array):
        dwin = np.zeros_like(windows)
        np.put_along_axis(dwin, idx[..., None], g[..., None], axis=3)
        dx = (dwin.reshape(c, h // 2, w // 2, 2, 2)
              .transpose(0, 1, 3, 2, 4)
              .reshape(c, h, w))
        return (dx,)

    record("maxpool2x2", (x,), out, backward_fn)
    return out


def upsample2x2(x: Tensor) -> Tensor:
    """Nearest-neighbor 2x upsampling; backward sums the four replicas."""
    if x.ndim != 3:
        raise ValueError(f"upsample2x2 expects [C,H,W], got {x.shape}")
    _require_finite("upsample2x2", x)
    c, h, w = x.shape
    out = Tensor(np.repeat(np.repeat(x.data, 2, axis=1), 2, axis=2))

    def backward_fn(g: Array):
        return (g.reshape(c, h, 2, w, 2).sum(axis=(2, 4)),)

    record("upsample2x2", (x,), out, backward_fn)
    return out


def dense(x: Tensor, weights: Tensor, bias: Tensor) -> Tensor:
    """Fully connected layer: out[k] = sum_d weights[k,d]*x[d] + bias[k]."""
    if x.ndim != 1 or weights.ndim != 2 or bias.ndim != 1:
        raise ValueError(
            f"dense expects x [D], weights [K,D], bias [K]; got "
            f"{x.shape}, {weights.shape}, {bias.shape}")
    k, d = weights.shape
    if x.shape[0] != d or bias.shape[0] != k:
        raise ValueError(
            f"dense dimension mismatch: weights {weights.shape} vs input "
            f"{x.shape} and bias {bias.shape}")
    _require_finite("dense", x, weights, bias)
    out = Tensor(weights.data @ x.data + bias.data)

    xdata, wdata = x.data, weights.data

    def backward_fn(g: Array):
        return wdata.T @ g, np.outer(g, xdata), g.copy()

    record("dense", (x, weights, bias), out, backward_fn)
    return out


def relu(x: Tensor) -> Tensor:
    _require_finite("relu", x)
    out = Tensor(np.maximum(x.data, 0.0))
    mask = x.data > 0

    def backward_fn(g: Array):
        return (g * mask,)

    record("relu", (x,), out, backward_fn)
    return out


def sigmoid(x: Tensor) -> Tensor:
    _require_finite("sigmoid", x)
    xd = x.data
    # split by sign so exp never overflows
    out_data = np.empty_like(xd)
    pos = xd >= 0
    out_data[pos] = 1.0 / (1.0 + np.exp(-xd[pos]))
    ex = np.exp(xd[~pos])
    out_data[~pos] = ex / (1.0 + ex)
    out = Tensor(out_data)

    def backward_fn(g: Array):
        return (g * out_data * (1.0 - out_data),)

    record("sigmoid", (x,), out, backward_fn)
    return out


def softmax(x: Tensor) -> Tensor:
    """Stable softmax over a 1-D tensor (shift by the max is mandatory)."""
    if x.ndim != 1 or x.size < 1:
        raise ValueError(f"softmax expects a non-empty 1-D tensor, got {x.shape}")
    _require_finite("softmax", x)
    shifted = x.data - x.data.max()
    e = np.exp(shifted)
    p = e / e.sum()
    out = Tensor(p)

    def backward_fn(g: Array):
        return (p * (g - np.dot(g, p)),)

    record("softmax", (x,), out, backward_fn)
    return out


def global_avg_pool(x: Tensor) -> Tensor:
    """Mean over each channel plane: [C,H,W] -> [C]."""
    if x.ndim != 3:
        raise ValueError(f"global_avg_pool expects [C,H,W], got {x.shape}")
    _require_finite("global_avg_pool", x)
    c, h, w = x.shape
    out = Tensor(x.data.mean(axis=(1, 2)))

    def backward_fn(g: Array):
        return (np.broadcast_to(g[:, None, None] / (h * w), (c, h, w)).copy(),)

    record("global_avg_pool", (x,), out, backward_fn)
    return out


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum of two same-shape tensors."""
    if a.shape != b.shape:
        raise ValueError(f"add shape mismatch: {a.shape} vs {b.shape}")
    _require_finite("add", a, b)
    out = Tensor(a.data + b.data)

    def backward_fn(g: Array):
        return g, g

    record("add", (a, b), out, backward_fn)
    return out


def scale(x: Tensor, factor: float) -> Tensor:
    """Multiply by a python scalar (used for loss weighting)."""
    factor = float(factor)
    if not np.isfinite(factor):
        raise NumericError(f"scale factor must be finite, got {factor}")
    _require_finite("scale", x)
    out = Tensor(x.data * factor)

    def backward_fn(g: Array):
        return (g * factor,)

    record("scale", (x,), out, backward_fn)
    return out


def tensor_sum(x: Tensor) -> Tensor:
    """Sum of all entries, as a scalar tensor."""
    _require_finite("tensor_sum", x)
    out = Tensor(x.data.sum())
    shape = x.shape

    def backward_fn(g: Array):
        return (np.full(shape, float(g)),)

    record("tensor_sum", (x,), out, backward_fn)
    return out
