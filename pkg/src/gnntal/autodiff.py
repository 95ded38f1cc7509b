"""Minimal dense-tensor reverse-mode automatic differentiation.

Just enough machinery for the influence-regressor stack: 2-D tensors,
an explicit tape replayed in reverse execution order, the ops the model
needs (including an LSTM cell and multi-head attention built from the
primitives), an Adam optimizer, and a finite-difference gradient checker.

Values are float64 throughout; checkpoints store float32.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np


class Tensor:
    """Dense array node. ``grad`` accumulates additively across fan-out."""

    __slots__ = ("data", "grad", "requires_grad")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


_TAPES: list["Tape"] = []


class Tape:
    """Ordered record of executed ops; backward replays it in reverse.

    Use as a context manager around a forward pass. Ops executed while no
    tape is active run forward-only (inference fast path).
    """

    def __init__(self) -> None:
        self._backwards: list[Callable[[], None]] = []

    def __enter__(self) -> "Tape":
        _TAPES.append(self)
        return self

    def __exit__(self, *exc) -> None:
        _TAPES.pop()

    def backward(self, loss: Tensor) -> None:
        if loss.data.size != 1:
            raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
        loss.grad = np.ones_like(loss.data)
        for fn in reversed(self._backwards):
            fn()


def _record(out: Tensor, backward: Callable[[], None]) -> None:
    if _TAPES and out.requires_grad:
        _TAPES[-1]._backwards.append(backward)


def _needs_grad(*tensors: Tensor) -> bool:
    return bool(_TAPES) and any(t.requires_grad for t in tensors)


def _shape_check(cond: bool, op: str, *shapes) -> None:
    if not cond:
        raise ValueError(f"{op}: incompatible shapes {' and '.join(str(s) for s in shapes)}")


# ---------------------------------------------------------------------------
# Core ops
# ---------------------------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    _shape_check(a.data.ndim == 2 and b.data.ndim == 2 and a.shape[1] == b.shape[0],
                 "matmul", a.shape, b.shape)
    out = Tensor(a.data @ b.data, _needs_grad(a, b))

    def backward():
        if out.grad is None:
            return
        if a.requires_grad:
            a.accumulate(out.grad @ b.data.T)
        if b.requires_grad:
            b.accumulate(a.data.T @ out.grad)

    _record(out, backward)
    return out


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise add; ``b`` may broadcast over leading dims (bias pattern)."""
    _shape_check(
        a.shape == b.shape or a.shape[a.data.ndim - b.data.ndim:] == b.shape,
        "add", a.shape, b.shape,
    )
    out = Tensor(a.data + b.data, _needs_grad(a, b))

    def backward():
        if out.grad is None:
            return
        if a.requires_grad:
            a.accumulate(out.grad)
        if b.requires_grad:
            g = out.grad
            if b.shape != out.shape:
                g = g.sum(axis=tuple(range(out.data.ndim - b.data.ndim)))
            b.accumulate(g)

    _record(out, backward)
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    _shape_check(a.shape == b.shape, "mul", a.shape, b.shape)
    out = Tensor(a.data * b.data, _needs_grad(a, b))

    def backward():
        if out.grad is None:
            return
        if a.requires_grad:
            a.accumulate(out.grad * b.data)
        if b.requires_grad:
            b.accumulate(out.grad * a.data)

    _record(out, backward)
    return out


def scale(a: Tensor, c: float) -> Tensor:
    out = Tensor(a.data * c, _needs_grad(a))

    def backward():
        if out.grad is not None and a.requires_grad:
            a.accumulate(out.grad * c)

    _record(out, backward)
    return out


def concat(parts: Sequence[Tensor], axis: int = 0) -> Tensor:
    out = Tensor(np.concatenate([p.data for p in parts], axis=axis), _needs_grad(*parts))
    sizes = [p.data.shape[axis] for p in parts]
    splits = np.cumsum(sizes)[:-1]

    def backward():
        if out.grad is None:
            return
        for p, g in zip(parts, np.split(out.grad, splits, axis=axis)):
            if p.requires_grad:
                p.accumulate(g)

    _record(out, backward)
    return out


def slice_axis(a: Tensor, axis: int, start: int, stop: int) -> Tensor:
    index = [slice(None)] * a.data.ndim
    index[axis] = slice(start, stop)
    index = tuple(index)
    out = Tensor(a.data[index].copy(), _needs_grad(a))

    def backward():
        if out.grad is not None and a.requires_grad:
            g = np.zeros_like(a.data)
            g[index] = out.grad
            a.accumulate(g)

    _record(out, backward)
    return out


def gather_rows(a: Tensor, indices: np.ndarray) -> Tensor:
    """Select rows by index; backward scatter-adds (indices may repeat)."""
    idx = np.asarray(indices, dtype=np.int64)
    out = Tensor(a.data[idx], _needs_grad(a))

    def backward():
        if out.grad is not None and a.requires_grad:
            g = np.zeros_like(a.data)
            np.add.at(g, idx, out.grad)
            a.accumulate(g)

    _record(out, backward)
    return out


def transpose(a: Tensor) -> Tensor:
    _shape_check(a.data.ndim == 2, "transpose", a.shape)
    out = Tensor(a.data.T.copy(), _needs_grad(a))

    def backward():
        if out.grad is not None and a.requires_grad:
            a.accumulate(out.grad.T)

    _record(out, backward)
    return out


def relu(a: Tensor) -> Tensor:
    out = Tensor(np.maximum(a.data, 0.0), _needs_grad(a))

    def backward():
        if out.grad is not None and a.requires_grad:
            a.accumulate(out.grad * (a.data > 0))

    _record(out, backward)
    return out


def sigmoid(a: Tensor) -> Tensor:
    y = 1.0 / (1.0 + np.exp(-a.data))
    out = Tensor(y, _needs_grad(a))

    def backward():
        if out.grad is not None and a.requires_grad:
            a.accumulate(out.grad * y * (1.0 - y))

    _record(out, backward)
    return out


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)
    out = Tensor(y, _needs_grad(a))

    def backward():
        if out.grad is not None and a.requires_grad:
            a.accumulate(out.grad * (1.0 - y * y))

    _record(out, backward)
    return out


def softmax(a: Tensor) -> Tensor:
    """Softmax over the last dimension."""
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=-1, keepdims=True)
    out = Tensor(y, _needs_grad(a))

    def backward():
        if out.grad is not None and a.requires_grad:
            g = out.grad
            a.accumulate(y * (g - (g * y).sum(axis=-1, keepdims=True)))

    _record(out, backward)
    return out


def layer_norm(a: Tensor, gain: Tensor, shift: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the last dimension to zero mean / unit variance, then affine."""
    d = a.shape[-1]
    _shape_check(gain.shape == (d,) and shift.shape == (d,), "layer_norm", a.shape, gain.shape)
    mean = a.data.mean(axis=-1, keepdims=True)
    centered = a.data - mean
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv
    out = Tensor(xhat * gain.data + shift.data, _needs_grad(a, gain, shift))

    def backward():
        if out.grad is None:
            return
        g = out.grad
        if gain.requires_grad:
            gain.accumulate((g * xhat).sum(axis=tuple(range(g.ndim - 1))))
        if shift.requires_grad:
            shift.accumulate(g.sum(axis=tuple(range(g.ndim - 1))))
        if a.requires_grad:
            gx = g * gain.data
            a.accumulate(
                inv * (gx - gx.mean(axis=-1, keepdims=True)
                       - xhat * (gx * xhat).mean(axis=-1, keepdims=True))
            )

    _record(out, backward)
    return out


def dropout(a: Tensor, rate: float, mode: str, stream: np.random.Generator | None = None) -> Tensor:
    """Inverted dropout: train mode scales survivors by 1/(1-rate); eval is identity."""
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must lie in [0, 1), got {rate}")
    if mode == "eval" or rate == 0.0:
        return a
    if stream is None:
        raise ValueError("train-mode dropout needs a random stream")
    mask = (stream.random(a.shape) >= rate) / (1.0 - rate)
    out = Tensor(a.data * mask, _needs_grad(a))

    def backward():
        if out.grad is not None and a.requires_grad:
            a.accumulate(out.grad * mask)

    _record(out, backward)
    return out


def mse_loss(pred: Tensor, target: Tensor) -> Tensor:
    _shape_check(pred.shape == target.shape, "mse_loss", pred.shape, target.shape)
    diff = pred.data - target.data
    out = Tensor(np.array((diff * diff).mean()), _needs_grad(pred, target))

    def backward():
        if out.grad is None:
            return
        g = out.grad * 2.0 * diff / diff.size
        if pred.requires_grad:
            pred.accumulate(g)
        if target.requires_grad:
            target.accumulate(-g)

    _record(out, backward)
    return out


# ---------------------------------------------------------------------------
# Composite ops
# ---------------------------------------------------------------------------


def lstm_cell(x: Tensor, h: Tensor, c: Tensor, wx: Tensor, wh: Tensor, b: Tensor) -> tuple[Tensor, Tensor]:
    """One LSTM step for a batch of rows; gate order is (input, forget, cell, output)."""
    hidden = h.shape[-1]
    _shape_check(wx.shape == (x.shape[-1], 4 * hidden) and wh.shape == (hidden, 4 * hidden)
                 and b.shape == (4 * hidden,), "lstm_cell", x.shape, wx.shape, wh.shape)
    gates = add(add(matmul(x, wx), matmul(h, wh)), b)
    i = sigmoid(slice_axis(gates, 1, 0, hidden))
    f = sigmoid(slice_axis(gates, 1, hidden, 2 * hidden))
    g = tanh(slice_axis(gates, 1, 2 * hidden, 3 * hidden))
    o = sigmoid(slice_axis(gates, 1, 3 * hidden, 4 * hidden))
    c_next = add(mul(f, c), mul(i, g))
    h_next = mul(o, tanh(c_next))
    return h_next, c_next


def multi_head_attention(
    q: Tensor,
    k: Tensor,
    v: Tensor,
    heads: int,
    params: dict[str, Tensor],
    mask: np.ndarray | None = None,
) -> Tensor:
    """Scaled dot-product attention with per-head column splits.

    ``params`` holds projections wq/wk/wv/wo with biases bq/bk/bv/bo, all
    (d, d) and (d,). ``mask`` (additive, -inf to block) is accepted for
    completeness; the regressor never masks.
    """
    d = q.shape[-1]
    if d % heads != 0:
        raise ValueError(f"model dim {d} not divisible by {heads} heads")
    dh = d // heads
    qp = add(matmul(q, params["wq"]), params["bq"])
    kp = add(matmul(k, params["wk"]), params["bk"])
    vp = add(matmul(v, params["wv"]), params["bv"])
    contexts = []
    for hd in range(heads):
        lo, hi = hd * dh, (hd + 1) * dh
        qh = slice_axis(qp, 1, lo, hi)
        kh = slice_axis(kp, 1, lo, hi)
        vh = slice_axis(vp, 1, lo, hi)
        scores = scale(matmul(qh, transpose(kh)), 1.0 / np.sqrt(dh))
        if mask is not None:
            scores = add(scores, Tensor(mask))
        attn = softmax(scores)
        contexts.append(matmul(attn, vh))
    ctx = concat(contexts, axis=1)
    return add(matmul(ctx, params["wo"]), params["bo"])


# ---------------------------------------------------------------------------
# Optimizer
# ---------------------------------------------------------------------------


@dataclass
class AdamState:
    """First/second moment accumulators and the shared step counter."""

    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0


def adam_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """One bias-corrected Adam update, in place."""
    state.t += 1
    t = state.t
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p)
        if name not in state.m:
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        state.m[name] = beta1 * state.m[name] + (1 - beta1) * g
        state.v[name] = beta2 * state.v[name] + (1 - beta2) * g * g
        m_hat = state.m[name] / (1 - beta1**t)
        v_hat = state.v[name] / (1 - beta2**t)
        p -= lr * m_hat / (np.sqrt(v_hat) + eps)


# ---------------------------------------------------------------------------
# Gradient checker
# ---------------------------------------------------------------------------


def grad_check(
    f: Callable[[], Tensor],
    inputs: Sequence[Tensor],
    eps: float = 1e-5,
    max_coords_per_input: int | None = None,
    seed: int = 0,
) -> float:
    """Max relative error between tape gradients and central differences.

    ``f`` must be a deterministic scalar-valued closure over ``inputs``.
    The denominator is guarded below 1e-3 so finite-difference noise on
    near-zero gradients is judged on an absolute scale.
    """
    for t in inputs:
        t.grad = None
    with Tape() as tape:
        loss = f()
        tape.backward(loss)
    analytic = [np.zeros_like(t.data) if t.grad is None else t.grad.copy() for t in inputs]

    rng = np.random.default_rng(seed)
    worst = 0.0
    for t, gref in zip(inputs, analytic):
        flat = t.data.reshape(-1)
        n = flat.size
        if max_coords_per_input is not None and n > max_coords_per_input:
            coords = rng.choice(n, size=max_coords_per_input, replace=False)
        else:
            coords = range(n)
        for idx in coords:
            x0 = flat[idx]
            flat[idx] = x0 + eps
            hi = float(f().data)
            flat[idx] = x0 - eps
            lo = float(f().data)
            flat[idx] = x0
            fd = (hi - lo) / (2 * eps)
            ad = gref.reshape(-1)[idx]
            err = abs(ad - fd) / max(abs(ad), abs(fd), 1e-3)
            worst = max(worst, err)
    return worst
