"""Reverse-mode automatic differentiation on dense float64 arrays.

A Tensor is a plain value holder. Primitives compute with numpy and, when a
Tape is active, append (output, inputs, pull) records to it. backward() walks
the records in reverse, pulling the output adjoint back onto the inputs, so
every recorded node is visited exactly once. Running a primitive with no tape
active performs the identical numpy computation and records nothing, so
forward values agree bitwise with and without a tape.

The finite-difference checker at the bottom is the independent route for
validating adjoints; it only ever calls the taped route to obtain analytic
gradients and otherwise re-evaluates the loss as a black box.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ContractError, NumericError, ShapeError

_ACTIVE: "Tape | None" = None


class Tensor:
    __slots__ = ("values", "grad", "name")

    def __init__(self, values, name: str | None = None):
        self.values = np.asarray(values, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    def item(self) -> float:
        if self.values.size != 1:
            raise ContractError(f"item() on tensor of shape {self.shape}")
        return float(self.values.reshape(()))

    def __repr__(self):
        tag = f" {self.name!r}" if self.name else ""
        return f"Tensor{tag}(shape={self.shape})"


def const(values, name: str | None = None) -> Tensor:
    return Tensor(values, name=name)


class Tape:
    """Ordered record of primitive applications, replayable in reverse."""

    def __init__(self):
        self._entries: list[tuple[Tensor, tuple[Tensor, ...], Callable]] = []

    def __enter__(self) -> "Tape":
        global _ACTIVE
        if _ACTIVE is not None:
            raise ContractError("a tape is already active; tapes do not nest")
        _ACTIVE = self
        return self

    def __exit__(self, exc_type, exc, tb):
        global _ACTIVE
        _ACTIVE = None
        return False

    def __len__(self):
        return len(self._entries)

    def backward(self, loss: Tensor, params: Sequence[Tensor] | None = None) -> list[np.ndarray]:
        """Populate .grad on every tensor reachable from loss through this tape.

        Returns gradients aligned with `params` when given; parameters the loss
        never touched get exact zeros. Raises on a non-scalar loss.
        """
        if loss.values.size != 1:
            raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
        if not np.isfinite(loss.values).all():
            raise NumericError("loss is not finite")
        # reset so repeated backward calls never double-accumulate
        for out, inputs, _ in self._entries:
            out.grad = None
            for t in inputs:
                t.grad = None
        if params is not None:
            for p in params:
                p.grad = np.zeros_like(p.values)
        loss.grad = np.ones_like(loss.values)
        for out, _, pull in reversed(self._entries):
            if out.grad is None:
                continue
            pull(out.grad)
        if params is None:
            return []
        return [p.grad for p in params]  # type: ignore[misc]


def _record(out: Tensor, inputs: tuple[Tensor, ...], pull: Callable) -> Tensor:
    if _ACTIVE is not None:
        _ACTIVE._entries.append((out, inputs, pull))
    return out


def _acc(t: Tensor, g: np.ndarray) -> None:
    if t.grad is None:
        t.grad = np.zeros_like(t.values)
    t.grad += g


def _same_shape(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} differ")


# ---------------------------------------------------------------- primitives


def add(a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b, "add")
    out = Tensor(a.values + b.values)

    def pull(g):
        _acc(a, g)
        _acc(b, g)

    return _record(out, (a, b), pull)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b, "sub")
    out = Tensor(a.values - b.values)

    def pull(g):
        _acc(a, g)
        _acc(b, -g)

    return _record(out, (a, b), pull)


def mul(a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b, "mul")
    out = Tensor(a.values * b.values)

    def pull(g):
        _acc(a, g * b.values)
        _acc(b, g * a.values)

    return _record(out, (a, b), pull)


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)
    out = Tensor(a.values * c)

    def pull(g):
        _acc(a, g * c)

    return _record(out, (a,), pull)


def one_minus(a: Tensor) -> Tensor:
    out = Tensor(1.0 - a.values)

    def pull(g):
        _acc(a, -g)

    return _record(out, (a,), pull)


def matvec(w: Tensor, x: Tensor) -> Tensor:
    if w.values.ndim != 2 or x.values.ndim != 1 or w.shape[1] != x.shape[0]:
        raise ShapeError(f"matvec: incompatible shapes {w.shape} and {x.shape}")
    out = Tensor(w.values @ x.values)

    def pull(g):
        _acc(w, np.outer(g, x.values))
        _acc(x, w.values.T @ g)

    return _record(out, (w, x), pull)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.values.ndim != 2 or b.values.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    out = Tensor(a.values @ b.values)

    def pull(g):
        _acc(a, g @ b.values.T)
        _acc(b, a.values.T @ g)

    return _record(out, (a, b), pull)


def add_rowvec(m: Tensor, v: Tensor) -> Tensor:
    """Add a length-M vector to every row of a (B, M) matrix."""
    if m.values.ndim != 2 or v.values.ndim != 1 or m.shape[1] != v.shape[0]:
        raise ShapeError(f"add_rowvec: incompatible shapes {m.shape} and {v.shape}")
    out = Tensor(m.values + v.values[None, :])

    def pull(g):
        _acc(m, g)
        _acc(v, g.sum(axis=0))

    return _record(out, (m, v), pull)


def _stable_sigmoid(v: np.ndarray) -> np.ndarray:
    out = np.empty_like(v)
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ev = np.exp(v[~pos])
    out[~pos] = ev / (1.0 + ev)
    return out


def sigmoid(a: Tensor) -> Tensor:
    s = _stable_sigmoid(a.values)
    out = Tensor(s)

    def pull(g):
        _acc(a, g * s * (1.0 - s))

    return _record(out, (a,), pull)


def tanh(a: Tensor) -> Tensor:
    t = np.tanh(a.values)
    out = Tensor(t)

    def pull(g):
        _acc(a, g * (1.0 - t * t))

    return _record(out, (a,), pull)


def relu(a: Tensor) -> Tensor:
    mask = a.values > 0  # subgradient 0 at the kink
    out = Tensor(np.where(mask, a.values, 0.0))

    def pull(g):
        _acc(a, g * mask)

    return _record(out, (a,), pull)


def concat(parts: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not parts:
        raise ShapeError("concat of zero tensors")
    ndim = parts[0].values.ndim
    if any(p.values.ndim != ndim for p in parts):
        raise ShapeError(f"concat: mixed ranks {[p.shape for p in parts]}")
    if axis >= ndim:
        raise ShapeError(f"concat: axis {axis} out of range for rank {ndim}")
    out = Tensor(np.concatenate([p.values for p in parts], axis=axis))
    sizes = [p.shape[axis] for p in parts]

    def pull(g):
        offset = 0
        for p, size in zip(parts, sizes):
            sl = [slice(None)] * ndim
            sl[axis] = slice(offset, offset + size)
            _acc(p, g[tuple(sl)])
            offset += size

    return _record(out, tuple(parts), pull)


def conv1d(x: Tensor, kernel: Tensor, stride: int = 1, bias: Tensor | None = None) -> Tensor:
    """Single-channel valid convolution along the last axis.

    x may be a vector (n,) or a batch of rows (B, n); output length is
    (n - w) // stride + 1. bias, when given, is a scalar added everywhere.
    """
    if kernel.values.ndim != 1:
        raise ShapeError(f"conv1d: kernel must be 1-D, got {kernel.shape}")
    if x.values.ndim not in (1, 2):
        raise ShapeError(f"conv1d: input must be 1-D or 2-D, got {x.shape}")
    if stride < 1:
        raise ContractError(f"conv1d: stride must be >= 1, got {stride}")
    n = x.shape[-1]
    w = kernel.shape[0]
    if w > n:
        raise ShapeError(f"conv1d: kernel width {w} exceeds input length {n}")
    if bias is not None and bias.values.ndim != 0:
        raise ShapeError(f"conv1d: bias must be a scalar, got {bias.shape}")
    windows = np.lib.stride_tricks.sliding_window_view(x.values, w, axis=-1)[..., ::stride, :]
    vals = windows @ kernel.values
    if bias is not None:
        vals = vals + bias.values
    out = Tensor(vals)
    out_len = vals.shape[-1]

    def pull(g):
        lead = list(range(g.ndim))
        _acc(kernel, np.tensordot(g, windows, axes=(lead, lead)))
        dx = np.zeros_like(x.values)
        for i in range(out_len):
            dx[..., i * stride : i * stride + w] += g[..., i, None] * kernel.values
        _acc(x, dx)
        if bias is not None:
            _acc(bias, np.asarray(g.sum()))

    inputs = (x, kernel) if bias is None else (x, kernel, bias)
    return _record(out, inputs, pull)


def gather(vec: Tensor, idx: np.ndarray) -> Tensor:
    """vec[idx] for a 1-D vec and an integer index array of any shape."""
    if vec.values.ndim != 1:
        raise ShapeError(f"gather: source must be 1-D, got {vec.shape}")
    idx = np.asarray(idx)
    if not np.issubdtype(idx.dtype, np.integer):
        raise ContractError(f"gather: indices must be integers, got {idx.dtype}")
    if idx.size and (idx.min() < 0 or idx.max() >= vec.shape[0]):
        raise ContractError(
            f"gather: index range [{idx.min()}, {idx.max()}] outside vector of length {vec.shape[0]}"
        )
    out = Tensor(vec.values[idx])

    def pull(g):
        d = np.zeros_like(vec.values)
        np.add.at(d, idx, g)
        _acc(vec, d)

    return _record(out, (vec,), pull)


def total(a: Tensor) -> Tensor:
    out = Tensor(a.values.sum())

    def pull(g):
        _acc(a, np.broadcast_to(g, a.shape).astype(np.float64))

    return _record(out, (a,), pull)


def mean(a: Tensor) -> Tensor:
    out = Tensor(a.values.mean())
    inv = 1.0 / a.values.size

    def pull(g):
        _acc(a, np.broadcast_to(g * inv, a.shape).astype(np.float64))

    return _record(out, (a,), pull)


# ---------------------------------------------------------- gradient checking


@dataclass
class GradCheckReport:
    max_rel_error: float
    worst_param: int
    worst_coord: int
    checked: int
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tol


def grad_check(
    f: Callable[[], Tensor],
    params: Sequence[Tensor],
    eps: float = 1e-5,
    tol: float = 1e-4,
    max_per_param: int | None = None,
    seed: int = 0,
) -> GradCheckReport:
    """Compare taped gradients of the scalar f() against central differences.

    Relative error per coordinate is |analytic - numeric| / max(1e-8,
    |analytic| + |numeric|). f is re-evaluated with no tape active for the
    perturbed evaluations, so the numeric route never touches the adjoints.
    """
    with Tape() as tape:
        loss = f()
    if loss.values.size != 1:
        raise ContractError(f"grad_check needs a scalar loss, got shape {loss.shape}")
    grads = tape.backward(loss, params=params)
    rng = np.random.default_rng(seed)

    def eval_loss() -> float:
        v = f().values
        if not np.isfinite(v).all():
            raise NumericError("non-finite loss during finite differencing")
        return float(v.reshape(()))

    worst = (0.0, -1, -1)
    checked = 0
    for pi, (p, g) in enumerate(zip(params, grads)):
        if not np.isfinite(g).all():
            raise NumericError(f"non-finite analytic gradient for parameter {pi}")
        size = p.values.size
        if max_per_param is not None and size > max_per_param:
            coords = rng.choice(size, size=max_per_param, replace=False)
        else:
            coords = range(size)
        for ci in coords:
            old = p.values.flat[ci]
            p.values.flat[ci] = old + eps
            fp = eval_loss()
            p.values.flat[ci] = old - eps
            fm = eval_loss()
            p.values.flat[ci] = old
            numeric = (fp - fm) / (2.0 * eps)
            analytic = float(g.flat[ci])
            rel = abs(analytic - numeric) / max(1e-8, abs(analytic) + abs(numeric))
            checked += 1
            if rel > worst[0]:
                worst = (rel, pi, int(ci))
    return GradCheckReport(
        max_rel_error=worst[0], worst_param=worst[1], worst_coord=worst[2],
        checked=checked, tol=tol,
    )
