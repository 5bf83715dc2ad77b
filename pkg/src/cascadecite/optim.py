"""Adam with bias correction, operating in place on Tensor parameters."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .autodiff import Tensor
from .errors import NumericError, ShapeError


@dataclass
class AdamState:
    step_size: float = 5e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)


def adam_step(params: Sequence[Tensor], grads: Sequence[np.ndarray], state: AdamState) -> AdamState:
    """One Adam update. Moment buffers are allocated on first use."""
    if len(params) != len(grads):
        raise ShapeError(f"adam_step: {len(params)} params but {len(grads)} grads")
    if not state.m:
        state.m = [np.zeros_like(p.values) for p in params]
        state.v = [np.zeros_like(p.values) for p in params]
    if len(state.m) != len(params):
        raise ShapeError(f"adam_step: state holds {len(state.m)} moments for {len(params)} params")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1**state.t
    bc2 = 1.0 - b2**state.t
    for i, (p, g) in enumerate(zip(params, grads)):
        g = np.asarray(g, dtype=np.float64)
        if g.shape != p.values.shape:
            raise ShapeError(f"adam_step: grad {i} has shape {g.shape}, param has {p.values.shape}")
        if not np.isfinite(g).all():
            name = p.name or f"param[{i}]"
            raise NumericError(
                f"non-finite gradient for {name}",
                details={"param": name, "step": state.t, "grad_norm": float(np.abs(g).max())},
            )
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g
        mhat = state.m[i] / bc1
        vhat = state.v[i] / bc2
        p.values -= state.step_size * mhat / (np.sqrt(vhat) + state.eps)
    return state
