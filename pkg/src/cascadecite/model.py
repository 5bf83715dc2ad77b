"""Degree-sequence regression model.

Per level: degrees scaled by a learned per-bin time decay, pre-embedded into
a fixed width M. A GRU consumes levels shallow-to-deep; each hidden state is
convolved (kernel 2, stride 2 by default) down to M/2, the per-level results
are concatenated, and an MLP head emits the predicted log2(G + 1). Training
minimizes mean squared error in that log space plus a Frobenius penalty on
the weight matrices (biases and the decay vector are not penalized).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import checkpoint as _ckpt
from .autodiff import (
    Tensor,
    add,
    add_rowvec,
    concat,
    const,
    conv1d,
    gather,
    matmul,
    mul,
    one_minus,
    relu,
    scale,
    sigmoid,
    sub,
    tanh,
    total,
)
from .encoding import DegreeSequence, EncodingSchema, schema_from_dict, schema_to_dict
from .errors import CheckpointError, ConfigError, ContractError, ShapeError


@dataclass(frozen=True)
class ModelConfig:
    level_lengths: tuple[int, ...]
    bin_count: int
    embed_width: int = 32
    pre_embed_depth: int = 2
    conv_kernel: int = 2
    conv_stride: int = 2
    head_widths: tuple[int, ...] = (32, 16)
    alpha: float = 1.0
    reg_weight: float = 1e-4

    def __post_init__(self):
        if len(self.level_lengths) < 1 or any(l < 1 for l in self.level_lengths):
            raise ConfigError(f"bad level lengths {self.level_lengths}")
        if self.bin_count < 1:
            raise ConfigError(f"bin_count must be >= 1, got {self.bin_count}")
        m = self.embed_width
        if m < 2 or m % 2:
            raise ConfigError(f"embed_width must be even and >= 2, got {m}")
        if self.pre_embed_depth < 1:
            raise ConfigError(f"pre_embed_depth must be >= 1, got {self.pre_embed_depth}")
        if self.conv_kernel < 1 or self.conv_kernel > m or self.conv_stride < 1:
            raise ConfigError(f"bad conv geometry kernel={self.conv_kernel} stride={self.conv_stride}")
        if self.conv_out != m // 2:
            raise ConfigError(
                f"conv output {self.conv_out} != embed_width/2 = {m // 2}; "
                "adjust kernel/stride so each level contributes exactly M/2 features"
            )
        if any(w < 1 for w in self.head_widths):
            raise ConfigError(f"bad head widths {self.head_widths}")
        if self.alpha <= 0 or self.reg_weight < 0:
            raise ConfigError(f"alpha must be > 0 and reg_weight >= 0, got {self.alpha}, {self.reg_weight}")

    @property
    def depth(self) -> int:
        return len(self.level_lengths)

    @property
    def conv_out(self) -> int:
        return (self.embed_width - self.conv_kernel) // self.conv_stride + 1

    @classmethod
    def from_schema(cls, schema: EncodingSchema, **overrides) -> "ModelConfig":
        return cls(
            level_lengths=schema.level_lengths, bin_count=schema.bin_count, **overrides
        )

    def to_dict(self) -> dict:
        doc = dataclasses.asdict(self)
        doc["level_lengths"] = list(self.level_lengths)
        doc["head_widths"] = list(self.head_widths)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "ModelConfig":
        doc = dict(doc)
        doc["level_lengths"] = tuple(doc["level_lengths"])
        doc["head_widths"] = tuple(doc["head_widths"])
        return cls(**doc)


_GRU_KEYS = ("wu", "wr", "wh", "uu", "ur", "uh", "bu", "br", "bh")


class ModelParams:
    """Named Tensor parameters for one ModelConfig."""

    def __init__(self, config: ModelConfig, tensors: dict[str, np.ndarray]):
        expected = expected_shapes(config)
        missing = sorted(set(expected) - set(tensors))
        extra = sorted(set(tensors) - set(expected))
        if missing or extra:
            raise ShapeError(f"parameter set mismatch: missing {missing}, unexpected {extra}")
        self.config = config
        self._by_name: dict[str, Tensor] = {}
        for name, shape in expected.items():
            arr = np.asarray(tensors[name], dtype=np.float64)
            if arr.shape != shape:
                raise ShapeError(f"parameter {name!r} has shape {arr.shape}, expected {shape}")
            self._by_name[name] = Tensor(arr, name=name)

        self.decay = self._by_name["decay"]
        self.pre_embed = [
            [
                (self._by_name[f"pre{k}_w{i}"], self._by_name[f"pre{k}_b{i}"])
                for i in range(config.pre_embed_depth)
            ]
            for k in range(config.depth)
        ]
        self.gru = {key: self._by_name[f"gru_{key}"] for key in _GRU_KEYS}
        self.conv_kernel = self._by_name["conv_kernel"]
        self.conv_bias = self._by_name["conv_bias"]
        n_head = len(config.head_widths) + 1
        self.head = [
            (self._by_name[f"head_w{i}"], self._by_name[f"head_b{i}"]) for i in range(n_head)
        ]

    def named(self) -> list[tuple[str, Tensor]]:
        return list(self._by_name.items())

    def tensors(self) -> list[Tensor]:
        return list(self._by_name.values())

    def weight_matrices(self) -> list[Tensor]:
        """Everything the Frobenius penalty covers: weights, not biases or decay."""
        out = []
        for layers in self.pre_embed:
            out.extend(w for w, _ in layers)
        out.extend(self.gru[k] for k in ("wu", "wr", "wh", "uu", "ur", "uh"))
        out.append(self.conv_kernel)
        out.extend(w for w, _ in self.head)
        return out

    def value_state(self) -> dict[str, np.ndarray]:
        return {name: t.values.copy() for name, t in self._by_name.items()}

    def load_value_state(self, state: dict[str, np.ndarray]) -> None:
        for name, t in self._by_name.items():
            arr = np.asarray(state[name], dtype=np.float64)
            if arr.shape != t.values.shape:
                raise ShapeError(f"state for {name!r} has shape {arr.shape}, expected {t.values.shape}")
            t.values = arr.copy()


def expected_shapes(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    m = cfg.embed_width
    shapes: dict[str, tuple[int, ...]] = {"decay": (cfg.bin_count + 1,)}
    for k, length in enumerate(cfg.level_lengths):
        fan_in = length
        for i in range(cfg.pre_embed_depth):
            shapes[f"pre{k}_w{i}"] = (fan_in, m)
            shapes[f"pre{k}_b{i}"] = (m,)
            fan_in = m
    for key in ("wu", "wr", "wh", "uu", "ur", "uh"):
        shapes[f"gru_{key}"] = (m, m)
    for key in ("bu", "br", "bh"):
        shapes[f"gru_{key}"] = (m,)
    shapes["conv_kernel"] = (cfg.conv_kernel,)
    shapes["conv_bias"] = ()
    widths = [cfg.depth * cfg.conv_out, *cfg.head_widths, 1]
    for i, (d_in, d_out) in enumerate(zip(widths, widths[1:])):
        shapes[f"head_w{i}"] = (d_in, d_out)
        shapes[f"head_b{i}"] = (d_out,)
    return shapes


def init_params(cfg: ModelConfig, seed: int) -> ModelParams:
    """Uniform +-sqrt(6/(fan_in+fan_out)) weights, zero biases, unit decay.

    decay[0] belongs to padding and starts (and provably stays) at 0: padded
    entries carry degree 0, so the gradient reaching decay[0] is identically
    zero and Adam never moves it.
    """
    rng = np.random.default_rng(seed)
    tensors: dict[str, np.ndarray] = {}
    for name, shape in expected_shapes(cfg).items():
        if name == "decay":
            d = np.ones(shape)
            d[0] = 0.0
            tensors[name] = d
        elif name == "conv_kernel":
            limit = np.sqrt(6.0 / (shape[0] + 1))
            tensors[name] = rng.uniform(-limit, limit, size=shape)
        elif len(shape) == 2:
            limit = np.sqrt(6.0 / (shape[0] + shape[1]))
            tensors[name] = rng.uniform(-limit, limit, size=shape)
        else:
            tensors[name] = np.zeros(shape)  # every bias starts at zero
    return ModelParams(cfg, tensors)


# ------------------------------------------------------------------ forward


def log_target(growth) -> np.ndarray:
    g = np.asarray(growth, dtype=np.float64)
    if g.size and g.min() < 0:
        raise ContractError(f"growth labels must be >= 0, got min {g.min()}")
    return np.log2(g + 1.0)


def growth_from_log(pred: float) -> float:
    return max(0.0, float(np.exp2(pred)) - 1.0)


def apply_time_decay(seq: DegreeSequence, decay: Tensor) -> list[Tensor]:
    """Per-level degree * decay[bin] vectors.

    Padding entries gather decay[0] and carry degree 0, so they contribute
    exactly nothing and pass no gradient to decay[0].
    """
    out = []
    for degs, bins in zip(seq.degree_rows(), seq.bin_rows()):
        if bins.size and (bins.min() < 0 or bins.max() >= decay.shape[0]):
            raise ContractError(
                f"bin index outside decay table of length {decay.shape[0]}"
            )
        out.append(mul(gather(decay, bins), const(degs)))
    return out


def _pre_embed(params: ModelParams, k: int, x: Tensor) -> Tensor:
    layers = params.pre_embed[k]
    for i, (w, b) in enumerate(layers):
        x = add_rowvec(matmul(x, w), b)
        if i < len(layers) - 1:
            x = relu(x)
    return x


def forward_batch(
    params: ModelParams,
    deg_rows: list[np.ndarray],
    bin_rows: list[np.ndarray],
    trace: dict | None = None,
) -> Tensor:
    """Predicted log2(G+1) for a batch of stacked encodings; shape (B, 1).

    deg_rows[k] and bin_rows[k] are (B, level_lengths[k]) arrays.
    """
    cfg = params.config
    if len(deg_rows) != cfg.depth or len(bin_rows) != cfg.depth:
        raise ShapeError(f"expected {cfg.depth} levels, got {len(deg_rows)}")
    b = deg_rows[0].shape[0]
    for k, (d, bins) in enumerate(zip(deg_rows, bin_rows)):
        want = (b, cfg.level_lengths[k])
        if d.shape != want or bins.shape != want:
            raise ShapeError(f"level {k + 1}: got {d.shape}, schema wants {want}")
    if trace is not None:
        trace.update({"decayed": [], "embed": [], "u": [], "r": [], "h": [], "conv": []})

    g = params.gru
    h = const(np.zeros((b, cfg.embed_width)))
    convs = []
    for k in range(cfg.depth):
        lam = gather(params.decay, bin_rows[k])
        x = mul(lam, const(deg_rows[k]))
        x = _pre_embed(params, k, x)
        u = sigmoid(add_rowvec(add(matmul(x, g["wu"]), matmul(h, g["uu"])), g["bu"]))
        r = sigmoid(add_rowvec(add(matmul(x, g["wr"]), matmul(h, g["ur"])), g["br"]))
        hc = tanh(add_rowvec(add(matmul(x, g["wh"]), matmul(mul(r, h), g["uh"])), g["bh"]))
        h = add(mul(u, hc), mul(one_minus(u), h))
        conv = relu(conv1d(h, params.conv_kernel, stride=cfg.conv_stride, bias=params.conv_bias))
        convs.append(conv)
        if trace is not None:
            trace["decayed"].append(lam.values * deg_rows[k])
            trace["embed"].append(x.values.copy())
            trace["u"].append(u.values.copy())
            trace["r"].append(r.values.copy())
            trace["h"].append(h.values.copy())
            trace["conv"].append(conv.values.copy())

    z = concat(convs, axis=1)
    if trace is not None:
        trace["concat"] = z.values.copy()
    for i, (w, bb) in enumerate(params.head):
        z = add_rowvec(matmul(z, w), bb)
        if i < len(params.head) - 1:
            z = relu(z)
    return z


def stack_sequences(seqs: list[DegreeSequence], cfg: ModelConfig) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Stack per-sample levels into per-level (N, L_k) matrices."""
    if not seqs:
        raise ContractError("no sequences to stack")
    for s in seqs:
        if len(s.levels) != cfg.depth:
            raise ShapeError(f"sequence has {len(s.levels)} levels, schema wants {cfg.depth}")
        for k, lvl in enumerate(s.levels):
            if len(lvl) != cfg.level_lengths[k]:
                raise ShapeError(
                    f"level {k + 1} holds {len(lvl)} entries, schema wants {cfg.level_lengths[k]}"
                )
    deg_rows, bin_rows = [], []
    for k in range(cfg.depth):
        deg_rows.append(np.array([[e.degree for e in s.levels[k]] for s in seqs], dtype=np.float64))
        bin_rows.append(np.array([[e.bin for e in s.levels[k]] for s in seqs], dtype=np.int64))
    return deg_rows, bin_rows


def forward(params: ModelParams, seq: DegreeSequence, trace: dict | None = None) -> Tensor:
    """Single-sample prediction, shape (1, 1)."""
    deg_rows, bin_rows = stack_sequences([seq], params.config)
    return forward_batch(params, deg_rows, bin_rows, trace=trace)


def loss(preds: Tensor, growths, params: ModelParams) -> Tensor:
    """alpha * mean squared log-space error + reg_weight * sum ||W||_F^2."""
    cfg = params.config
    targets = log_target(growths)[:, None]
    if preds.shape != targets.shape:
        raise ShapeError(f"predictions {preds.shape} do not match {targets.shape} targets")
    e = sub(preds, const(targets))
    data = scale(total(mul(e, e)), cfg.alpha / targets.shape[0])
    if cfg.reg_weight == 0.0:
        return data
    reg = None
    for w in params.weight_matrices():
        term = total(mul(w, w))
        reg = term if reg is None else add(reg, term)
    return add(data, scale(reg, cfg.reg_weight))


# -------------------------------------------------------------- checkpoints


def save_model(path: str | Path, params: ModelParams, schema: EncodingSchema) -> None:
    arrays = {name: t.values for name, t in params.named()}
    _ckpt.save_arrays(
        path,
        arrays,
        extra={
            "model_config": params.config.to_dict(),
            "schema": schema_to_dict(schema),
        },
    )


def load_model(path: str | Path) -> tuple[ModelParams, EncodingSchema]:
    import json

    doc = json.loads(Path(path).read_text())
    if "model_config" not in doc or "schema" not in doc:
        raise CheckpointError("checkpoint lacks model_config/schema sections")
    cfg = ModelConfig.from_dict(doc["model_config"])
    schema = schema_from_dict(doc["schema"])
    arrays = _ckpt.parse_arrays(doc, expected_shapes(cfg))
    return ModelParams(cfg, arrays), schema
