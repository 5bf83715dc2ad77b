"""Mini-batch Adam training with early stopping, MSLE evaluation, prediction."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .autodiff import Tape
from .cascades import LabeledCascade, split_dataset
from .encoding import EncodedSample, EncodingSchema, encode, fits_schema, schema_from_corpus
from .errors import ConfigError, ContractError, EvaluationError, TrainingDivergedError
from .model import (
    ModelConfig,
    ModelParams,
    forward_batch,
    init_params,
    growth_from_log,
    log_target,
    loss as model_loss,
    stack_sequences,
)
from .optim import AdamState, adam_step
from .trees import to_tree

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 32
    max_epochs: int = 1000
    patience: int = 20
    step_size: float = 5e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1 or self.max_epochs < 1 or self.patience < 1:
            raise ConfigError(
                f"batch_size, max_epochs, patience must be >= 1, got "
                f"{self.batch_size}, {self.max_epochs}, {self.patience}"
            )
        if self.step_size <= 0:
            raise ConfigError(f"step_size must be > 0, got {self.step_size}")


@dataclass
class TrainReport:
    epochs_run: int
    best_epoch: int
    best_val_msle: float
    train_losses: list[float] = field(default_factory=list)
    val_msles: list[float] = field(default_factory=list)
    test_msle: float | None = None
    wall_time_sec: float = 0.0

    def to_dict(self) -> dict:
        return {
            "epochs_run": self.epochs_run,
            "best_epoch": self.best_epoch,
            "best_val_msle": self.best_val_msle,
            "test_msle": self.test_msle,
            "wall_time_sec": self.wall_time_sec,
        }


def _stacked(samples: Sequence[EncodedSample], cfg: ModelConfig):
    growths = []
    for s in samples:
        if s.growth is None:
            raise EvaluationError(f"sample {s.id!r} has no growth label")
        growths.append(s.growth)
    deg_rows, bin_rows = stack_sequences([s.seq for s in samples], cfg)
    return deg_rows, bin_rows, np.asarray(growths, dtype=np.int64)


def _predict_values(params: ModelParams, samples: Sequence[EncodedSample], chunk: int = 512) -> np.ndarray:
    preds = []
    for lo in range(0, len(samples), chunk):
        part = samples[lo : lo + chunk]
        deg_rows, bin_rows = stack_sequences([s.seq for s in part], params.config)
        preds.append(forward_batch(params, deg_rows, bin_rows).values[:, 0])
    return np.concatenate(preds)


def msle(pred_logs: np.ndarray, growths: np.ndarray) -> float:
    """Mean squared error between predictions and log2(G+1) targets."""
    pred_logs = np.asarray(pred_logs, dtype=np.float64)
    growths = np.asarray(growths)
    if pred_logs.shape != growths.shape:
        raise ContractError(f"{pred_logs.shape} predictions vs {growths.shape} labels")
    if pred_logs.size == 0:
        raise EvaluationError("nothing to evaluate")
    err = pred_logs - log_target(growths)
    return float(np.mean(err * err))


def evaluate(params: ModelParams, samples: Sequence[EncodedSample]) -> float:
    """MSLE of the model over labeled encoded samples."""
    if not samples:
        raise EvaluationError("nothing to evaluate")
    growths = np.asarray([s.growth for s in samples if s.growth is not None])
    if len(growths) != len(samples):
        raise EvaluationError("every sample must carry a growth label")
    return msle(_predict_values(params, samples), growths)


def train(
    train_samples: Sequence[EncodedSample],
    val_samples: Sequence[EncodedSample],
    tcfg: TrainConfig,
    mcfg: ModelConfig,
) -> tuple[ModelParams, TrainReport]:
    """Adam on shuffled mini-batches; keeps the best-validation parameters.

    Stops after `patience` consecutive epochs without a validation MSLE
    improvement, or at max_epochs. The final partial batch of each epoch is
    kept. Fully deterministic for a given seed and inputs.
    """
    if not train_samples or not val_samples:
        raise ConfigError("train and validation sets must both be non-empty")
    started = time.perf_counter()
    params = init_params(mcfg, tcfg.seed)
    tensors = params.tensors()
    state = AdamState(
        step_size=tcfg.step_size, beta1=tcfg.beta1, beta2=tcfg.beta2, eps=tcfg.adam_eps
    )
    deg_all, bin_all, growth_all = _stacked(train_samples, mcfg)
    rng = np.random.default_rng(tcfg.seed)

    best_state = params.value_state()
    best_val = float("inf")
    best_epoch = 0
    since_best = 0
    train_losses: list[float] = []
    val_msles: list[float] = []

    for epoch in range(1, tcfg.max_epochs + 1):
        order = rng.permutation(len(train_samples))
        batch_losses = []
        for lo in range(0, len(order), tcfg.batch_size):
            rows = order[lo : lo + tcfg.batch_size]
            deg_rows = [d[rows] for d in deg_all]
            bin_rows = [b[rows] for b in bin_all]
            with Tape() as tape:
                preds = forward_batch(params, deg_rows, bin_rows)
                batch_loss = model_loss(preds, growth_all[rows], params)
            value = batch_loss.item()
            if not np.isfinite(value):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch}",
                    details={
                        "epoch": epoch,
                        "batch_ids": [train_samples[i].id for i in rows],
                        "param_norms": {
                            name: float(np.abs(t.values).max()) for name, t in params.named()
                        },
                    },
                )
            grads = tape.backward(batch_loss, params=tensors)
            adam_step(tensors, grads, state)
            batch_losses.append(value)

        train_losses.append(float(np.mean(batch_losses)))
        val = evaluate(params, val_samples)
        val_msles.append(val)
        if val < best_val:
            best_val = val
            best_epoch = epoch
            best_state = params.value_state()
            since_best = 0
        else:
            since_best += 1
        log.info("epoch %d train_loss %.6f val_msle %.6f", epoch, train_losses[-1], val)
        if since_best >= tcfg.patience:
            break

    params.load_value_state(best_state)
    report = TrainReport(
        epochs_run=len(train_losses),
        best_epoch=best_epoch,
        best_val_msle=best_val,
        train_losses=train_losses,
        val_msles=val_msles,
        wall_time_sec=time.perf_counter() - started,
    )
    return params, report


# ---------------------------------------------------------------- prediction


def predict_rows(params: ModelParams, samples: Sequence[EncodedSample]) -> list[tuple[str, float, float]]:
    """(id, predicted log2(G+1), back-transformed growth clamped at 0) rows."""
    if not samples:
        return []
    values = _predict_values(params, samples)
    return [
        (s.id, float(v), growth_from_log(float(v))) for s, v in zip(samples, values)
    ]


def write_predictions(path: str | Path, rows: Sequence[tuple[str, float, float]]) -> None:
    with open(path, "w") as fh:
        fh.write("id,pred_log2,pred_growth\n")
        for pid, plog, pg in rows:
            fh.write(f"{pid},{plog!r},{pg!r}\n")


def read_predictions(path: str | Path) -> list[tuple[str, float, float]]:
    out = []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "id,pred_log2,pred_growth":
            raise EvaluationError(f"unexpected predictions header {header!r}")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            pid, plog, pg = line.split(",")
            out.append((pid, float(plog), float(pg)))
    return out


def msle_from_predictions(
    rows: Sequence[tuple[str, float, float]], samples: Sequence[EncodedSample]
) -> float:
    """Recompute MSLE from stored prediction rows against labeled samples."""
    by_id = {s.id: s.growth for s in samples}
    preds, growths = [], []
    for pid, plog, _ in rows:
        if pid not in by_id or by_id[pid] is None:
            raise EvaluationError(f"no labeled sample for prediction {pid!r}")
        preds.append(plog)
        growths.append(by_id[pid])
    return msle(np.asarray(preds), np.asarray(growths))


# --------------------------------------------------------------------- sweep


def encode_split(
    pairs: Sequence[LabeledCascade], bin_count: int, window_T: int, seed: int
) -> tuple[list[EncodedSample], list[EncodedSample], list[EncodedSample], EncodingSchema]:
    """Split, build the schema on train only, encode all three splits.

    Validation and test trees that overflow the train-built schema are
    truncated (lowest degrees dropped per level) rather than rejected.
    """
    tr, va, te = split_dataset(list(pairs), seed)
    tr_trees = [(to_tree(c), lb) for c, lb in tr]
    va_trees = [(to_tree(c), lb) for c, lb in va]
    te_trees = [(to_tree(c), lb) for c, lb in te]
    schema = schema_from_corpus([t for t, _ in tr_trees], bin_count, window_T)

    def enc(items, truncate):
        out = []
        clipped = 0
        for t, lb in items:
            if truncate and not fits_schema(t, schema):
                clipped += 1
            growth = None if lb is None else lb.growth
            out.append(EncodedSample(id=t.root, seq=encode(t, schema, truncate=truncate), growth=growth))
        return out, clipped

    train_enc, _ = enc(tr_trees, truncate=False)
    val_enc, cv = enc(va_trees, truncate=True)
    test_enc, ct = enc(te_trees, truncate=True)
    if cv or ct:
        log.warning("schema truncation applied to %d val and %d test trees", cv, ct)
    return train_enc, val_enc, test_enc, schema


@dataclass(frozen=True)
class SweepRow:
    bins: int
    test_msle: float


def sweep_time_interval(
    pairs: Sequence[LabeledCascade],
    bin_counts: Sequence[int],
    window_T: int,
    tcfg: TrainConfig,
    model_overrides: dict | None = None,
) -> list[SweepRow]:
    """Retrain end-to-end for each bin count L and report the test MSLE."""
    if len(bin_counts) < 2:
        raise ConfigError(f"sweep needs at least 2 bin counts, got {list(bin_counts)}")
    rows = []
    for bins in bin_counts:
        tr, va, te, schema = encode_split(pairs, bins, window_T, tcfg.seed)
        mcfg = ModelConfig.from_schema(schema, **(model_overrides or {}))
        params, _ = train(tr, va, tcfg, mcfg)
        rows.append(SweepRow(bins=bins, test_msle=evaluate(params, te)))
        log.info("sweep bins=%d test_msle=%.6f", bins, rows[-1].test_msle)
    return rows
