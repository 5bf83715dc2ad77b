"""Command line entry point.

Subcommands: ingest, stats, encode, train, eval, predict, probe, sweep,
synth. Every command writes its artifacts plus a run manifest (resolved
config, input digests, output paths, timestamps) into --out. Failures exit
nonzero with a one-line JSON error on stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from . import cascades as casc
from . import encoding as enc
from .config import TOOL_VERSION, parse_horizon, resolve_config, utc_now, write_manifest
from .errors import CascadeCiteError, ConfigError, EvaluationError, SchemaMismatchError
from .model import ModelConfig, load_model, save_model
from .probe import FEATURE_NAMES, probe as run_probe, structural_features
from .training import (
    TrainConfig,
    encode_split,
    evaluate,
    predict_rows,
    sweep_time_interval,
    train,
    write_predictions,
)
from .trees import to_tree, tree_to_dict

log = logging.getLogger(__name__)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _train_config(cfg: dict) -> TrainConfig:
    return TrainConfig(
        batch_size=int(cfg["batch_size"]),
        max_epochs=int(cfg["max_epochs"]),
        patience=int(cfg["patience"]),
        step_size=float(cfg["step_size"]),
        seed=int(cfg["seed"]),
    )


def _model_overrides(cfg: dict) -> dict:
    return {
        "embed_width": int(cfg["embed_width"]),
        "pre_embed_depth": int(cfg["pre_embed_depth"]),
        "conv_kernel": int(cfg["conv_kernel"]),
        "conv_stride": int(cfg["conv_stride"]),
        "head_widths": tuple(int(w) for w in cfg["head_widths"]),
        "alpha": float(cfg["alpha"]),
        "reg_weight": float(cfg["beta"]),
    }


def _corpus_window(pairs) -> int:
    windows = {c.window_T for c, _ in pairs}
    if len(windows) != 1:
        raise ConfigError(f"cascades carry mixed windows {sorted(windows)}; re-ingest consistently")
    return windows.pop()


def _schema_diff(a: enc.EncodingSchema, b: enc.EncodingSchema) -> list[str]:
    da, db = enc.schema_to_dict(a), enc.schema_to_dict(b)
    return [f"{key}: {da[key]!r} != {db[key]!r}" for key in da if da[key] != db[key]]


def _load_eval_samples(args, ckpt_schema: enc.EncodingSchema) -> list[enc.EncodedSample]:
    """Samples for eval/predict: raw cascades re-encoded, or pre-encoded + schema."""
    if getattr(args, "cascades", None):
        pairs = casc.read_cascades_jsonl(args.cascades)
        if not pairs:
            raise EvaluationError(f"{args.cascades} holds no cascades")
        window = _corpus_window(pairs)
        if window != ckpt_schema.window_T:
            raise SchemaMismatchError(
                f"cascades use window {window} but checkpoint was trained on {ckpt_schema.window_T}",
                details={"expected_window": ckpt_schema.window_T, "got_window": window},
            )
        out = []
        for c, lb in pairs:
            tree = to_tree(c)
            growth = None if lb is None else lb.growth
            out.append(
                enc.EncodedSample(id=c.root, seq=enc.encode(tree, ckpt_schema, truncate=True), growth=growth)
            )
        return out
    if getattr(args, "encoded", None):
        if not getattr(args, "schema", None):
            raise ConfigError("--encoded requires --schema so the encoding can be verified")
        file_schema = enc.load_schema(args.schema)
        if file_schema != ckpt_schema:
            raise SchemaMismatchError(
                "encoded inputs use a different schema than the checkpoint",
                details={
                    "expected": enc.schema_to_dict(ckpt_schema),
                    "got": enc.schema_to_dict(file_schema),
                    "diff": _schema_diff(ckpt_schema, file_schema),
                },
            )
        return enc.read_encoded_jsonl(args.encoded)
    raise ConfigError("pass --cascades FILE, or --encoded FILE with --schema FILE")


# ------------------------------------------------------------------ commands


def _cmd_synth(args, cfg) -> list[Path]:
    out = _out_dir(args)
    pairs = casc.generate_synthetic(
        int(cfg["synth_n"]),
        (int(cfg["synth_size_min"]), int(cfg["synth_size_max"])),
        int(cfg["synth_horizon"]),
        float(cfg["attachment_bias"]),
        int(cfg["seed"]),
        window_T=int(cfg["window_days"]),
    )
    path = out / "cascades.jsonl"
    n = casc.write_cascades_jsonl(path, pairs)
    log.info("wrote %d synthetic cascades to %s", n, path)
    return [path]


def _cmd_ingest(args, cfg) -> list[Path]:
    out = _out_dir(args)
    tally: dict = {}
    events = casc.parse_citation_files(args.edges, args.dates, tally=tally)
    pairs = casc.build_cascades(
        events,
        window_T=int(cfg["window_days"]),
        horizon=parse_horizon(cfg["horizon"]),
        min_observed=int(cfg["min_observed"]),
        tally=tally,
    )
    path = out / "cascades.jsonl"
    casc.write_cascades_jsonl(path, pairs)
    report = out / "ingest_report.json"
    report.write_text(json.dumps(tally, indent=1))
    return [path, report]


def _cmd_stats(args, cfg) -> list[Path]:
    out = _out_dir(args)
    pairs = casc.read_cascades_jsonl(args.cascades)
    tr, va, te = casc.split_dataset(pairs, int(cfg["seed"]))
    doc = {}
    for name, chunk in (("train", tr), ("val", va), ("test", te)):
        if not chunk:
            doc[name] = None
            continue
        stats = casc.compute_stats([to_tree(c) for c, _ in chunk])
        doc[name] = dataclasses.asdict(stats)
    path = out / "stats.json"
    path.write_text(json.dumps(doc, indent=1))
    return [path]


def _cmd_encode(args, cfg) -> list[Path]:
    out = _out_dir(args)
    pairs = casc.read_cascades_jsonl(args.cascades)
    window = _corpus_window(pairs)
    tr, va, te, schema = encode_split(pairs, int(cfg["bins"]), window, int(cfg["seed"]))
    outputs = [out / "schema.json"]
    enc.save_schema(outputs[0], schema)
    for name, samples in (("train", tr), ("val", va), ("test", te)):
        path = out / f"{name}.encoded.jsonl"
        enc.write_encoded_jsonl(path, samples)
        outputs.append(path)
    if args.dump_trees:
        path = out / "trees.jsonl"
        with open(path, "w") as fh:
            for c, lb in pairs:
                fh.write(json.dumps(tree_to_dict(to_tree(c), lb), separators=(",", ":")))
                fh.write("\n")
        outputs.append(path)
    return outputs


def _cmd_train(args, cfg) -> list[Path]:
    out = _out_dir(args)
    d = Path(args.encoded_dir)
    schema = enc.load_schema(d / "schema.json")
    tr = enc.read_encoded_jsonl(d / "train.encoded.jsonl")
    va = enc.read_encoded_jsonl(d / "val.encoded.jsonl")
    mcfg = ModelConfig.from_schema(schema, **_model_overrides(cfg))
    params, report = train(tr, va, _train_config(cfg), mcfg)

    test_path = d / "test.encoded.jsonl"
    if test_path.exists():
        te = enc.read_encoded_jsonl(test_path)
        if te:
            report.test_msle = evaluate(params, te)

    ckpt = out / "checkpoint.json"
    save_model(ckpt, params, schema)
    metrics = out / "metrics.csv"
    with open(metrics, "w") as fh:
        fh.write("epoch,train_loss,val_msle\n")
        for i, (tl, vm) in enumerate(zip(report.train_losses, report.val_msles), 1):
            fh.write(f"{i},{tl!r},{vm!r}\n")
    report_path = out / "report.json"
    report_path.write_text(json.dumps(report.to_dict(), indent=1))
    return [ckpt, metrics, report_path]


def _cmd_eval(args, cfg) -> list[Path]:
    out = _out_dir(args)
    params, schema = load_model(args.checkpoint)
    samples = _load_eval_samples(args, schema)
    value = evaluate(params, samples)
    path = out / "eval.json"
    path.write_text(json.dumps({"msle": value, "count": len(samples)}, indent=1))
    return [path]


def _cmd_predict(args, cfg) -> list[Path]:
    out = _out_dir(args)
    params, schema = load_model(args.checkpoint)
    samples = _load_eval_samples(args, schema)
    rows = predict_rows(params, samples)
    path = out / "predictions.csv"
    write_predictions(path, rows)
    return [path]


def _cmd_probe(args, cfg) -> list[Path]:
    out = _out_dir(args)
    pairs = casc.read_cascades_jsonl(args.cascades)
    trees = [to_tree(c) for c, _ in pairs]
    usable = [t for t in trees if t.size >= 2]
    if len(usable) < len(trees):
        log.warning("skipping %d root-only cascades", len(trees) - len(usable))

    decay = None
    if args.decayed:
        if not args.checkpoint:
            raise ConfigError("--decayed needs --checkpoint to supply the trained decay")
        params, schema = load_model(args.checkpoint)
        decay = params.decay.values
    elif args.checkpoint:
        _, schema = load_model(args.checkpoint)
    else:
        window = _corpus_window(pairs)
        schema = enc.schema_from_corpus(usable, int(cfg["bins"]), window)

    feats = [structural_features(t) for t in usable]
    seqs = [enc.encode(t, schema, truncate=True) for t in usable]
    report = run_probe(seqs, feats, seed=int(cfg["seed"]), decay=decay)

    csv_path = out / "probe.csv"
    with open(csv_path, "w") as fh:
        fh.write(",".join(FEATURE_NAMES) + "\n")
        fh.write(",".join(repr(report.mse[name]) for name in FEATURE_NAMES) + "\n")
    json_path = out / "probe.json"
    json_path.write_text(json.dumps(report.to_dict(), indent=1))
    return [csv_path, json_path]


def _cmd_sweep(args, cfg) -> list[Path]:
    out = _out_dir(args)
    pairs = casc.read_cascades_jsonl(args.cascades)
    window = _corpus_window(pairs)
    bin_counts = [int(x) for x in str(args.bins_list).split(",") if x.strip()]
    rows = sweep_time_interval(
        pairs, bin_counts, window, _train_config(cfg), model_overrides=_model_overrides(cfg)
    )
    path = out / "sweep.csv"
    with open(path, "w") as fh:
        fh.write("bins,test_msle\n")
        for row in rows:
            fh.write(f"{row.bins},{row.test_msle!r}\n")
    return [path]


_HANDLERS = {
    "synth": _cmd_synth,
    "ingest": _cmd_ingest,
    "stats": _cmd_stats,
    "encode": _cmd_encode,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "predict": _cmd_predict,
    "probe": _cmd_probe,
    "sweep": _cmd_sweep,
}

_OVERRIDE_KEYS = (
    "window_years", "window_days", "horizon", "bins", "min_observed", "seed",
    "batch_size", "max_epochs", "patience", "step_size", "alpha", "beta",
    "embed_width", "synth_n", "synth_size_min", "synth_size_max",
    "synth_horizon", "attachment_bias",
)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="JSON config file")
    common.add_argument("--window-years", type=float, default=None, dest="window_years")
    common.add_argument("--window-days", type=int, default=None, dest="window_days")
    common.add_argument("--horizon", default=None, help="'end' or a day count")
    common.add_argument("--bins", type=int, default=None, help="time bin count L")
    common.add_argument("--min-observed", type=int, default=None, dest="min_observed")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--verbose", action="store_true")

    fit = argparse.ArgumentParser(add_help=False)
    fit.add_argument("--batch-size", type=int, default=None, dest="batch_size")
    fit.add_argument("--max-epochs", type=int, default=None, dest="max_epochs")
    fit.add_argument("--patience", type=int, default=None)
    fit.add_argument("--step-size", type=float, default=None, dest="step_size")
    fit.add_argument("--alpha", type=float, default=None)
    fit.add_argument("--beta", type=float, default=None)
    fit.add_argument("--embed-width", type=int, default=None, dest="embed_width")

    p = argparse.ArgumentParser(
        prog="cascadecite",
        description="Citation cascade growth prediction from degree-sequence encodings.",
    )
    p.add_argument("--version", action="version", version=f"cascadecite {TOOL_VERSION}")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("synth", parents=[common], help="generate a synthetic labeled corpus")
    sp.add_argument("--out", required=True)
    sp.add_argument("--n", type=int, default=None, dest="synth_n")
    sp.add_argument("--size-min", type=int, default=None, dest="synth_size_min")
    sp.add_argument("--size-max", type=int, default=None, dest="synth_size_max")
    sp.add_argument("--synth-horizon", type=int, default=None, dest="synth_horizon")
    sp.add_argument("--bias", type=float, default=None, dest="attachment_bias")

    sp = sub.add_parser("ingest", parents=[common], help="edges+dates TSV -> labeled cascades")
    sp.add_argument("--edges", required=True)
    sp.add_argument("--dates", required=True)
    sp.add_argument("--out", required=True)

    sp = sub.add_parser("stats", parents=[common], help="per-split corpus statistics")
    sp.add_argument("--cascades", required=True)
    sp.add_argument("--out", required=True)

    sp = sub.add_parser("encode", parents=[common], help="split, build schema, encode")
    sp.add_argument("--cascades", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--dump-trees", action="store_true", dest="dump_trees")

    sp = sub.add_parser("train", parents=[common, fit], help="train on an encoded dataset")
    sp.add_argument("--encoded-dir", required=True, dest="encoded_dir")
    sp.add_argument("--out", required=True)

    for name in ("eval", "predict"):
        sp = sub.add_parser(name, parents=[common], help=f"{name} with a trained checkpoint")
        sp.add_argument("--checkpoint", required=True)
        sp.add_argument("--cascades", default=None)
        sp.add_argument("--encoded", default=None)
        sp.add_argument("--schema", default=None)
        sp.add_argument("--out", required=True)

    sp = sub.add_parser("probe", parents=[common], help="structural readout from encodings")
    sp.add_argument("--cascades", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--checkpoint", default=None)
    sp.add_argument("--decayed", action="store_true")

    sp = sub.add_parser("sweep", parents=[common, fit], help="retrain across bin counts")
    sp.add_argument("--cascades", required=True)
    sp.add_argument("--bins-list", required=True, dest="bins_list")
    sp.add_argument("--out", required=True)

    return p


def _collect_overrides(args) -> dict:
    return {key: getattr(args, key, None) for key in _OVERRIDE_KEYS}


def _error_json(exc: Exception) -> str:
    details = getattr(exc, "details", {}) or {}
    return json.dumps({"error": type(exc).__name__, "message": str(exc), "details": details})


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    started = utc_now()
    try:
        cfg = resolve_config(args.config, _collect_overrides(args))
        outputs = _HANDLERS[args.command](args, cfg)
        inputs = [
            p for p in (
                getattr(args, "edges", None), getattr(args, "dates", None),
                getattr(args, "cascades", None), getattr(args, "checkpoint", None),
                getattr(args, "encoded", None), getattr(args, "schema", None),
                args.config,
            ) if p
        ]
        if getattr(args, "encoded_dir", None):
            d = Path(args.encoded_dir)
            inputs.extend(
                str(p) for p in (d / "schema.json", d / "train.encoded.jsonl", d / "val.encoded.jsonl")
            )
        write_manifest(Path(args.out), args.command, cfg, inputs, outputs, started)
    except (CascadeCiteError, OSError) as exc:
        print(_error_json(exc), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
