#!/usr/bin/env python3
"""End-to-end demo on a synthetic corpus.

Generates labeled cascades, encodes them, trains, evaluates, predicts, and
probes, leaving every artifact under one output directory. Mirrors exactly
what the CLI does; useful as a smoke run and as copy-paste material.

    python3 scripts/run_synthetic_pipeline.py [--out OUT] [--n 200] [--seed 0]
"""

import argparse
import json
import sys
from pathlib import Path

from cascadecite.cli import main as cli


def run(argv):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="demo_run", help="output root directory")
    ap.add_argument("--n", type=int, default=200, help="number of cascades")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--bins", type=int, default=6)
    ap.add_argument("--max-epochs", type=int, default=200)
    args = ap.parse_args(argv)

    out = Path(args.out)
    seed = str(args.seed)
    steps = [
        ["synth", "--out", str(out / "data"), "--n", str(args.n),
         "--size-min", "6", "--size-max", "18", "--synth-horizon", "80",
         "--window-days", "40", "--seed", seed],
        ["stats", "--cascades", str(out / "data" / "cascades.jsonl"),
         "--out", str(out / "stats"), "--seed", seed],
        ["encode", "--cascades", str(out / "data" / "cascades.jsonl"),
         "--out", str(out / "enc"), "--bins", str(args.bins), "--seed", seed],
        ["train", "--encoded-dir", str(out / "enc"), "--out", str(out / "run"),
         "--max-epochs", str(args.max_epochs), "--seed", seed],
        ["eval", "--checkpoint", str(out / "run" / "checkpoint.json"),
         "--encoded", str(out / "enc" / "test.encoded.jsonl"),
         "--schema", str(out / "enc" / "schema.json"), "--out", str(out / "eval")],
        ["predict", "--checkpoint", str(out / "run" / "checkpoint.json"),
         "--cascades", str(out / "data" / "cascades.jsonl"),
         "--out", str(out / "pred")],
        ["probe", "--cascades", str(out / "data" / "cascades.jsonl"),
         "--out", str(out / "probe"), "--bins", str(args.bins), "--seed", seed],
    ]
    for step in steps:
        print(f"$ cascadecite {' '.join(step)}")
        code = cli(step)
        if code != 0:
            return code

    report = json.loads((out / "run" / "report.json").read_text())
    ev = json.loads((out / "eval" / "eval.json").read_text())
    probe = json.loads((out / "probe" / "probe.json").read_text())
    print()
    print(f"epochs run        : {report['epochs_run']} (best {report['best_epoch']})")
    print(f"validation MSLE   : {report['best_val_msle']:.4f}")
    print(f"test MSLE         : {ev['msle']:.4f} over {ev['count']} cascades")
    print(f"probe MSE (edges) : {probe['mse']['edges']:.5f}")
    print(f"artifacts under   : {out}/")
    return 0


if __name__ == "__main__":
    sys.exit(run(sys.argv[1:]))
