#!/usr/bin/env python3
"""Optional smoke run on the public HEP-PH citation files.

Expects cit-HepPh.txt (citing<TAB>cited edges) and cit-HepPh-dates.txt
(paper<TAB>ISO date) under --data-dir, or under $CASCADECITE_HEPPH_DIR, or
./data. This checks that the pipeline handles a real graph end to end; it
asserts only a downward loss trend and a finite test MSLE, no numeric
target.

    python3 scripts/run_hepph_smoke.py --data-dir data/ --out hepph_run
"""

import argparse
import json
import os
import sys
from pathlib import Path

from cascadecite.cli import main as cli


def run(argv):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--data-dir", default=os.environ.get("CASCADECITE_HEPPH_DIR", "data"))
    ap.add_argument("--out", default="hepph_run")
    ap.add_argument("--window-years", type=float, default=3.0)
    ap.add_argument("--horizon", default="365", help="'end' or a day count")
    ap.add_argument("--min-observed", type=int, default=10)
    ap.add_argument("--max-epochs", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    root = Path(args.data_dir)
    edges = root / "cit-HepPh.txt"
    dates = root / "cit-HepPh-dates.txt"
    if not (edges.exists() and dates.exists()):
        print(f"missing {edges} or {dates}; nothing to do", file=sys.stderr)
        return 2

    out = Path(args.out)
    seed = str(args.seed)
    steps = [
        ["ingest", "--edges", str(edges), "--dates", str(dates),
         "--out", str(out / "data"), "--window-years", str(args.window_years),
         "--horizon", args.horizon, "--min-observed", str(args.min_observed),
         "--seed", seed],
        ["encode", "--cascades", str(out / "data" / "cascades.jsonl"),
         "--out", str(out / "enc"), "--bins", "6", "--seed", seed],
        ["train", "--encoded-dir", str(out / "enc"), "--out", str(out / "run"),
         "--max-epochs", str(args.max_epochs), "--seed", seed],
    ]
    for step in steps:
        print(f"$ cascadecite {' '.join(step)}")
        code = cli(step)
        if code != 0:
            return code

    rows = (out / "run" / "metrics.csv").read_text().splitlines()[1:]
    losses = [float(r.split(",")[1]) for r in rows]
    k = max(1, len(losses) // 3)
    trending_down = sum(losses[-k:]) / k < sum(losses[:k]) / k
    report = json.loads((out / "run" / "report.json").read_text())
    test_msle = report.get("test_msle")

    print()
    print(f"epochs run    : {report['epochs_run']}")
    print(f"loss trend    : {'down' if trending_down else 'NOT down'} "
          f"({losses[0]:.4f} -> {losses[-1]:.4f})")
    print(f"test MSLE     : {test_msle}")
    ok = trending_down and test_msle is not None and test_msle == test_msle
    print("smoke result  :", "ok" if ok else "FAILED")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(run(sys.argv[1:]))
