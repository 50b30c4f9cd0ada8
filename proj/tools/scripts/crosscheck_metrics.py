#!/usr/bin/env python3
"""Recompute final test metrics of a run directory from its predictions CSV.

Compares average, worst-group and adjusted average accuracy against
metrics.json and exits nonzero on any mismatch.
"""
import argparse
import csv
import json
import math
import pathlib
import sys
from collections import defaultdict


def recompute(pred_path, train_sizes):
    correct = defaultdict(int)
    total = defaultdict(int)
    n = hits = 0
    with open(pred_path, newline="") as f:
        for row in csv.DictReader(f):
            g = (int(row["group_class"]), int(row["group_spurious"]))
            ok = int(row["label"]) == int(row["prediction"])
            correct[g] += ok
            total[g] += 1
            hits += ok
            n += 1
    acc = {g: correct[g] / total[g] for g in total}
    weight = sum(train_sizes.get(g, 0) for g in acc)
    adjusted = sum(train_sizes.get(g, 0) * a for g, a in acc.items()) / weight
    return {"avg_acc": hits / n, "worst_group_acc": min(acc.values()), "adjusted_avg_acc": adjusted}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("run_dir", type=pathlib.Path)
    ap.add_argument("--split", default="test")
    ap.add_argument("--tol", type=float, default=1e-12)
    args = ap.parse_args()

    manifest = json.loads((args.run_dir / "manifest.json").read_text())
    sizes = {(g["class"], g["spurious"]): g["size"] for g in manifest["train_group_sizes"]}
    reported = json.loads((args.run_dir / "metrics.json").read_text())["final"][args.split]
    mine = recompute(args.run_dir / f"predictions_{args.split}.csv", sizes)

    bad = False
    for key, value in mine.items():
        ok = math.isclose(value, reported[key], rel_tol=0, abs_tol=args.tol)
        print(f"{key}: recomputed={value:.15g} reported={reported[key]:.15g} {'ok' if ok else 'MISMATCH'}")
        bad |= not ok
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main())
