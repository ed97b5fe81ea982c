"""Compare adaptation strategies on the two-drift corpus over several seeds.

Runs ``compare-strategies`` per seed, then writes summary.csv with the median
post-shift recall and median adaptation time of each strategy.
"""
from __future__ import annotations

import argparse
import csv
import statistics
from collections import defaultdict
from pathlib import Path

from trendshift.cli import main as cli
from trendshift.corpus import two_drift_spec


def read_csv(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="runs/sweep")
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    recall, seconds = defaultdict(list), defaultdict(list)
    for seed in args.seeds:
        base = out / f"s{seed}"
        two_drift_spec(seed=seed).dump(f"{base}.spec.json")
        cli(["generate", f"{base}.spec.json", f"{base}.jsonl"])
        cli(["compare-strategies", f"{base}.jsonl", "--out", str(base), "--seed", str(seed), "--deterministic"])
        for row in read_csv(base / "strategies.csv"):
            if row["post_shift_recall"]:
                recall[row["strategy"]].append(float(row["post_shift_recall"]))
        for row in read_csv(base / "timings.csv"):
            seconds[row["strategy"]].append(float(row["adapt_seconds"]))
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["strategy", "seeds", "median_post_shift_recall", "median_adapt_seconds"])
        for name, vals in recall.items():
            t = seconds.get(name)
            w.writerow([name, len(vals), f"{statistics.median(vals):.4f}",
                        f"{statistics.median(t):.3f}" if t else ""])
    print((out / "summary.csv").read_text())


if __name__ == "__main__":
    main()
