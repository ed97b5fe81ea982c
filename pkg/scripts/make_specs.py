"""Write the standard synthetic corpus specs (stationary, single drift, two drifts) as JSON."""
from __future__ import annotations

import argparse
from pathlib import Path

from trendshift.corpus import single_drift_spec, stationary_spec, two_drift_spec


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="specs")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, spec in {
        "stationary": stationary_spec(seed=args.seed),
        "single_drift": single_drift_spec(seed=args.seed),
        "two_drift": two_drift_spec(seed=args.seed),
    }.items():
        path = out / f"{name}_s{args.seed}.json"
        spec.dump(path)
        print(path)


if __name__ == "__main__":
    main()
