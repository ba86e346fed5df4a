"""Measure how often the controller reaches its entropy threshold.

Runs the full pipeline with default settings on the fixed 300-point 3-blob
set for seeds 0..19 (the seed drives bandwidth search, embedding and
sampling) and writes ``tests/data/controller_rate.json``.  The acceptance
suite re-measures and asserts the rate does not drop below the stored one.

    python3 scripts/controller_rate.py [--seeds 20]
"""

import argparse
import json
import sys
import time
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "tests"))

from adapsne.controller import PipelineConfig, run_adapsne  # noqa: E402
from adapsne.embedding import EmbedConfig  # noqa: E402
from adapsne.fwa import FwaConfig  # noqa: E402
from helpers import blobs  # noqa: E402

OUT = ROOT / "tests" / "data" / "controller_rate.json"
DATA_SEED = 0


def run_seed(x, seed):
    cfg = PipelineConfig(fwa=FwaConfig(seed=seed), embed=EmbedConfig(seed=seed), sampler_seed=seed)
    t = time.perf_counter()
    res = run_adapsne(x, cfg)
    return {
        "seed": seed,
        "termination": res.termination,
        "k": res.state.k,
        "pi_t": res.state.pis,
        "H": [e.entropy for e in res.state.history],
        "h_threshold": res.state.h_threshold,
        "seconds": round(time.perf_counter() - t, 2),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seeds", type=int, default=20)
    args = ap.parse_args()
    x, _ = blobs(DATA_SEED, n=300)
    runs = []
    for s in range(args.seeds):
        runs.append(run_seed(x, s))
        r = runs[-1]
        print(f"seed {s:2d}: {r['termination']:<16} k={r['k']:2d} H={r['H'][-1]:.4f} H0={r['h_threshold']:.4f} {r['seconds']}s")
    met = sum(r["termination"] == "threshold-met" for r in runs)
    doc = {"dataset": {"generator": "blobs", "seed": DATA_SEED, "n": 300},
           "seeds": args.seeds, "threshold_met": met, "rate": met / args.seeds, "runs": runs}
    OUT.write_text(json.dumps(doc, indent=2) + "\n")
    print(f"threshold met on {met}/{args.seeds}; wrote {OUT}")


if __name__ == "__main__":
    main()
