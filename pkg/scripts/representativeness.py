"""Label-entropy comparison of grid-sampled exemplars against uniform random picks.

Five imbalanced Gaussian classes (N=500), keep ratio 10%, 50 paired seeds;
the seed drives the dataset, the pipeline and the random baseline.  Writes
``tests/data/representativeness.json``.

    python3 scripts/representativeness.py [--seeds 50]
"""

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "tests"))

from adapsne.controller import PipelineConfig, run_adapsne  # noqa: E402
from adapsne.embedding import EmbedConfig  # noqa: E402
from adapsne.fwa import FwaConfig  # noqa: E402
from helpers import imbalanced_mixture, label_entropy  # noqa: E402

OUT = ROOT / "tests" / "data" / "representativeness.json"


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seeds", type=int, default=50)
    args = ap.parse_args()
    runs = []
    t0 = time.perf_counter()
    for seed in range(args.seeds):
        t = time.perf_counter()
        x, labels = imbalanced_mixture(seed)
        cfg = PipelineConfig(fwa=FwaConfig(seed=seed), embed=EmbedConfig(seed=seed), sampler_seed=seed, keep_ratio=0.1)
        res = run_adapsne(x, cfg)
        ours = label_entropy(labels[res.exemplars.indices], 5)
        rand = np.random.default_rng(seed).choice(len(labels), size=len(res.exemplars), replace=False)
        base = label_entropy(labels[rand], 5)
        runs.append({"seed": seed, "adapsne": ours, "random": base, "win": bool(ours >= base),
                     "termination": res.termination, "seconds": round(time.perf_counter() - t, 2)})
        print(f"seed {seed:2d}: ours {ours:.4f} random {base:.4f} {res.termination} {runs[-1]['seconds']}s", flush=True)
    wins = sum(r["win"] for r in runs)
    total = time.perf_counter() - t0
    doc = {"seeds": args.seeds, "wins": wins, "rate": wins / args.seeds, "seconds": round(total, 1), "runs": runs}
    OUT.write_text(json.dumps(doc, indent=2) + "\n")
    print(f"wins {wins}/{args.seeds} in {total:.0f}s; wrote {OUT}")


if __name__ == "__main__":
    main()
