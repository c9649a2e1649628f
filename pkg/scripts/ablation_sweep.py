"""Repeat the config's ablation sweep over several seeds through the CLI and
average the per-cell results.

    python scripts/ablation_sweep.py configs/ablation_blobs.json --seeds 3 --out runs/ablation
"""

import argparse
import csv
import logging
from collections import defaultdict
from pathlib import Path

import numpy as np

from colabel.cli import main as cli_main

log = logging.getLogger("ablation_sweep")


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("config")
    p.add_argument("--seeds", type=int, default=3)
    p.add_argument("--out", default="runs/ablation")
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    out = Path(args.out)
    cells = defaultdict(list)
    for seed in range(args.seeds):
        seed_dir = out / f"seed{seed}"
        if cli_main(["ablate", "--config", args.config, "--seed", str(seed), "--out", str(seed_dir)]) != 0:
            raise SystemExit(f"ablation failed for seed {seed}")
        with open(seed_dir / "ablation_report.csv") as fh:
            for row in csv.DictReader(fh):
                cells[(row["axis"], row["value"])].append(row)

    with open(out / "ablation_mean.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["axis", "value", "seeds", "colabel_acc", "val_acc", "pre_retrain_val_acc"])
        for (axis, value), rows in cells.items():
            means = [np.nanmean([float(r[c]) if r[c] else np.nan for r in rows])
                     for c in ("colabel_acc", "val_acc", "pre_retrain_val_acc")]
            w.writerow([axis, value, len(rows)] + [repr(float(m)) for m in means])
            log.info("%-14s %-10s co-label %.4f  val %.4f", axis, value, means[0], means[1])


if __name__ == "__main__":
    main()
