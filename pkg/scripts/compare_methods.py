"""Co-label accuracy and validation accuracy of TCL, TCLS and the majority-vote
baselines over several seeds, for one simulation config.

    python scripts/compare_methods.py configs/blobs_ind.json --seeds 5
    python scripts/compare_methods.py configs/blobs_cor2.json --seeds 5 --out runs/cor2.csv
"""

import argparse
import csv
import logging

import numpy as np

from colabel.aggregator import hard_majority_vote
from colabel.config import load_config
from colabel.synthetic import simulate
from colabel.trainer import TrainConfig, evaluate, run_baseline_mv, run_tcl, run_tcls

log = logging.getLogger("compare_methods")


def run_seed(sim, train: TrainConfig, seed: int) -> list[dict]:
    d = simulate(sim, seed)
    U, D, V = d.untrusted, d.trusted, d.validation
    C = sim.n_classes
    train = TrainConfig.from_dict({**train.to_dict(), "seed": seed, "n_classes": C})

    def val(net):
        return evaluate(net, V.features, V.truth)["accuracy"]

    mv = float(np.mean(hard_majority_vote(U.annotations, C) == U.truth))
    rows = [
        {"method": "majority vote", "colabel_acc": mv, "val_acc": float("nan")},
        {"method": "DL-MV", "colabel_acc": mv, "val_acc": val(run_baseline_mv(U, D, train, finetune=False))},
        {"method": "DL-MV+F", "colabel_acc": mv, "val_acc": val(run_baseline_mv(U, D, train, finetune=True))},
    ]
    res = run_tcl(U, D, train, V)
    rows.append({"method": "TCL", "colabel_acc": res.history.records[-1].colabel_acc, "val_acc": val(res.classifier)})
    if U.is_complete() and D.annotations is not None:
        res = run_tcls(U, D, train, V)
        rows.append({"method": "TCLS", "colabel_acc": res.history.records[-1].colabel_acc, "val_acc": val(res.classifier)})
    for r in rows:
        r["seed"] = seed
    return rows


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("config", help="experiment config with a simulation block")
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--out", help="CSV with one row per (seed, method)")
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    cfg = load_config(args.config)
    if cfg.simulation is None:
        p.error("config needs a simulation block")
    rows = [r for s in range(args.seeds) for r in run_seed(cfg.simulation, cfg.train, cfg.seed + s)]
    for method in dict.fromkeys(r["method"] for r in rows):
        sel = [r for r in rows if r["method"] == method]
        log.info("%-14s co-label acc %.4f  val acc %.4f", method,
                 np.mean([r["colabel_acc"] for r in sel]), np.mean([r["val_acc"] for r in sel]))
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=["seed", "method", "colabel_acc", "val_acc"], lineterminator="\n")
            w.writeheader()
            w.writerows(rows)


if __name__ == "__main__":
    main()
