"""Macro-F1 and instance counts against historical-chain length.

All lengths reuse one prepared pipeline state, so only the chains and the
cross-validation are repeated.
"""

import argparse

from clusterfate.experiment import ExperimentConfig, emit_report, run_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--lengths", default="2,3,4,5,6,7,8,9")
    ap.add_argument("--out", default="results/chain_sweep")
    a = ap.parse_args()
    lengths = tuple(int(v) for v in a.lengths.split(","))
    cfg = ExperimentConfig(seed=a.seed, chain_lengths=lengths)
    rr = run_experiment(cfg)
    emit_report(rr, a.out)
    print("L   " + "  ".join(f"{v:>12}" for v in cfg.variants))
    for L in lengths:
        row = []
        for v in cfg.variants:
            c = rr.cell(v, chain_length=L)
            row.append(f"{c['macro_f1']:.3f} ({c['n_instances']:>5})")
        print(f"{L:<3} " + "  ".join(row))


if __name__ == "__main__":
    main()
