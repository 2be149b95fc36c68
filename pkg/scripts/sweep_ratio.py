"""Macro-F1 of every problem variant as the intra-cluster degree ratio varies.

    python scripts/sweep_ratio.py --seed 0 --values 0.5,0.6,0.7,0.8,0.9
"""

import argparse

from clusterfate.experiment import ExperimentConfig, emit_report, sweep, sweep_value


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--values", default="0.5,0.6,0.7,0.8,0.9")
    ap.add_argument("--L", type=int, default=5)
    ap.add_argument("--out", default="results/ratio_sweep")
    a = ap.parse_args()
    values = [float(v) for v in a.values.split(",")]
    cfg = ExperimentConfig(seed=a.seed, chain_lengths=(a.L,))
    rr = sweep(cfg, "ratio", values)
    emit_report(rr, a.out)
    print("ratio  " + "  ".join(f"{v:>5}" for v in cfg.variants))
    for r in values:
        print(f"{r:<5}  " + "  ".join(f"{sweep_value(rr, r, v):.3f}" for v in cfg.variants))


if __name__ == "__main__":
    main()
