"""End-to-end run on the default synthetic network.

    python scripts/run_synthetic.py --seed 0 --out results/synthetic
"""

import argparse

from clusterfate.experiment import ExperimentConfig, emit_report, run_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--variant", action="append", choices=("SMD", "SL", "SM"))
    ap.add_argument("--L", type=int, action="append", help="chain length (repeatable, default 5)")
    ap.add_argument("--out", default="results/synthetic")
    a = ap.parse_args()
    cfg = ExperimentConfig(seed=a.seed, variants=tuple(a.variant or ("SM",)), chain_lengths=tuple(a.L or (5,)))
    rr = run_experiment(cfg)
    emit_report(rr, a.out)
    for c in rr.cells:
        f1 = " ".join(f"{k}={v['F1']:.3f}" for k, v in c["per_class"].items())
        print(f"{c['problem']:>4} L={c['chain_length']}  {f1}  macro_f1={c['macro_f1']:.3f}  n={c['n_instances']}")
    print("stage timings (s):", {k: round(v, 1) for k, v in rr.timings.items()})
    print("median delta by next state:", {k: v["median"] and round(v["median"], 3) for k, v in rr.delta.items()})


if __name__ == "__main__":
    main()
