"""Block-size metrics of every mechanism on the stable and burst traces.

    python3 scripts/mechanism_table.py [--runs 20] [--blocks B --txs T]

Without a dataset the synthetic traces are used.  Prints one row per
mechanism with 95% half-widths; set FEESIM_THREADS to run seeds in parallel.
"""

import argparse

from feesim.analytics import Dataset
from feesim.config import build_scenario, load_config
from feesim.simulator import run_experiment

MECHS = ("d00625", "d0125", "d025", "aimd")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--runs", type=int, default=20)
    ap.add_argument("--blocks")
    ap.add_argument("--txs")
    args = ap.parse_args()
    ds = Dataset.from_csv(args.blocks, args.txs) if args.blocks else None
    prefix = "" if ds is not None else "synthetic_"

    for window in ("stable", "burst"):
        print(f"\n{window} trace ({'replay' if ds is not None else 'synthetic'}, {args.runs} runs)")
        print(f"{'mechanism':<12}{'g_hat':<18}p_g>0.95")
        for mech in MECHS:
            cfg = load_config(f"{prefix}{window}_{mech}")
            rep = run_experiment(build_scenario(cfg, ds), args.runs)
            hw_g = rep.g_hat_hw or 0.0
            hw_p = rep.p_full_hw or 0.0
            g = f"{rep.g_hat:.3f} +/- {hw_g:.3f}"
            print(f"{rep.mechanism:<12}{g:<18}{rep.p_full:.3f} +/- {hw_p:.3f}")


if __name__ == "__main__":
    main()
