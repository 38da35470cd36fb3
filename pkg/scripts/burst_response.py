"""How fast each mechanism's base fee catches up with a demand burst.

    python3 scripts/burst_response.py [--seeds 20] [--csv out.csv]

Uses the synthetic burst trace.  For each mechanism, reports the slots from
burst onset until the base fee is within 20% of the equilibrium base fee at
the peak, and the largest learning rate reached.
"""

import argparse
import csv

import numpy as np

from feesim.config import build_scenario, load_config
from feesim.demand import equilibrium_base_fee
from feesim.fee_mechanism import GWEI
from feesim.simulator import run_scenario, slots_to_reach

MECHS = ("d00625", "d0125", "d025", "aimd")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--csv", help="write the mean base fee per slot for each mechanism")
    args = ap.parse_args()

    columns = {}
    for mech in MECHS:
        sc = build_scenario(load_config(f"synthetic_burst_{mech}"))
        f = sc.trace.f_hat
        peak = int(np.argmax(f))
        onset = int(np.flatnonzero(f >= 0.5 * (f[sc.warmup] + f[peak]))[0])
        target = equilibrium_base_fee(f[peak], sc.demand, sc.schedule, sc.min_tip, sc.trace.lam[peak])
        runs = [run_scenario(sc, s) for s in range(args.seeds)]
        reach = [slots_to_reach(r.base_fee, target, onset) for r in runs]
        max_d = [float(max(r.d)) for r in runs]
        print(f"{sc.controller.label:<10} reach median {np.median(reach):5.1f} slots "
              f"(range {min(reach)}-{max(reach)})   max d {np.mean(max_d):.3f}   "
              f"target {target / GWEI:.3f} Gwei")
        columns[sc.controller.label] = np.mean([r.base_fee for r in runs], axis=0)

    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["slot", *columns])
            for t, row in enumerate(zip(*columns.values())):
                w.writerow([t, *(int(x) for x in row)])


if __name__ == "__main__":
    main()
