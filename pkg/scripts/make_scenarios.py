"""Regenerate the bundled scenario configs in src/feesim/scenarios/.

Replay scenarios carry the on-chain block ranges; synthetic ones use the
built-in constant and burst price traces.  Run from the repository root.
"""

from pathlib import Path

import yaml

OUT = Path(__file__).resolve().parent.parent / "src" / "feesim" / "scenarios"

MECHANISMS = {
    "d00625": {"controller": "constant", "d": "0.0625"},
    "d0125": {"controller": "constant", "d": "0.125"},
    "d025": {"controller": "constant", "d": "0.25"},
    "aimd": {"controller": "aimd", "d": "0.0125"},
}

REPLAY_RANGES = {
    "stable": (13_026_000, 13_026_449),
    "burst": (13_025_550, 13_025_999),
    "full": (12_965_000, 13_079_999),
}

SYNTHETIC = {
    "stable": {"source": "synthetic", "shape": "constant", "slots": 450, "f_hat_gwei": 40},
    "burst": {"source": "synthetic", "shape": "burst", "slots": 450, "f_hat_gwei": 45,
              "peak_gwei": 200, "onset": 186, "hold": 40, "decay": 150, "lam_surge": 1.5},
}


def scenario(name, trace, mech, replay):
    doc = {
        "name": name,
        "demand": {"trace": trace, "lam": 10, "uniform_halfwidth_factor": 0.25,
                   "gas_multiplier": "auto", "arrival_load": 1.5},
        "mechanism": dict(mech, initial_base_fee_gwei="auto"),
        "run": {"warmup": 50, "runs": 20, "base_seed": 0},
        "io": {"blocks": None, "txs": None, "out_dir": f"out/{name}"},
    }
    if replay:
        doc["demand"]["legacy_fraction"] = "dataset"
    return doc


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    written = []
    for key, mech in MECHANISMS.items():
        for window, (lo, hi) in REPLAY_RANGES.items():
            trace = {"source": "replay", "from_height": lo, "to_height": hi, "smoothing_eta": 10}
            written.append((f"{window}_{key}", scenario(f"{window}_{key}", trace, mech, True)))
        for window, trace in SYNTHETIC.items():
            name = f"synthetic_{window}_{key}"
            written.append((name, scenario(name, dict(trace), mech, False)))
    for name, doc in written:
        (OUT / f"{name}.yaml").write_text(yaml.safe_dump(doc, sort_keys=False))
    print(f"wrote {len(written)} configs to {OUT}")


if __name__ == "__main__":
    main()
