"""Command line entry point: ``feesim analyze | simulate | compare``.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 internal error (including a failed simulation slot).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import logging
import sys
from pathlib import Path

import numpy as np
import yaml

from . import __version__, analytics
from .analytics import DataError, Dataset
from .config import ConfigError, ScenarioConfig, build_scenario, bundled_configs, load_config
from .fee_mechanism import GWEI, FeeMarketError
from .simulator import SimulationError, run_experiment

log = logging.getLogger("feesim")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3

PRICE_ETA = 10
SIZE_ETA = 30


class UsageError(Exception):
    pass


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_series(path: Path, index, values, integer: bool = False) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["index", "value"])
        for i, v in zip(index, values):
            w.writerow([int(i), int(round(v)) if integer else repr(float(v))])


def write_yaml(path: Path, data) -> None:
    path.write_text(yaml.safe_dump(data, sort_keys=True, default_flow_style=False))


def _inputs(paths) -> dict:
    return {str(p): _sha256(p) for p in paths if p is not None}


def _load_dataset(blocks, txs):
    if not blocks or not txs:
        raise UsageError("both --blocks and --txs are required")
    return Dataset.from_csv(blocks, txs)


def cmd_analyze(args) -> int:
    ds = _load_dataset(args.blocks, args.txs)
    ds = ds.window(args.from_height, args.to_height)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    f_hat = ds.avg_gas_prices()
    tau = ds.eip_fractions()
    g = ds.relative_sizes()
    batches = min(args.batches, len(ds))
    f_star = analytics.batch_averages(f_hat, batches)
    tau_star = analytics.batch_averages(tau, batches)

    write_series(out / "block_avg_gas_price.csv", f_hat.index, f_hat.values)
    sm = analytics.median_filter(f_hat, PRICE_ETA)
    write_series(out / "block_avg_gas_price_smoothed.csv", sm.index, sm.values)
    write_series(out / "batch_avg_gas_price.csv", f_star.index, f_star.values)
    sm = analytics.median_filter(f_star, PRICE_ETA)
    write_series(out / "batch_avg_gas_price_smoothed.csv", sm.index, sm.values)
    write_series(out / "eip1559_fraction.csv", tau.index, tau.values)
    write_series(out / "batch_eip1559_fraction.csv", tau_star.index, tau_star.values)
    sm = analytics.median_filter(tau_star, PRICE_ETA)
    write_series(out / "batch_eip1559_fraction_smoothed.csv", sm.index, sm.values)
    write_series(out / "relative_size.csv", g.index, g.values)
    sm = analytics.median_filter(g, SIZE_ETA)
    write_series(out / "relative_size_smoothed.csv", sm.index, sm.values)
    write_series(out / "base_fee.csv", ds.height, ds.base_fee, integer=True)

    g_hat, p_full = analytics.block_size_metrics(g)
    report = {
        "from_height": ds.first_height,
        "to_height": ds.last_height,
        "blocks": len(ds),
        "transactions": int(ds.tx_id.size),
        "batches": batches,
        "g_hat": g_hat,
        "p_g_gt_095": p_full,
    }
    write_yaml(out / "report.yaml", report)
    write_yaml(out / "manifest.yaml", {
        "command": "analyze",
        "version": __version__,
        "inputs": _inputs([args.blocks, args.txs]),
        "options": {"from_height": args.from_height, "to_height": args.to_height,
                    "batches": args.batches},
    })
    if not args.quiet:
        print(f"blocks {ds.first_height}-{ds.last_height} ({len(ds)} blocks)")
        print(f"g_hat = {g_hat:.3f}   p_g>0.95 = {p_full:.3f}")
    return EXIT_OK


def _scenario_from_config(cfg: ScenarioConfig, args):
    if getattr(args, "seed", None) is not None:
        cfg.run.base_seed = args.seed
    if getattr(args, "runs", None) is not None:
        cfg.run.runs = args.runs
    blocks = getattr(args, "blocks", None) or cfg.io.blocks
    txs = getattr(args, "txs", None) or cfg.io.txs
    dataset = None
    if cfg.demand.trace.source == "replay":
        dataset = _load_dataset(blocks, txs)
    return build_scenario(cfg, dataset), [blocks, txs] if dataset is not None else []


def _fmt_hw(x):
    return "n/a" if x is None else f"{x:.3f}"


def _simulate_one(cfg, args, out: Path):
    sc, inputs = _scenario_from_config(cfg, args)
    rep = run_experiment(sc, cfg.run.runs)
    out.mkdir(parents=True, exist_ok=True)
    idx = np.arange(sc.start_height, sc.start_height + sc.slots)
    ms = rep.mean_series
    write_series(out / "series_f_hat.csv", idx, ms["f_hat"], integer=True)
    write_series(out / "series_base_fee.csv", idx, ms["base_fee"], integer=True)
    write_series(out / "series_g.csv", idx, ms["g"])
    write_series(out / "series_d.csv", idx, ms["d"])
    write_series(out / "series_miner_revenue.csv", idx, ms["miner_revenue"], integer=True)
    write_series(out / "series_burned.csv", idx, ms["burned"], integer=True)
    summary = rep.summary()
    summary["g_hat_samples"] = [float(x) for x in rep.g_hat_samples]
    summary["p_g_gt_095_samples"] = [float(x) for x in rep.p_full_samples]
    summary["warmup_slots"] = sc.warmup
    summary["measured_slots"] = sc.slots - sc.warmup
    summary["initial_base_fee_wei"] = sc.initial_base_fee
    summary["gas_multiplier"] = float(sc.demand.gas_multiplier)
    write_yaml(out / "report.yaml", summary)
    write_yaml(out / "manifest.yaml", {
        "command": "simulate",
        "version": __version__,
        "config": cfg.to_dict(),
        "seeds": list(rep.seeds),
        "inputs": _inputs(inputs),
    })
    return sc, rep


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    out = Path(args.out_dir or cfg.io.out_dir)
    sc, rep = _simulate_one(cfg, args, out)
    if not args.quiet:
        print(f"{sc.name}: {rep.mechanism}, {len(rep.seeds)} runs, {sc.slots - sc.warmup} measured slots")
        print(f"  g_hat    = {rep.g_hat:.3f} +/- {_fmt_hw(rep.g_hat_hw)}")
        print(f"  p_g>0.95 = {rep.p_full:.3f} +/- {_fmt_hw(rep.p_full_hw)}")
        mb = rep.mean_series["base_fee"][sc.warmup:]
        print(f"  base fee (mean over runs) {mb.min() / GWEI:.3f} .. {mb.max() / GWEI:.3f} Gwei")
        print(f"  wrote {out}")
    return EXIT_OK


def cmd_compare(args) -> int:
    if len(args.configs) < 2:
        raise UsageError("compare needs at least two configs")
    cfgs = [load_config(c) for c in args.configs]
    scenarios = [_scenario_from_config(cfg, args)[0] for cfg in cfgs]
    if any(not scenarios[0].trace.same_as(sc.trace) for sc in scenarios[1:]):
        raise ConfigError("demand.trace", "configs do not share the same demand trace")
    rows = [(cfg.name, run_experiment(sc, cfg.run.runs)) for cfg, sc in zip(cfgs, scenarios)]

    out = Path(args.out_dir or "out/compare")
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "comparison.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["config", "mechanism", "g_hat", "g_hat_half_width", "p_g_gt_095", "p_g_gt_095_half_width"])
        for name, rep in rows:
            w.writerow([name, rep.mechanism, repr(rep.g_hat), repr(rep.g_hat_hw),
                        repr(rep.p_full), repr(rep.p_full_hw)])
    lines = [f"{'mechanism':<12}{'g_hat':<18}{'p_g>0.95'}"]
    for _, rep in rows:
        g = f"{rep.g_hat:.3f} +/- {_fmt_hw(rep.g_hat_hw)}"
        lines.append(f"{rep.mechanism:<12}{g:<18}{rep.p_full:.3f} +/- {_fmt_hw(rep.p_full_hw)}")
    table = "\n".join(lines) + "\n"
    (out / "comparison.txt").write_text(table)
    write_yaml(out / "manifest.yaml", {
        "command": "compare",
        "version": __version__,
        "configs": [c.to_dict() for c in cfgs],
        "seeds": [list(rep.seeds) for _, rep in rows],
    })
    if not args.quiet:
        print(table, end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="feesim", description=__doc__.splitlines()[0])
    p.add_argument("--quiet", action="store_true", help="suppress console output")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="statistics of an on-chain dataset export")
    a.add_argument("--blocks", required=True)
    a.add_argument("--txs", required=True)
    a.add_argument("--from-height", type=int)
    a.add_argument("--to-height", type=int)
    a.add_argument("--batches", type=int, default=1000)
    a.add_argument("--out-dir", default="out/analyze")
    a.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS)
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("simulate", help="run a scenario configuration",
                       epilog="bundled configs: " + ", ".join(bundled_configs()))
    s.add_argument("--config", required=True, help="path or bundled scenario name")
    s.add_argument("--blocks")
    s.add_argument("--txs")
    s.add_argument("--seed", type=int)
    s.add_argument("--runs", type=int)
    s.add_argument("--out-dir")
    s.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS)
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("compare", help="compare mechanisms on one demand trace")
    c.add_argument("configs", nargs="*")
    c.add_argument("--config", dest="extra", action="append", default=[])
    c.add_argument("--blocks")
    c.add_argument("--txs")
    c.add_argument("--seed", type=int)
    c.add_argument("--runs", type=int)
    c.add_argument("--out-dir")
    c.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS)
    c.set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE
    if args.command == "compare":
        args.configs = list(args.configs) + list(args.extra)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except SimulationError as e:
        print(f"simulation error: {e}", file=sys.stderr)
        return EXIT_INTERNAL
    except FeeMarketError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as e:  # noqa: BLE001
        log.exception("internal error")
        print(f"internal error: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
