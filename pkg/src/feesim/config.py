"""Scenario configuration files.

A configuration is a YAML document with four sections.  Every key has a
default (listed in the dataclasses below); unknown keys are rejected.

    name: stable_d0125
    demand:
      trace: {source: synthetic, shape: constant, slots: 450, f_hat_gwei: 40}
      lam: 10
      gas_multiplier: auto        # or a number
      ...
    mechanism:
      controller: constant        # or aimd
      d: 0.125
      initial_base_fee_gwei: auto
    run: {warmup: 50, runs: 20, base_seed: 0}
    io: {blocks: null, txs: null, out_dir: out}

Fee amounts are given in Gwei (or ETH for the block reward) as decimal
literals and converted exactly to integer wei.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .demand import (
    DemandParams,
    DemandTrace,
    burst_trace,
    calibrate_gas_multiplier,
    constant_trace,
    equilibrium_base_fee,
    trace_from_prices,
)
from .fee_mechanism import ETHER, GWEI, AimdParams, GasSchedule, InvalidInput, as_fraction
from .simulator import ControllerSpec, Scenario


class ConfigError(InvalidInput):
    """Invalid configuration; ``key`` names the offending entry."""

    def __init__(self, key: str, msg: str):
        super().__init__(f"{key}: {msg}")
        self.key = key


def to_wei(x, unit: int, key: str) -> int:
    try:
        v = as_fraction(str(x)) * unit
    except (ValueError, ZeroDivisionError):
        raise ConfigError(key, f"not a number: {x!r}")
    if v.denominator != 1 or v < 0:
        raise ConfigError(key, f"{x!r} is not a whole, non-negative number of wei")
    return int(v)


@dataclass
class TraceConfig:
    source: str = "synthetic"          # synthetic | replay
    shape: str = "constant"            # synthetic only: constant | burst
    slots: int = 450                   # measured slots, warm-up excluded
    f_hat_gwei: float = 40.0
    peak_gwei: float = 200.0           # burst only
    onset: int = 186                   # burst onset, counted from the first measured slot
    hold: int = 40
    decay: float = 150.0
    lam_surge: float = 1.5             # arrival-rate multiplier at the burst peak
    lam_decay: float | None = None
    from_height: int | None = None     # replay only
    to_height: int | None = None
    smoothing_eta: int = 10


@dataclass
class DemandConfig:
    trace: TraceConfig = field(default_factory=TraceConfig)
    lam: float = 10.0
    uniform_share: float = 2.75
    pareto_share: float = 0.25
    pareto_shape: float = 1.35
    pareto_scale_factor: float = 0.10
    uniform_center_factor: float = 0.75
    uniform_halfwidth_factor: float = 0.25
    priority_fee_gwei: float = 2
    legacy_fraction: Any = 0.5         # number, or "dataset" when replaying
    gas_values: list = field(default_factory=lambda: [21_000, 150_000])
    gas_probs: list = field(default_factory=lambda: [0.6, 0.4])
    gas_multiplier: Any = "auto"       # number, or "auto" for arrival_load * target
    arrival_load: float = 1.5


@dataclass
class AimdConfig:
    alpha: Any = "0.025"
    beta: Any = "0.95"
    gamma: Any = "0.25"
    d_min: Any = "0.0125"
    d_max: Any = "1"
    window_n: int = 8


@dataclass
class MechanismConfig:
    controller: str = "constant"       # constant | aimd
    d: Any = "0.125"                   # fixed rate, or AIMD starting rate
    aimd: AimdConfig = field(default_factory=AimdConfig)
    # number, "equilibrium", "dataset" (replay), or "auto": dataset when replaying else equilibrium
    initial_base_fee_gwei: Any = "auto"
    block_gas_limit: int = 30_000_000
    min_tip_gwei: Any = 2
    block_reward_eth: Any = 2
    base_fee_floor_wei: int = 7


@dataclass
class RunConfig:
    warmup: int = 50
    runs: int = 20
    base_seed: int = 0


@dataclass
class IoConfig:
    blocks: str | None = None
    txs: str | None = None
    out_dir: str = "out"


@dataclass
class ScenarioConfig:
    name: str = "scenario"
    demand: DemandConfig = field(default_factory=DemandConfig)
    mechanism: MechanismConfig = field(default_factory=MechanismConfig)
    run: RunConfig = field(default_factory=RunConfig)
    io: IoConfig = field(default_factory=IoConfig)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _build(cls, data, path):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(path or "<root>", "expected a mapping")
    known = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        full = f"{path}.{key}" if path else str(key)
        if key not in known:
            raise ConfigError(full, "unknown key")
        sub = known[key].default_factory if known[key].default_factory is not dataclasses.MISSING else None
        if sub is not None and dataclasses.is_dataclass(sub):
            kwargs[key] = _build(sub, value, full)
        else:
            kwargs[key] = value
    return cls(**kwargs)


BUNDLED = "scenarios"


def bundled_configs() -> list[str]:
    root = resources.files("feesim") / BUNDLED
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


def resolve_config_path(name_or_path: str) -> Path:
    p = Path(name_or_path)
    if p.exists():
        return p
    bundled = resources.files("feesim") / BUNDLED / f"{name_or_path}.yaml"
    if bundled.is_file():
        return Path(str(bundled))
    raise ConfigError("config", f"no such file or bundled scenario: {name_or_path}")


def load_config(name_or_path: str) -> ScenarioConfig:
    path = resolve_config_path(name_or_path)
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as e:
        raise ConfigError("config", f"{path}: {e}")
    return parse_config(data)


def parse_config(data: dict) -> ScenarioConfig:
    cfg = _build(ScenarioConfig, data, "")
    validate(cfg)
    return cfg


def _check(cond, key, msg):
    if not cond:
        raise ConfigError(key, msg)


def validate(cfg: ScenarioConfig) -> None:
    t = cfg.demand.trace
    _check(t.source in ("synthetic", "replay"), "demand.trace.source", "must be synthetic or replay")
    _check(t.shape in ("constant", "burst"), "demand.trace.shape", "must be constant or burst")
    _check(isinstance(t.slots, int) and t.slots >= 1, "demand.trace.slots", "must be an integer >= 1")
    if t.source == "replay":
        _check(isinstance(t.from_height, int) and isinstance(t.to_height, int),
               "demand.trace.from_height", "replay needs integer from_height and to_height")
        _check(t.from_height <= t.to_height, "demand.trace.to_height", "must be >= from_height")
    _check(cfg.mechanism.controller in ("constant", "aimd"), "mechanism.controller",
           "must be constant or aimd")
    lf = cfg.demand.legacy_fraction
    _check(lf == "dataset" or (isinstance(lf, (int, float)) and 0 <= lf <= 1),
           "demand.legacy_fraction", "must be a number in [0, 1] or 'dataset'")
    _check(lf != "dataset" or t.source == "replay", "demand.legacy_fraction",
           "'dataset' requires a replay trace")
    gm = cfg.demand.gas_multiplier
    _check(gm == "auto" or (isinstance(gm, (int, float)) and gm > 0), "demand.gas_multiplier",
           "must be 'auto' or a positive number")
    _check(isinstance(cfg.run.warmup, int) and cfg.run.warmup >= 0, "run.warmup", "must be an integer >= 0")
    _check(isinstance(cfg.run.runs, int) and cfg.run.runs >= 1, "run.runs", "must be an integer >= 1")
    _check(isinstance(cfg.run.base_seed, int) and cfg.run.base_seed >= 0, "run.base_seed",
           "must be a non-negative integer")
    # build the parameter objects once so range errors surface at load time
    demand_params(cfg)
    controller_spec(cfg)
    schedule(cfg)


def schedule(cfg: ScenarioConfig) -> GasSchedule:
    try:
        return GasSchedule(cfg.mechanism.block_gas_limit)
    except InvalidInput as e:
        raise ConfigError("mechanism.block_gas_limit", str(e))


def demand_params(cfg: ScenarioConfig) -> DemandParams:
    dc = cfg.demand
    base = dict(
        lam=dc.lam, uniform_share=dc.uniform_share, pareto_share=dc.pareto_share,
        pareto_shape=dc.pareto_shape, pareto_scale_factor=dc.pareto_scale_factor,
        uniform_center_factor=dc.uniform_center_factor,
        uniform_halfwidth_factor=dc.uniform_halfwidth_factor,
        priority_fee=to_wei(dc.priority_fee_gwei, GWEI, "demand.priority_fee_gwei"),
        legacy_fraction=0.5 if dc.legacy_fraction == "dataset" else float(dc.legacy_fraction),
        gas_values=tuple(dc.gas_values), gas_probs=tuple(dc.gas_probs),
    )
    try:
        params = DemandParams(**base)
        if dc.gas_multiplier == "auto":
            _check(dc.arrival_load > 0, "demand.arrival_load", "must be > 0")
            mult = calibrate_gas_multiplier(params, schedule(cfg), dc.arrival_load)
        else:
            mult = float(dc.gas_multiplier)
        return dataclasses.replace(params, gas_multiplier=mult)
    except ConfigError:
        raise
    except (InvalidInput, TypeError, ValueError) as e:
        raise ConfigError("demand", str(e))


def controller_spec(cfg: ScenarioConfig) -> ControllerSpec:
    mc = cfg.mechanism
    try:
        a = mc.aimd
        aimd = AimdParams(as_fraction(str(a.alpha)), as_fraction(str(a.beta)),
                          as_fraction(str(a.gamma)), as_fraction(str(a.d_min)),
                          as_fraction(str(a.d_max)), int(a.window_n))
        spec = ControllerSpec(mc.controller, as_fraction(str(mc.d)), aimd)
        spec.build()
        return spec
    except (InvalidInput, ValueError, ZeroDivisionError) as e:
        raise ConfigError("mechanism", str(e))


def _synthetic_trace(cfg: ScenarioConfig, params: DemandParams) -> DemandTrace:
    t = cfg.demand.trace
    w = cfg.run.warmup
    if t.shape == "constant":
        return constant_trace(w + t.slots, t.f_hat_gwei * GWEI, params.lam)
    return burst_trace(
        w + t.slots, t.f_hat_gwei * GWEI, t.peak_gwei * GWEI, w + t.onset, t.hold, t.decay,
        params.lam, params.lam * t.lam_surge, t.lam_decay,
    )


def build_scenario(cfg: ScenarioConfig, dataset=None) -> Scenario:
    """Turn a validated configuration into a runnable :class:`Scenario`.

    Replay traces need ``dataset`` (an :class:`analytics.Dataset`).  Warm-up
    slots replay the blocks just before ``from_height`` when the dataset has
    them, otherwise they repeat the first block of the window.
    """
    from . import analytics

    params = demand_params(cfg)
    sched = schedule(cfg)
    t = cfg.demand.trace
    w = cfg.run.warmup
    start_height = 0
    b0_data = None
    if t.source == "synthetic":
        trace = _synthetic_trace(cfg, params)
    else:
        if dataset is None:
            raise analytics.DataError("replay trace needs a dataset (io.blocks / io.txs)")
        lo = max(dataset.first_height, t.from_height - w)
        win = dataset.window(lo, t.to_height)
        prices = analytics.median_filter(win.avg_gas_prices(), t.smoothing_eta).values
        lf = None
        if cfg.demand.legacy_fraction == "dataset":
            lf = 1.0 - analytics.median_filter(win.eip_fractions(), t.smoothing_eta).values
        pad = w - (t.from_height - lo)
        if pad:
            prices = np.concatenate([np.full(pad, prices[0]), prices])
            if lf is not None:
                lf = np.concatenate([np.full(pad, lf[0]), lf])
        trace = trace_from_prices(prices, params.lam, lf)
        start_height = t.from_height - w
        b0_data = int(win.base_fee[0])

    floor = cfg.mechanism.base_fee_floor_wei
    ib = cfg.mechanism.initial_base_fee_gwei
    if ib == "auto":
        ib = "dataset" if b0_data is not None else "equilibrium"
    if ib == "dataset":
        if b0_data is None:
            raise ConfigError("mechanism.initial_base_fee_gwei", "'dataset' requires a replay trace")
        b0 = b0_data
    elif ib == "equilibrium":
        min_tip = to_wei(cfg.mechanism.min_tip_gwei, GWEI, "mechanism.min_tip_gwei")
        b0 = int(equilibrium_base_fee(trace.f_hat[0], params, sched, min_tip, trace.lam[0]))
    else:
        b0 = to_wei(ib, GWEI, "mechanism.initial_base_fee_gwei")
    b0 = max(b0, floor)

    try:
        return Scenario(
            name=cfg.name,
            trace=trace,
            initial_base_fee=b0,
            controller=controller_spec(cfg),
            demand=params,
            schedule=sched,
            min_tip=to_wei(cfg.mechanism.min_tip_gwei, GWEI, "mechanism.min_tip_gwei"),
            block_reward=to_wei(cfg.mechanism.block_reward_eth, ETHER, "mechanism.block_reward_eth"),
            base_fee_floor=floor,
            warmup=w,
            seed=cfg.run.base_seed,
            start_height=max(0, start_height),
        )
    except ConfigError:
        raise
    except InvalidInput as e:
        raise ConfigError("scenario", str(e))
