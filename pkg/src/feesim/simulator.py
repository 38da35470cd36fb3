"""Per-slot execution loop and the multi-run experiment harness."""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from . import analytics
from .demand import DemandParams, DemandTrace, draw_num_transactions, draw_transactions, make_rng
from .fee_mechanism import (
    DEFAULT_BASE_FEE_FLOOR,
    AimdController,
    AimdParams,
    BaseFeeState,
    ConstantController,
    FeeController,
    FeeMarketError,
    GasSchedule,
    InvalidInput,
    controller_step,
)
from .market import (
    DEFAULT_BLOCK_REWARD,
    DEFAULT_MIN_TIP,
    Mempool,
    build_block,
    settle_block,
)

Z95 = 1.96


class SimulationError(FeeMarketError):
    """A slot failed; the message names the slot (and run, when known)."""


@dataclass(frozen=True)
class ControllerSpec:
    kind: str = "constant"
    d: Fraction = Fraction(1, 8)
    aimd: AimdParams = field(default_factory=AimdParams)

    def __post_init__(self):
        if self.kind not in ("constant", "aimd"):
            raise InvalidInput(f"unknown controller kind {self.kind!r}")
        object.__setattr__(self, "d", Fraction(self.d))

    def build(self) -> FeeController:
        if self.kind == "constant":
            return ConstantController(self.d)
        return AimdController(self.aimd, self.d)

    @property
    def label(self) -> str:
        if self.kind == "aimd":
            return "AIMD"
        return f"d={float(self.d):g}"


@dataclass(frozen=True)
class Scenario:
    name: str
    trace: DemandTrace
    initial_base_fee: int
    controller: ControllerSpec = field(default_factory=ControllerSpec)
    demand: DemandParams = field(default_factory=DemandParams)
    schedule: GasSchedule = field(default_factory=GasSchedule)
    min_tip: int = DEFAULT_MIN_TIP
    block_reward: int = DEFAULT_BLOCK_REWARD
    base_fee_floor: int = DEFAULT_BASE_FEE_FLOOR
    warmup: int = 0
    seed: int = 0
    start_height: int = 0

    def __post_init__(self):
        if len(self.trace) < 1:
            raise InvalidInput("scenario needs at least one slot")
        if self.initial_base_fee < self.base_fee_floor:
            raise InvalidInput("initial base fee below the floor")
        if not 0 <= self.warmup < len(self.trace):
            raise InvalidInput("warm-up must leave at least one measured slot")

    @property
    def slots(self) -> int:
        return len(self.trace)


@dataclass
class SimState:
    slot: int
    fee: BaseFeeState
    controller: FeeController
    mempool: Mempool
    rng: np.random.Generator
    next_tx_id: int = 0
    base_fee: list = field(default_factory=list)
    gas_used: list = field(default_factory=list)
    d: list = field(default_factory=list)
    tips: list = field(default_factory=list)
    burned: list = field(default_factory=list)
    payments: list = field(default_factory=list)
    revenue: list = field(default_factory=list)
    included: list = field(default_factory=list)
    pending: list = field(default_factory=list)

    @classmethod
    def initial(cls, sc: Scenario, seed: int | None = None) -> "SimState":
        return cls(
            slot=sc.start_height,
            fee=BaseFeeState(sc.initial_base_fee, sc.start_height, sc.base_fee_floor),
            controller=sc.controller.build(),
            mempool=Mempool(),
            rng=make_rng(sc.seed if seed is None else seed),
        )


def simulate_slot(
    state: SimState,
    lam: float,
    f_hat: float,
    demand: DemandParams,
    schedule: GasSchedule,
    min_tip: int = DEFAULT_MIN_TIP,
    block_reward: int = DEFAULT_BLOCK_REWARD,
    legacy_fraction: float | None = None,
) -> SimState:
    """Run one slot: arrivals, mempool merge, block, learning rate, base fee."""
    t = state.slot
    try:
        n = draw_num_transactions(lam, state.rng)
        arrivals = draw_transactions(n, f_hat, demand, state.rng, slot=t,
                                     start_id=state.next_tx_id, legacy_fraction=legacy_fraction)
        state.next_tx_id += len(arrivals)
        state.mempool.add(arrivals)
        b = state.fee.base_fee
        blk, state.mempool = build_block(state.mempool, b, schedule, min_tip, height=t)
        st = settle_block(blk, block_reward)
        state.fee = controller_step(state.controller, state.fee, blk.gas_used, schedule)
    except FeeMarketError as e:
        raise SimulationError(f"slot {t}: {e}") from e

    state.base_fee.append(b)
    state.gas_used.append(blk.gas_used)
    state.d.append(state.controller.d)
    state.tips.append(st.tips_total)
    state.burned.append(st.burned_total)
    state.payments.append(st.user_payments)
    state.revenue.append(st.miner_revenue)
    state.included.append(len(blk.included))
    state.pending.append(len(state.mempool))
    state.slot += 1
    return state


@dataclass(frozen=True)
class RunResult:
    """Per-slot series of one run.

    ``base_fee[t]`` is the base fee block ``t`` was built at; ``d[t]`` is the
    learning rate applied in the update that followed it.
    """

    scenario: str
    seed: int
    warmup: int
    block_gas_limit: int
    f_hat: np.ndarray
    base_fee: list
    gas_used: list
    d: list
    tips: list
    burned: list
    payments: list
    revenue: list
    included: list
    pending: list
    final_base_fee: int

    @property
    def g(self) -> np.ndarray:
        return np.asarray(self.gas_used, dtype=float) / self.block_gas_limit

    def measured(self, series) -> np.ndarray:
        return np.asarray(series)[self.warmup:]

    def metrics(self) -> tuple[float, float]:
        return analytics.block_size_metrics(self.g[self.warmup:])

    def conserved(self) -> bool:
        return sum(self.payments) == sum(self.burned) + sum(self.tips)


def run_scenario(sc: Scenario, seed: int | None = None) -> RunResult:
    seed = sc.seed if seed is None else seed
    state = SimState.initial(sc, seed)
    lf = sc.trace.legacy_fraction
    for i in range(sc.slots):
        try:
            simulate_slot(state, sc.trace.lam[i], sc.trace.f_hat[i], sc.demand, sc.schedule,
                          sc.min_tip, sc.block_reward, None if lf is None else lf[i])
        except SimulationError as e:
            raise SimulationError(f"{sc.name} seed {seed}: {e}") from e
    return RunResult(
        scenario=sc.name, seed=seed, warmup=sc.warmup,
        block_gas_limit=sc.schedule.block_gas_limit, f_hat=sc.trace.f_hat,
        base_fee=state.base_fee, gas_used=state.gas_used, d=state.d, tips=state.tips,
        burned=state.burned, payments=state.payments, revenue=state.revenue,
        included=state.included, pending=state.pending, final_base_fee=state.fee.base_fee,
    )


def half_width(samples) -> float | None:
    """95% normal-approximation half-width; None with fewer than two samples."""
    x = np.asarray(samples, dtype=float)
    if x.size < 2:
        return None
    return Z95 * float(x.std(ddof=1)) / math.sqrt(x.size)


@dataclass
class ExperimentReport:
    scenario: str
    mechanism: str
    seeds: list
    g_hat_samples: list
    p_full_samples: list
    mean_series: dict
    conserved: bool
    runs: list = field(default_factory=list, repr=False)

    @property
    def g_hat(self) -> float:
        return float(np.mean(self.g_hat_samples))

    @property
    def p_full(self) -> float:
        return float(np.mean(self.p_full_samples))

    @property
    def g_hat_hw(self) -> float | None:
        return half_width(self.g_hat_samples)

    @property
    def p_full_hw(self) -> float | None:
        return half_width(self.p_full_samples)

    def summary(self) -> dict:
        return {
            "scenario": self.scenario,
            "mechanism": self.mechanism,
            "runs": len(self.seeds),
            "seeds": list(self.seeds),
            "g_hat": self.g_hat,
            "g_hat_half_width": self.g_hat_hw,
            "p_g_gt_095": self.p_full,
            "p_g_gt_095_half_width": self.p_full_hw,
            "conservation_holds": self.conserved,
        }


def _run_one(args):
    sc, seed = args
    return run_scenario(sc, seed)


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("FEESIM_THREADS", "1")))
    except ValueError:
        return 1


def run_experiment(sc: Scenario, runs: int = 20, threads: int | None = None,
                   keep_runs: bool = False) -> ExperimentReport:
    """Run seeds ``sc.seed .. sc.seed + runs - 1`` and aggregate the metrics."""
    if runs < 1:
        raise InvalidInput("runs must be >= 1")
    seeds = [sc.seed + k for k in range(runs)]
    threads = min(runs, _threads() if threads is None else threads)
    if threads > 1:
        with ProcessPoolExecutor(threads) as ex:
            results = list(ex.map(_run_one, [(sc, s) for s in seeds]))
    else:
        results = [run_scenario(sc, s) for s in seeds]

    metrics = [r.metrics() for r in results]
    mean_series = {
        "base_fee": np.mean([np.asarray(r.base_fee, dtype=float) for r in results], axis=0),
        "g": np.mean([r.g for r in results], axis=0),
        "d": np.mean([np.asarray(r.d, dtype=float) for r in results], axis=0),
        "miner_revenue": np.mean([np.asarray(r.revenue, dtype=float) for r in results], axis=0),
        "burned": np.mean([np.asarray(r.burned, dtype=float) for r in results], axis=0),
        "f_hat": np.asarray(sc.trace.f_hat, dtype=float),
    }
    return ExperimentReport(
        scenario=sc.name,
        mechanism=sc.controller.label,
        seeds=seeds,
        g_hat_samples=[m[0] for m in metrics],
        p_full_samples=[m[1] for m in metrics],
        mean_series=mean_series,
        conserved=all(r.conserved() for r in results),
        runs=results if keep_runs else [],
    )


def slots_to_reach(series, target: float, start: int = 0, within: float = 0.2) -> int | None:
    """Slots after ``start`` until ``series`` first lies within ``within`` of ``target``."""
    x = np.asarray(series, dtype=float)[start:]
    hit = np.flatnonzero(np.abs(x - target) <= within * target)
    return int(hit[0]) if hit.size else None
