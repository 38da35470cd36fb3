"""Stochastic transaction arrivals.

Each slot draws a Poisson count ``n`` and then ``round(2.75 n)`` "regular"
valuations from a uniform band around ``0.75 * f_hat`` plus ``round(0.25 n)``
"urgent" valuations from a Pareto law with scale ``f_hat / 10``.  Valuations
become bids: EIP-1559 users bid ``f = v`` with a fixed priority fee, legacy
users bid ``f = p = v``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from .fee_mechanism import GWEI, GasSchedule, InvalidInput
from .market import EIP1559, LEGACY, Transaction


def make_rng(seed: int) -> np.random.Generator:
    if not 0 <= seed < 2**64:
        raise InvalidInput(f"seed must be a 64-bit unsigned integer, got {seed}")
    return np.random.Generator(np.random.PCG64(seed))


def round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


@dataclass(frozen=True)
class DemandParams:
    lam: float = 3.0
    uniform_share: float = 2.75
    pareto_share: float = 0.25
    pareto_shape: float = 1.35
    pareto_scale_factor: float = 0.10
    uniform_center_factor: float = 0.75
    uniform_halfwidth_factor: float = 0.15
    priority_fee: int = 2 * GWEI
    legacy_fraction: float = 0.5
    gas_values: tuple = (21_000, 150_000)
    gas_probs: tuple = (0.6, 0.4)
    gas_multiplier: float = 1.0

    def __post_init__(self):
        if self.lam < 0:
            raise InvalidInput("lam must be >= 0")
        if self.pareto_shape <= 1:
            raise InvalidInput("pareto_shape must be > 1 for a finite mean")
        for name in ("uniform_share", "pareto_share", "pareto_scale_factor",
                     "uniform_center_factor", "uniform_halfwidth_factor", "gas_multiplier"):
            if getattr(self, name) <= 0:
                raise InvalidInput(f"{name} must be > 0")
        if self.uniform_halfwidth_factor > self.uniform_center_factor:
            raise InvalidInput("uniform band would reach negative valuations")
        if not 0 <= self.legacy_fraction <= 1:
            raise InvalidInput("legacy_fraction must lie in [0, 1]")
        if self.priority_fee < 0:
            raise InvalidInput("priority_fee must be >= 0")
        if len(self.gas_values) != len(self.gas_probs) or not self.gas_values:
            raise InvalidInput("gas_values and gas_probs must have equal, non-zero length")
        if any(g <= 0 for g in self.gas_values) or any(q < 0 for q in self.gas_probs):
            raise InvalidInput("gas values must be positive and probabilities non-negative")
        if not math.isclose(sum(self.gas_probs), 1.0, abs_tol=1e-9):
            raise InvalidInput("gas_probs must sum to 1")

    def class_counts(self, n: int) -> tuple[int, int]:
        return round_half_up(self.uniform_share * n), round_half_up(self.pareto_share * n)

    def mean_gas(self) -> float:
        return self.gas_multiplier * float(np.dot(self.gas_values, self.gas_probs))


@dataclass(frozen=True)
class DemandTrace:
    """Per-slot arrival rate and reference price (wei per gas)."""

    lam: np.ndarray
    f_hat: np.ndarray
    legacy_fraction: np.ndarray | None = None

    def __post_init__(self):
        lam = np.asarray(self.lam, dtype=float)
        f_hat = np.asarray(self.f_hat, dtype=float)
        if lam.shape != f_hat.shape or lam.ndim != 1:
            raise InvalidInput("lam and f_hat must be 1-d arrays of equal length")
        if (lam < 0).any():
            raise InvalidInput("arrival rates must be >= 0")
        if ((lam > 0) & (f_hat <= 0)).any():
            raise InvalidInput("f_hat must be > 0 wherever lam > 0")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "f_hat", f_hat)
        if self.legacy_fraction is not None:
            lf = np.asarray(self.legacy_fraction, dtype=float)
            if lf.shape != lam.shape or ((lf < 0) | (lf > 1)).any():
                raise InvalidInput("legacy_fraction must match the trace and lie in [0, 1]")
            object.__setattr__(self, "legacy_fraction", lf)

    def __len__(self):
        return len(self.lam)

    def same_as(self, other: "DemandTrace") -> bool:
        def eq(a, b):
            if a is None or b is None:
                return a is b
            return a.shape == b.shape and bool(np.array_equal(a, b))
        return eq(self.lam, other.lam) and eq(self.f_hat, other.f_hat) and eq(
            self.legacy_fraction, other.legacy_fraction)


def constant_trace(slots: int, f_hat: float, lam: float = 3.0) -> DemandTrace:
    return DemandTrace(np.full(slots, float(lam)), np.full(slots, float(f_hat)))


def burst_trace(
    slots: int,
    base: float,
    peak: float,
    onset: int,
    hold: int = 30,
    decay: float = 60.0,
    lam: float = 3.0,
    lam_peak: float | None = None,
    lam_decay: float | None = None,
) -> DemandTrace:
    """Reference price that jumps from ``base`` to ``peak`` at ``onset``.

    The peak is held for ``hold`` slots, then relaxes exponentially back to
    ``base`` with time constant ``decay`` (in slots).  The arrival rate follows
    the same profile from ``lam`` to ``lam_peak`` (default: no volume surge),
    relaxing with its own time constant ``lam_decay`` (default ``decay``).
    """
    t = np.arange(slots, dtype=float)

    def profile(tau):
        shape = np.zeros(slots)
        after = t >= onset + hold
        shape[(t >= onset) & ~after] = 1.0
        if tau > 0:
            shape[after] = np.exp(-(t[after] - onset - hold) / tau)
        return shape

    lam_peak = lam if lam_peak is None else lam_peak
    lam_decay = decay if lam_decay is None else lam_decay
    return DemandTrace(lam + (lam_peak - lam) * profile(lam_decay),
                       base + (peak - base) * profile(decay))


def draw_num_transactions(lam: float, rng: np.random.Generator) -> int:
    if lam < 0:
        raise InvalidInput(f"arrival rate must be >= 0, got {lam}")
    return int(rng.poisson(lam))


def draw_valuations(n: int, f_hat: float, params: DemandParams, rng: np.random.Generator):
    """Regular-class and urgent-class valuations (float wei/gas) for count ``n``."""
    n_uni, n_par = params.class_counts(n)
    c, h = params.uniform_center_factor, params.uniform_halfwidth_factor
    uni = rng.uniform((c - h) * f_hat, (c + h) * f_hat, n_uni)
    scale = params.pareto_scale_factor * f_hat
    # numpy's pareto is the Lomax form; shift by one for the classic law
    par = (rng.pareto(params.pareto_shape, n_par) + 1.0) * scale
    return uni, par


def draw_transactions(
    n: int,
    f_hat: float,
    params: DemandParams,
    rng: np.random.Generator,
    slot: int = 0,
    start_id: int = 0,
    legacy_fraction: float | None = None,
) -> list[Transaction]:
    """Arrivals for one slot, with ids ``start_id, start_id + 1, ...``."""
    if n < 0:
        raise InvalidInput("n must be >= 0")
    if n == 0:
        return []
    if f_hat <= 0:
        raise InvalidInput(f"reference price must be > 0, got {f_hat}")
    uni, par = draw_valuations(n, f_hat, params, rng)
    # plain ints: heavy-tailed draws can exceed int64
    vals = [int(v) for v in np.concatenate([uni, par])]
    k = len(vals)
    lf = params.legacy_fraction if legacy_fraction is None else legacy_fraction
    is_legacy = rng.random(k) < lf
    gas_idx = rng.choice(len(params.gas_values), size=k, p=params.gas_probs)
    gas = [max(1, round_half_up(params.gas_values[i] * params.gas_multiplier)) for i in gas_idx]

    txs = []
    for j in range(k):
        v = vals[j]
        if is_legacy[j]:
            txs.append(Transaction(start_id + j, LEGACY, v, v, gas[j], slot))
        else:
            txs.append(Transaction(start_id + j, EIP1559, v, params.priority_fee, gas[j], slot))
    return txs


def expected_arrivals(params: DemandParams, lam: float | None = None) -> tuple[float, float]:
    """Expected regular and urgent counts per slot under Poisson(lam)."""
    lam = params.lam if lam is None else lam
    if lam == 0:
        return 0.0, 0.0
    hi = int(stats.poisson.ppf(1 - 1e-15, lam)) + 2
    n = np.arange(hi + 1)
    pmf = stats.poisson.pmf(n, lam)
    uni = np.floor(params.uniform_share * n + 0.5)
    par = np.floor(params.pareto_share * n + 0.5)
    return float(pmf @ uni), float(pmf @ par)


def calibrate_gas_multiplier(params: DemandParams, schedule: GasSchedule, load: float = 1.5) -> float:
    """Multiplier making expected arriving gas per slot ``load * target``."""
    e_uni, e_par = expected_arrivals(params)
    base_gas = float(np.dot(params.gas_values, params.gas_probs))
    return load * schedule.target / ((e_uni + e_par) * base_gas)


def includable_gas(x: float, f_hat: float, params: DemandParams, lam: float | None = None) -> float:
    """Expected arriving gas per slot with valuation >= ``x`` (wei/gas)."""
    e_uni, e_par = expected_arrivals(params, lam)
    c, h = params.uniform_center_factor, params.uniform_halfwidth_factor
    lo, hi = (c - h) * f_hat, (c + h) * f_hat
    p_uni = float(np.clip((hi - x) / (hi - lo), 0.0, 1.0))
    scale = params.pareto_scale_factor * f_hat
    p_par = 1.0 if x <= scale else (scale / x) ** params.pareto_shape
    return params.mean_gas() * (e_uni * p_uni + e_par * p_par)


def equilibrium_base_fee(
    f_hat: float,
    params: DemandParams,
    schedule: GasSchedule,
    min_tip: int = 2 * GWEI,
    lam: float | None = None,
) -> float:
    """Base fee at which expected includable arriving gas equals the target.

    A transaction is includable when its tip reaches ``min_tip``, i.e. when its
    valuation is at least ``b + min_tip`` (priority fees are assumed >= min_tip).
    Returns 0.0 when demand never reaches the target.
    """
    target = schedule.target
    if includable_gas(min_tip, f_hat, params, lam) <= target:
        return 0.0
    lo, hi = 0.0, max(f_hat, 1.0)
    while includable_gas(hi + min_tip, f_hat, params, lam) > target:
        hi *= 2
    for _ in range(200):
        mid = (lo + hi) / 2
        if includable_gas(mid + min_tip, f_hat, params, lam) > target:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


def trace_from_prices(prices: Sequence[float], lam: float = 3.0,
                      legacy_fraction: Sequence[float] | None = None) -> DemandTrace:
    """Trace from a smoothed price series; zero prices carry the last positive one."""
    f = np.asarray(prices, dtype=float).copy()
    if f.size == 0:
        raise InvalidInput("empty price series")
    pos = np.flatnonzero(f > 0)
    if pos.size == 0:
        raise InvalidInput("price series has no positive value")
    # forward-fill zeros, back-fill any leading zeros from the first positive value
    idx = np.where(f > 0, np.arange(f.size), -1)
    np.maximum.accumulate(idx, out=idx)
    idx[idx < 0] = pos[0]
    f = f[idx]
    return DemandTrace(np.full(f.size, float(lam)), f, legacy_fraction)


def trace_from_dataset(blocks, eta: int = 10, lam: float = 3.0, use_legacy_fraction: bool = True) -> DemandTrace:
    """Median-smoothed weighted block gas prices of ``blocks`` as a demand trace."""
    from . import analytics

    blocks = list(blocks)
    if not blocks:
        raise InvalidInput("no blocks to build a trace from")
    heights = [blk.height for blk in blocks]
    raw = analytics.Series(heights, [analytics.block_avg_gas_price(blk) for blk in blocks])
    smooth = analytics.median_filter(raw, eta)
    lf = None
    if use_legacy_fraction:
        tau = analytics.Series(heights, [analytics.eip_fraction(blk) for blk in blocks])
        lf = 1.0 - analytics.median_filter(tau, eta).values
    return trace_from_prices(smooth.values, lam, lf)
