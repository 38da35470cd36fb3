"""Base fee state and learning-rate controllers.

All fee arithmetic is exact: base fees are integer wei, learning rates and
AIMD parameters are :class:`fractions.Fraction`.  The multiplicative update

    b' = b * (1 + d * (G - T/2) / (T/2))

is evaluated as a rational and floored to whole wei, then clamped to a
configurable floor so that zero never becomes an absorbing state.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Union

GWEI = 10**9
ETHER = 10**18
MAX_WEI = 2**256 - 1
DEFAULT_BASE_FEE_FLOOR = 7

Number = Union[int, float, str, Fraction]


class FeeMarketError(Exception):
    """Base class for errors raised by the simulator."""


class InvalidInput(FeeMarketError, ValueError):
    """An argument violates a documented precondition."""


class FeeOverflowError(FeeMarketError, OverflowError):
    """A wei amount left the representable (uint256) range."""


def as_fraction(x: Number) -> Fraction:
    """Exact rational from a decimal literal; floats go through ``repr``."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        return Fraction(repr(x))
    return Fraction(x)


def check_wei(value: int, what: str = "amount") -> int:
    if value < 0 or value > MAX_WEI:
        raise FeeOverflowError(f"{what} {value} outside uint256 range")
    return value


@dataclass(frozen=True)
class GasSchedule:
    block_gas_limit: int = 30_000_000

    def __post_init__(self):
        if self.block_gas_limit <= 0 or self.block_gas_limit % 2:
            raise InvalidInput(
                f"block_gas_limit must be positive and even, got {self.block_gas_limit}"
            )

    @property
    def target(self) -> int:
        return self.block_gas_limit // 2


@dataclass(frozen=True)
class BaseFeeState:
    base_fee: int
    block_height: int = 0
    floor: int = DEFAULT_BASE_FEE_FLOOR

    def __post_init__(self):
        if self.floor < 0:
            raise InvalidInput("base fee floor must be non-negative")
        if self.base_fee < self.floor:
            raise InvalidInput(f"base fee {self.base_fee} below floor {self.floor}")
        if self.block_height < 0:
            raise InvalidInput("block height must be non-negative")
        check_wei(self.base_fee, "base fee")


def base_fee_next(
    b: int,
    gas_used: int,
    schedule: GasSchedule,
    d: Number,
    floor: int = DEFAULT_BASE_FEE_FLOOR,
) -> int:
    """Next base fee in wei after a block that used ``gas_used`` gas."""
    d = as_fraction(d)
    if not 0 < d <= 1:
        raise InvalidInput(f"learning rate must lie in (0, 1], got {d}")
    if not 0 <= gas_used <= schedule.block_gas_limit:
        raise InvalidInput(
            f"gas_used {gas_used} outside [0, {schedule.block_gas_limit}]"
        )
    check_wei(b, "base fee")
    target = schedule.target
    factor = 1 + d * Fraction(gas_used - target, target)
    nxt = (b * factor.numerator) // factor.denominator
    return check_wei(max(floor, nxt), "next base fee")


@dataclass(frozen=True)
class AimdParams:
    alpha: Fraction = Fraction(1, 40)
    beta: Fraction = Fraction(19, 20)
    gamma: Fraction = Fraction(1, 4)
    d_min: Fraction = Fraction(1, 80)
    d_max: Fraction = Fraction(1)
    window_n: int = 8

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma", "d_min", "d_max"):
            object.__setattr__(self, name, as_fraction(getattr(self, name)))
        if self.alpha <= 0:
            raise InvalidInput("alpha must be > 0")
        if not 0 <= self.beta <= 1:
            raise InvalidInput("beta must lie in [0, 1]")
        if not 0 <= self.gamma <= Fraction(1, 2):
            raise InvalidInput("gamma must lie in [0, 1/2]")
        if not 0 < self.d_min <= self.d_max:
            raise InvalidInput("need 0 < d_min <= d_max")
        if self.d_max > 1:
            # base_fee_next only accepts d in (0, 1]
            raise InvalidInput("d_max must be <= 1")
        if self.window_n < 1:
            raise InvalidInput("window_n must be a positive integer")


def aimd_update(d: Number, g_window: Iterable[Number], params: AimdParams) -> Fraction:
    """One AIMD step on the learning rate given recent relative block sizes.

    An empty window leaves ``d`` untouched.  The thresholds are strict, so a
    window mean of exactly ``gamma`` or ``1 - gamma`` takes the decrease branch.
    """
    d = as_fraction(d)
    window = [as_fraction(g) for g in g_window]
    if not window:
        return d
    g_avg = sum(window, Fraction(0)) / len(window)
    if g_avg < params.gamma or g_avg > 1 - params.gamma:
        return min(params.d_max, d + params.alpha)
    return max(params.d_min, params.beta * d)


class ConstantController:
    """Fixed learning rate for the lifetime of the controller."""

    kind = "constant"

    def __init__(self, d: Number = Fraction(1, 8)):
        d = as_fraction(d)
        if not 0 < d <= 1:
            raise InvalidInput(f"learning rate must lie in (0, 1], got {d}")
        self._d = d

    @property
    def d(self) -> Fraction:
        return self._d

    def observe(self, g: Fraction) -> Fraction:
        return self._d

    def __repr__(self):
        return f"ConstantController(d={self._d})"


@dataclass
class AimdController:
    """Variable learning rate driven by the mean of the last ``window_n`` sizes."""

    params: AimdParams = field(default_factory=AimdParams)
    d: Fraction = Fraction(1, 8)
    window: deque = field(default=None)

    kind = "aimd"

    def __post_init__(self):
        self.d = as_fraction(self.d)
        if not self.params.d_min <= self.d <= self.params.d_max:
            raise InvalidInput(
                f"initial d={self.d} outside [{self.params.d_min}, {self.params.d_max}]"
            )
        self.window = deque(self.window or (), maxlen=self.params.window_n)

    def update(self, g_window: Iterable[Number] | None = None) -> Fraction:
        """Apply :func:`aimd_update` to the stored (or a supplied) window."""
        self.d = aimd_update(self.d, self.window if g_window is None else g_window, self.params)
        return self.d

    def observe(self, g: Fraction) -> Fraction:
        self.window.append(as_fraction(g))
        return self.update()


FeeController = Union[ConstantController, AimdController]


def controller_step(
    ctrl: FeeController,
    state: BaseFeeState,
    gas_used: int,
    schedule: GasSchedule,
) -> BaseFeeState:
    """Advance one block: update the learning rate first, then the base fee."""
    if not 0 <= gas_used <= schedule.block_gas_limit:
        raise InvalidInput(
            f"gas_used {gas_used} outside [0, {schedule.block_gas_limit}]"
        )
    d = ctrl.observe(Fraction(gas_used, schedule.block_gas_limit))
    b = base_fee_next(state.base_fee, gas_used, schedule, d, floor=state.floor)
    return BaseFeeState(b, state.block_height + 1, state.floor)
