"""Mempool, greedy block building and per-block settlement."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator

from sortedcontainers import SortedKeyList

from .fee_mechanism import ETHER, GWEI, GasSchedule, InvalidInput, check_wei

LEGACY = 0
EIP1559 = 1

DEFAULT_MIN_TIP = 2 * GWEI
DEFAULT_BLOCK_REWARD = 2 * ETHER


class NotIncludable(InvalidInput):
    """Max fee below the current base fee."""


@dataclass(frozen=True, slots=True)
class Transaction:
    id: int
    tx_type: int
    max_fee: int
    max_priority_fee: int
    gas_limit: int
    arrival_slot: int = 0

    def __post_init__(self):
        if self.tx_type not in (LEGACY, EIP1559):
            raise InvalidInput(f"tx {self.id}: tx_type must be 0 or 1")
        if self.gas_limit <= 0:
            raise InvalidInput(f"tx {self.id}: gas_limit must be positive")
        if self.max_fee < 0 or self.max_priority_fee < 0:
            raise InvalidInput(f"tx {self.id}: fees must be non-negative")
        if self.tx_type == LEGACY and self.max_priority_fee != self.max_fee:
            raise InvalidInput(f"tx {self.id}: legacy transactions need p == f")

    @classmethod
    def legacy(cls, id: int, gas_price: int, gas_limit: int, arrival_slot: int = 0):
        return cls(id, LEGACY, gas_price, gas_price, gas_limit, arrival_slot)

    def tip(self, base_fee: int) -> int:
        return miner_tip(self.max_fee, self.max_priority_fee, base_fee)


def miner_tip(f: int, p: int, b: int) -> int:
    """Per-gas tip earned by the miner: min(f - b, p)."""
    if f < b:
        raise NotIncludable(f"max fee {f} below base fee {b}")
    return min(f - b, p)


def _order_key(tx: Transaction):
    return (-tx.max_fee, tx.arrival_slot, tx.id)


class Mempool:
    """Pending transactions, kept sorted by descending max fee.

    Transactions stay until they are included; there is no eviction.
    """

    def __init__(self, txs: Iterable[Transaction] = ()):
        self._by_fee = SortedKeyList(key=_order_key)
        self._ids: set[int] = set()
        self.add(txs)

    def add(self, txs: Iterable[Transaction]) -> None:
        txs = list(txs)
        fresh = set()
        for tx in txs:
            if tx.id in self._ids or tx.id in fresh:
                raise InvalidInput(f"duplicate transaction id {tx.id}")
            fresh.add(tx.id)
        self._ids |= fresh
        self._by_fee.update(txs)

    def discard(self, txs: Iterable[Transaction]) -> None:
        for tx in txs:
            self._by_fee.remove(tx)
            self._ids.remove(tx.id)

    def copy(self) -> "Mempool":
        m = Mempool()
        m._by_fee.update(self._by_fee)
        m._ids = set(self._ids)
        return m

    def payable(self, floor_fee: int) -> Iterator[Transaction]:
        """Transactions with max fee >= ``floor_fee``, highest first."""
        for tx in self._by_fee:
            if tx.max_fee < floor_fee:
                return
            yield tx

    def __contains__(self, tx) -> bool:
        return getattr(tx, "id", tx) in self._ids

    def __iter__(self) -> Iterator[Transaction]:
        return iter(self._by_fee)

    def __len__(self) -> int:
        return len(self._by_fee)

    def ids(self) -> frozenset:
        return frozenset(self._ids)

    def __repr__(self):
        return f"Mempool({len(self)} pending)"


def mempool_update(m: Mempool, arrivals: Iterable[Transaction]) -> Mempool:
    """Add new arrivals to ``m`` in place and return it."""
    m.add(arrivals)
    return m


@dataclass(frozen=True)
class BuiltBlock:
    height: int
    included: tuple
    gas_used: int
    block_gas_limit: int
    base_fee_at_build: int

    @property
    def relative_size(self) -> Fraction:
        return Fraction(self.gas_used, self.block_gas_limit)


def select_transactions(
    m: Mempool, b: int, schedule: GasSchedule, min_tip: int = DEFAULT_MIN_TIP
) -> list[Transaction]:
    """Greedy selection by descending tip; does not modify ``m``.

    A transaction that does not fit in the remaining gas is skipped and the
    scan continues with the next one.  Ties go to the earlier arrival slot,
    then the smaller id.
    """
    if min_tip < 0:
        raise InvalidInput("min_tip must be non-negative")
    candidates = []
    for tx in m.payable(b + min_tip):
        tip = min(tx.max_fee - b, tx.max_priority_fee)
        if tip >= min_tip:
            candidates.append((-tip, tx.arrival_slot, tx.id, tx))
    candidates.sort(key=lambda c: c[:3])

    room = schedule.block_gas_limit
    chosen = []
    smallest = min((c[3].gas_limit for c in candidates), default=0)
    for *_, tx in candidates:
        if room < smallest:
            break
        if tx.gas_limit <= room:
            chosen.append(tx)
            room -= tx.gas_limit
    return chosen


def build_block(
    m: Mempool,
    b: int,
    schedule: GasSchedule,
    min_tip: int = DEFAULT_MIN_TIP,
    height: int = 0,
) -> tuple[BuiltBlock, Mempool]:
    """Build the next block from ``m``; included transactions leave ``m``.

    The mempool is updated in place and returned alongside the block.
    """
    chosen = select_transactions(m, b, schedule, min_tip)
    m.discard(chosen)
    gas = sum(tx.gas_limit for tx in chosen)
    blk = BuiltBlock(height, tuple(chosen), gas, schedule.block_gas_limit, b)
    return blk, m


@dataclass(frozen=True)
class BlockSettlement:
    block_creation_reward: int
    tips_total: int
    burned_total: int
    miner_revenue: int
    user_payments: int


def settle_block(blk: BuiltBlock, block_creation_reward: int = DEFAULT_BLOCK_REWARD) -> BlockSettlement:
    b = blk.base_fee_at_build
    tips = sum(miner_tip(tx.max_fee, tx.max_priority_fee, b) * tx.gas_limit for tx in blk.included)
    burned = b * blk.gas_used
    paid = sum((b + miner_tip(tx.max_fee, tx.max_priority_fee, b)) * tx.gas_limit for tx in blk.included)
    return BlockSettlement(
        block_creation_reward=check_wei(block_creation_reward, "block reward"),
        tips_total=check_wei(tips, "tips"),
        burned_total=check_wei(burned, "burn"),
        miner_revenue=check_wei(block_creation_reward + tips, "miner revenue"),
        user_payments=check_wei(paid, "user payments"),
    )
