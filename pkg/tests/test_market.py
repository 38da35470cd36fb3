from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from feesim.fee_mechanism import ETHER, GWEI, GasSchedule, InvalidInput
from feesim.market import (
    EIP1559,
    LEGACY,
    BuiltBlock,
    Mempool,
    NotIncludable,
    Transaction,
    build_block,
    mempool_update,
    miner_tip,
    select_transactions,
    settle_block,
)
from oracles import best_subset_revenue


def tx(i, f, p=None, gas=21_000, slot=0):
    if p is None:
        return Transaction.legacy(i, f * GWEI, gas, slot)
    return Transaction(i, EIP1559, f * GWEI, p * GWEI, gas, slot)


# tips

def test_tip_capped_by_priority_fee():
    assert miner_tip(100 * GWEI, 2 * GWEI, 30 * GWEI) == 2 * GWEI


def test_tip_capped_by_headroom():
    assert miner_tip(31 * GWEI, 2 * GWEI, 30 * GWEI) == 1 * GWEI


def test_legacy_tip_is_price_minus_base_fee():
    assert tx(0, 50).tip(30 * GWEI) == 20 * GWEI


def test_tip_below_base_fee_raises():
    with pytest.raises(NotIncludable):
        miner_tip(29 * GWEI, 2 * GWEI, 30 * GWEI)


def test_legacy_needs_equal_fees():
    with pytest.raises(InvalidInput):
        Transaction(0, LEGACY, 10, 5, 21_000)


def test_transaction_validation():
    with pytest.raises(InvalidInput):
        Transaction(0, 2, 10, 10, 21_000)
    with pytest.raises(InvalidInput):
        Transaction(0, EIP1559, 10, 1, 0)


# mempool

def test_mempool_rejects_duplicate_ids():
    m = Mempool([tx(1, 10)])
    with pytest.raises(InvalidInput):
        m.add([tx(1, 20)])
    with pytest.raises(InvalidInput):
        Mempool([tx(2, 10), tx(2, 11)])


def test_mempool_update_adds_in_place():
    m = Mempool()
    out = mempool_update(m, [tx(1, 10), tx(2, 30)])
    assert out is m and len(m) == 2 and 1 in m and tx(2, 30) in m
    assert [t.id for t in m] == [2, 1]


def test_payable_stops_at_floor():
    m = Mempool([tx(1, 10), tx(2, 30), tx(3, 20)])
    assert [t.id for t in m.payable(15 * GWEI)] == [2, 3]


def test_copy_is_independent():
    m = Mempool([tx(1, 10)])
    c = m.copy()
    c.add([tx(2, 20)])
    assert len(m) == 1 and len(c) == 2


# block building

def test_highest_tips_first():
    sched = GasSchedule(100_000)
    m = Mempool([tx(1, 40, gas=50_000), tx(2, 60, gas=50_000), tx(3, 50, gas=50_000)])
    blk, m = build_block(m, 30 * GWEI, sched)
    assert [t.id for t in blk.included] == [2, 3]
    assert blk.gas_used == 100_000 and blk.relative_size == 1
    assert m.ids() == {1}


def test_skips_transaction_that_does_not_fit():
    sched = GasSchedule(100_000)
    m = Mempool([tx(1, 60, gas=80_000), tx(2, 50, gas=40_000), tx(3, 40, gas=20_000)])
    chosen = select_transactions(m, 30 * GWEI, sched)
    assert [t.id for t in chosen] == [1, 3]


def test_min_tip_excludes():
    sched = GasSchedule(1_000_000)
    m = Mempool([tx(1, 31), tx(2, 32), tx(3, 100, 1)])
    chosen = select_transactions(m, 30 * GWEI, sched, min_tip=2 * GWEI)
    assert [t.id for t in chosen] == [2]


def test_ties_break_by_arrival_then_id():
    sched = GasSchedule(42_000)
    m = Mempool([tx(5, 40, slot=1), tx(7, 40, slot=0), tx(3, 40, slot=1)])
    assert [t.id for t in select_transactions(m, 30 * GWEI, sched)] == [7, 3]


def test_empty_when_nothing_payable():
    m = Mempool([tx(1, 10)])
    blk, m = build_block(m, 30 * GWEI, GasSchedule())
    assert blk.included == () and blk.gas_used == 0 and len(m) == 1


def test_select_does_not_mutate():
    m = Mempool([tx(1, 40), tx(2, 50)])
    select_transactions(m, 30 * GWEI, GasSchedule())
    assert len(m) == 2


tx_strategy = st.builds(
    lambda f, p, gas, legacy: (f, p, gas, legacy),
    st.integers(0, 200), st.integers(0, 50), st.integers(1, 40), st.booleans(),
)


def _mk(specs):
    out = []
    for i, (f, p, gas, legacy) in enumerate(specs):
        out.append(Transaction.legacy(i, f * GWEI, gas * 10_000) if legacy
                   else Transaction(i, EIP1559, f * GWEI, p * GWEI, gas * 10_000))
    return out


@settings(max_examples=200, deadline=None)
@given(st.lists(tx_strategy, max_size=30), st.integers(0, 150))
def test_block_invariants(specs, b_gwei):
    txs = _mk(specs)
    sched = GasSchedule(1_000_000)
    b = b_gwei * GWEI
    blk, m = build_block(Mempool(txs), b, sched)
    assert blk.gas_used <= sched.block_gas_limit
    for t in blk.included:
        assert t.max_fee >= b and t.tip(b) >= 2 * GWEI
    assert m.ids() | {t.id for t in blk.included} == {t.id for t in txs}
    assert not (m.ids() & {t.id for t in blk.included})
    # greedy: any left-out eligible transaction either did not fit or has a lower tip
    # than everything chosen after the block filled up
    room = sched.block_gas_limit - blk.gas_used
    for t in m:
        if t.max_fee >= b and t.tip(b) >= 2 * GWEI:
            assert t.gas_limit > room


@settings(max_examples=200, deadline=None)
@given(st.lists(tx_strategy, max_size=8), st.integers(0, 150))
def test_equal_gas_matches_exhaustive_optimum(specs, b_gwei):
    specs = [(f, p, 5, legacy) for f, p, _, legacy in specs]
    txs = _mk(specs)
    b = b_gwei * GWEI
    sched = GasSchedule(200_000)
    chosen = select_transactions(Mempool(txs), b, sched)
    assert sum(t.tip(b) * t.gas_limit for t in chosen) == best_subset_revenue(txs, b, 200_000, 2 * GWEI)


@settings(max_examples=200, deadline=None)
@given(st.lists(tx_strategy, max_size=8), st.integers(0, 150))
def test_greedy_never_beats_optimum(specs, b_gwei):
    txs = _mk(specs)
    b = b_gwei * GWEI
    chosen = select_transactions(Mempool(txs), b, GasSchedule(400_000))
    assert sum(t.tip(b) * t.gas_limit for t in chosen) <= best_subset_revenue(txs, b, 400_000, 2 * GWEI)


# settlement

def test_settlement_example():
    b = 59 * GWEI
    block = BuiltBlock(0, (Transaction.legacy(0, 70 * GWEI, 1_000_000),
                           Transaction(1, EIP1559, 100 * GWEI, 8 * GWEI, 1_000_000)),
                       2_000_000, 30_000_000, b)
    s = settle_block(block, 2 * ETHER)
    assert s.burned_total == Fraction(118, 1000) * ETHER
    assert s.tips_total == Fraction(19, 1000) * ETHER
    assert s.miner_revenue == Fraction(2019, 1000) * ETHER
    assert s.user_payments == Fraction(137, 1000) * ETHER


@settings(max_examples=200, deadline=None)
@given(st.lists(tx_strategy, max_size=30), st.integers(0, 150), st.integers(0, 5))
def test_settlement_conserves(specs, b_gwei, reward):
    b = b_gwei * GWEI
    blk, _ = build_block(Mempool(_mk(specs)), b, GasSchedule(1_000_000))
    s = settle_block(blk, reward * ETHER)
    assert s.user_payments == s.burned_total + s.tips_total
    assert s.miner_revenue == reward * ETHER + s.tips_total
    assert s.burned_total == b * blk.gas_used


def test_random_mempools_respect_priority_order():
    rng = np.random.default_rng(3)
    for _ in range(50):
        txs = [tx(i, int(rng.integers(30, 80)), gas=int(rng.integers(1, 5)) * 21_000) for i in range(20)]
        chosen = select_transactions(Mempool(txs), 30 * GWEI, GasSchedule(200_000))
        tips = [t.tip(30 * GWEI) for t in chosen]
        assert tips == sorted(tips, reverse=True)
