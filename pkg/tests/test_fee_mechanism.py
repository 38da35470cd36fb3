from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from feesim.fee_mechanism import (
    GWEI,
    MAX_WEI,
    AimdController,
    AimdParams,
    BaseFeeState,
    ConstantController,
    FeeOverflowError,
    GasSchedule,
    InvalidInput,
    aimd_update,
    as_fraction,
    base_fee_next,
    controller_step,
)

T = 30_000_000
SCHED = GasSchedule(T)


@pytest.mark.parametrize(
    "b, gas, d, expected",
    [
        (100 * GWEI, 15_000_000, "0.125", 100 * GWEI),
        (100 * GWEI, 30_000_000, "0.125", 112_500_000_000),
        (100 * GWEI, 0, "0.125", 87_500_000_000),
        # 30 * (1 + 0.0625 * 0.8) = 31.5
        (30 * GWEI, 27_000_000, "0.0625", 31_500_000_000),
    ],
)
def test_base_fee_next_examples(b, gas, d, expected):
    assert base_fee_next(b, gas, SCHED, Fraction(d)) == expected


def test_base_fee_next_floors_to_whole_wei():
    # 7 * 1.125 = 7.875 -> 7, 1001 * 0.875 = 875.875 -> 875
    assert base_fee_next(7, T, SCHED, Fraction(1, 8), floor=0) == 7
    assert base_fee_next(1001, 0, SCHED, Fraction(1, 8), floor=0) == 875


def test_base_fee_floor_applies():
    assert base_fee_next(7, 0, SCHED, Fraction(1, 8)) == 7
    assert base_fee_next(7, 0, SCHED, Fraction(1, 8), floor=0) == 6
    assert base_fee_next(1, 0, SCHED, 1, floor=0) == 0


def test_base_fee_rejects_bad_inputs():
    with pytest.raises(InvalidInput):
        base_fee_next(100, T + 1, SCHED, Fraction(1, 8))
    with pytest.raises(InvalidInput):
        base_fee_next(100, -1, SCHED, Fraction(1, 8))
    with pytest.raises(InvalidInput):
        base_fee_next(100, 0, SCHED, 0)
    with pytest.raises(InvalidInput):
        base_fee_next(100, 0, SCHED, Fraction(3, 2))


def test_base_fee_overflow_is_an_error():
    with pytest.raises(FeeOverflowError):
        base_fee_next(MAX_WEI, T, SCHED, Fraction(1, 8))
    with pytest.raises(FeeOverflowError):
        base_fee_next(MAX_WEI + 1, T // 2, SCHED, Fraction(1, 8))


def test_gas_schedule_validation():
    assert GasSchedule().target == 15_000_000
    with pytest.raises(InvalidInput):
        GasSchedule(29_999_999)
    with pytest.raises(InvalidInput):
        GasSchedule(0)


def test_as_fraction_is_decimal_exact():
    assert as_fraction(0.025) == Fraction(1, 40)
    assert as_fraction("0.95") == Fraction(19, 20)
    assert as_fraction(0.1) == Fraction(1, 10)


@given(
    b=st.integers(7, 10**15),
    gas=st.integers(0, T),
    d=st.fractions(min_value=Fraction(1, 1000), max_value=1),
)
def test_bounded_step(b, gas, d):
    nxt = base_fee_next(b, gas, SCHED, d, floor=0)
    assert b * (1 - d) - 1 < nxt <= b * (1 + d)


@given(b=st.integers(7, 10**15), d=st.fractions(min_value=Fraction(1, 1000), max_value=1))
def test_fixed_point_at_target(b, d):
    assert base_fee_next(b, T // 2, SCHED, d) == b


@given(
    b=st.integers(7, 10**15),
    g1=st.integers(0, T),
    g2=st.integers(0, T),
    d=st.fractions(min_value=Fraction(1, 1000), max_value=1),
)
def test_monotone_in_gas_used(b, g1, g2, d):
    lo, hi = sorted((g1, g2))
    assert base_fee_next(b, lo, SCHED, d) <= base_fee_next(b, hi, SCHED, d)


DEFAULTS = AimdParams()


def test_default_aimd_params():
    assert DEFAULTS == AimdParams("0.025", "0.95", "0.25", "0.0125", 1, 8)


@pytest.mark.parametrize(
    "d, mean, expected",
    [
        ("0.125", "0.5", Fraction("0.11875")),
        ("0.125", "0.10", Fraction("0.15")),
        ("0.99", "0.95", Fraction(1)),
        ("0.0131", "0.5", Fraction("0.0125")),
    ],
)
def test_aimd_examples(d, mean, expected):
    assert aimd_update(Fraction(d), [Fraction(mean)] * 8, DEFAULTS) == expected


def test_aimd_thresholds_take_decrease_branch():
    d = Fraction(1, 8)
    assert aimd_update(d, [Fraction(1, 4)], DEFAULTS) == Fraction(19, 20) * d
    assert aimd_update(d, [Fraction(3, 4)], DEFAULTS) == Fraction(19, 20) * d


def test_aimd_empty_window_is_bootstrap():
    assert aimd_update(Fraction(1, 8), [], DEFAULTS) == Fraction(1, 8)


def test_aimd_param_validation():
    with pytest.raises(InvalidInput):
        AimdParams(alpha=0)
    with pytest.raises(InvalidInput):
        AimdParams(beta="1.1")
    with pytest.raises(InvalidInput):
        AimdParams(gamma="0.6")
    with pytest.raises(InvalidInput):
        AimdParams(d_min="0.5", d_max="0.25")
    with pytest.raises(InvalidInput):
        AimdParams(window_n=0)


@given(st.lists(st.fractions(min_value=0, max_value=1), max_size=200))
def test_aimd_stays_clamped(gs):
    ctrl = AimdController(DEFAULTS, Fraction(1, 8))
    for g in gs:
        ctrl.observe(g)
        assert DEFAULTS.d_min <= ctrl.d <= DEFAULTS.d_max
        assert len(ctrl.window) <= DEFAULTS.window_n


@pytest.mark.parametrize("k", [0, 1, 5, 20, 44, 45, 100])
def test_aimd_geometric_decay(k):
    ctrl = AimdController(DEFAULTS, Fraction(1, 8))
    for _ in range(k):
        ctrl.observe(Fraction(1, 2))
    assert ctrl.d == max(DEFAULTS.d_min, DEFAULTS.beta**k * Fraction(1, 8))


def test_constant_controller_step():
    ctrl = ConstantController(Fraction(1, 8))
    s = controller_step(ctrl, BaseFeeState(100 * GWEI, 5), T, SCHED)
    assert s == BaseFeeState(112_500_000_000, 6)
    assert ctrl.d == Fraction(1, 8)


def test_aimd_bootstrap_step():
    ctrl = AimdController(DEFAULTS, Fraction(1, 8))
    s = controller_step(ctrl, BaseFeeState(100 * GWEI, 0), T, SCHED)
    assert list(ctrl.window) == [1]
    assert ctrl.d == Fraction(15, 100)
    assert s.base_fee == 115 * GWEI and s.block_height == 1


def test_aimd_half_full_is_fixed_point_for_fee():
    ctrl = AimdController(DEFAULTS, Fraction(1, 8), [Fraction(1, 2)] * 8)
    s = controller_step(ctrl, BaseFeeState(100 * GWEI, 0), T // 2, SCHED)
    assert ctrl.d == Fraction(19, 20) * Fraction(1, 8)
    assert s.base_fee == 100 * GWEI


def test_controller_step_is_deterministic():
    def go():
        ctrl = AimdController(DEFAULTS, Fraction(1, 8))
        s = BaseFeeState(30 * GWEI, 0)
        for gas in [0, T, T, 12_345_678, T // 2, 0, 29_000_000] * 5:
            s = controller_step(ctrl, s, gas, SCHED)
        return s, ctrl.d, tuple(ctrl.window)

    assert go() == go()


def test_base_fee_state_validation():
    with pytest.raises(InvalidInput):
        BaseFeeState(6, 0)
    BaseFeeState(0, 0, floor=0)
    with pytest.raises(InvalidInput):
        ConstantController(0)
    with pytest.raises(InvalidInput):
        AimdController(DEFAULTS, Fraction(2))
