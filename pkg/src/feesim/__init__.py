"""Transaction fee market simulation: base fee controllers, greedy block
building, synthetic demand and on-chain data analysis."""

__version__ = "0.1.0"

from .fee_mechanism import (  # noqa: E402
    GWEI,
    ETHER,
    AimdController,
    AimdParams,
    BaseFeeState,
    ConstantController,
    FeeMarketError,
    FeeOverflowError,
    GasSchedule,
    InvalidInput,
    aimd_update,
    base_fee_next,
    controller_step,
)
from .market import Mempool, Transaction, build_block, miner_tip, settle_block  # noqa: E402
from .demand import DemandParams, DemandTrace, draw_transactions  # noqa: E402
from .simulator import ControllerSpec, Scenario, run_experiment, run_scenario  # noqa: E402
from .analytics import Dataset, batch_averages, block_size_metrics, median_filter  # noqa: E402
