"""Dataset ingestion and block-level statistics.

Per-block statistics (gas-weighted average price, EIP-1559 share) are
available both for a single :class:`BlockRecord` and vectorised over a whole
:class:`Dataset`.  Series smoothing uses a truncated-window median filter and
contiguous batch averaging.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

from .fee_mechanism import InvalidInput
from .market import Transaction

BLOCK_COLUMNS = ["height", "base_fee_wei", "gas_used", "gas_limit"]
TX_COLUMNS = ["tx_id", "block_height", "tx_type", "max_fee_wei", "max_priority_fee_wei", "gas_limit"]


class DataError(InvalidInput):
    """Input file is missing or does not follow the expected schema."""


@dataclass(frozen=True)
class BlockRecord:
    height: int
    base_fee: int
    gas_used: int
    gas_limit: int
    txs: tuple = ()

    @property
    def relative_size(self) -> float:
        return self.gas_used / self.gas_limit


@dataclass(frozen=True)
class Series:
    index: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.index, dtype=np.int64)
        vals = np.asarray(self.values, dtype=float)
        if idx.shape != vals.shape or idx.ndim != 1:
            raise InvalidInput("index and values must be 1-d and equal length")
        if idx.size > 1 and (np.diff(idx) <= 0).any():
            raise InvalidInput("series index must be strictly increasing")
        object.__setattr__(self, "index", idx)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_values(cls, values: Sequence[float], start: int = 0) -> "Series":
        return cls(np.arange(start, start + len(values)), values)

    def __len__(self):
        return self.values.size

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"index": self.index, "value": self.values})


def _weighted(block: BlockRecord, attr: str) -> float:
    total = sum(tx.gas_limit for tx in block.txs)
    if total == 0:
        return 0.0
    return float(Fraction(sum(tx.gas_limit * getattr(tx, attr) for tx in block.txs), total))


def block_avg_gas_price(block: BlockRecord) -> float:
    """Gas-limit weighted mean max fee of the block; 0 for an empty block."""
    return _weighted(block, "max_fee")


def eip_fraction(block: BlockRecord) -> float:
    """Gas-limit weighted share of EIP-1559 transactions; 0 for an empty block."""
    return _weighted(block, "tx_type")


def batch_averages(s: Series, batches: int) -> Series:
    """Means of ``batches`` contiguous batches, indexed by each batch's middle.

    The last batch absorbs any remainder when the length does not divide.
    """
    n = len(s)
    if batches < 1:
        raise InvalidInput("batches must be >= 1")
    if batches > n:
        raise InvalidInput(f"cannot split {n} values into {batches} batches")
    w = n // batches
    starts = np.arange(batches) * w
    ends = np.append(starts[1:], n)
    sums = np.add.reduceat(s.values, starts)
    means = sums / (ends - starts)
    mids = starts + (ends - starts - 1) // 2
    return Series(s.index[mids], means)


def median_filter(s: Series, eta: int) -> Series:
    """Median over index distance <= ``eta``, window truncated at the ends.

    Even-sized windows (only at the boundaries) take the lower middle value.
    """
    if eta < 0:
        raise InvalidInput("eta must be >= 0")
    n = len(s)
    if n == 0:
        raise InvalidInput("cannot filter an empty series")
    v = s.values
    if eta == 0:
        return Series(s.index, v.copy())
    out = np.empty(n)
    k = 2 * eta + 1
    if n >= k:
        win = np.lib.stride_tricks.sliding_window_view(v, k)
        out[eta:n - eta] = np.partition(win, eta, axis=1)[:, eta]
    edge = [i for i in range(n) if i < eta or i >= n - eta]
    for i in edge:
        w = np.sort(v[max(0, i - eta):min(n, i + eta + 1)])
        out[i] = w[(w.size - 1) // 2]
    return Series(s.index, out)


def block_size_metrics(g: Sequence[float] | Series) -> tuple[float, float]:
    """(mean relative size, fraction of blocks strictly above 0.95)."""
    vals = np.asarray(g.values if isinstance(g, Series) else g, dtype=float)
    if vals.size == 0:
        raise InvalidInput("no block sizes")
    if ((vals < 0) | (vals > 1)).any():
        raise InvalidInput("relative block sizes must lie in [0, 1]")
    return float(vals.mean()), float((vals > 0.95).mean())


def _read_csv(path, columns, what):
    if not os.path.exists(path):
        raise DataError(f"{what} file not found: {path}")
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError:
        raise DataError(f"{path}: empty file, expected header {','.join(columns)}")
    except pd.errors.ParserError as e:
        raise DataError(f"{path}: {e}")
    missing = [c for c in columns if c not in df.columns]
    if missing:
        raise DataError(f"{path}: missing columns {missing}")
    extra = [c for c in df.columns if c not in columns]
    if extra:
        raise DataError(f"{path}: unexpected columns {extra}")
    out = {}
    for c in columns:
        col = df[c].str.strip()
        bad = ~col.str.fullmatch(r"\d+")
        if bad.any():
            row = int(np.flatnonzero(bad.to_numpy())[0])
            # +2: header line and 1-based numbering
            raise DataError(f"{path}:{row + 2}: column {c!r} is not a non-negative integer: {df[c].iloc[row]!r}")
        # fees in wei can exceed int64; keep them exact as Python ints when needed
        try:
            out[c] = col.astype(np.int64).to_numpy()
        except OverflowError:
            out[c] = np.array([int(x) for x in col], dtype=object)
    return out, len(df)


@dataclass
class Dataset:
    """Blocks and their included transactions, column-oriented."""

    height: np.ndarray
    base_fee: np.ndarray
    gas_used: np.ndarray
    gas_limit: np.ndarray
    tx_id: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    tx_block: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    tx_type: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    tx_max_fee: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    tx_priority_fee: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    tx_gas_limit: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))

    def __post_init__(self):
        h = np.asarray(self.height)
        if h.size == 0:
            raise DataError("dataset has no blocks")
        if (np.diff(h) != 1).any():
            raise DataError("block heights must be contiguous and increasing")
        if (np.asarray(self.gas_limit) <= 0).any():
            raise DataError("block gas_limit must be positive")
        if (np.asarray(self.gas_used) > np.asarray(self.gas_limit)).any():
            raise DataError("block gas_used exceeds gas_limit")
        if self.tx_type.size and not np.isin(self.tx_type, (0, 1)).all():
            raise DataError("tx_type must be 0 or 1")
        if self.tx_block.size:
            pos = self.tx_block - h[0]
            if (pos < 0).any() or (pos >= h.size).any():
                raise DataError("transaction refers to a block outside the blocks file")
        self._pos = (self.tx_block - h[0]).astype(np.int64)

    @classmethod
    def from_csv(cls, blocks_path, txs_path) -> "Dataset":
        b, _ = _read_csv(blocks_path, BLOCK_COLUMNS, "blocks")
        t, _ = _read_csv(txs_path, TX_COLUMNS, "transactions")
        order = np.argsort(b["height"], kind="stable")
        return cls(
            height=b["height"][order], base_fee=b["base_fee_wei"][order],
            gas_used=b["gas_used"][order], gas_limit=b["gas_limit"][order],
            tx_id=t["tx_id"], tx_block=t["block_height"], tx_type=t["tx_type"],
            tx_max_fee=t["max_fee_wei"], tx_priority_fee=t["max_priority_fee_wei"],
            tx_gas_limit=t["gas_limit"],
        )

    @classmethod
    def from_blocks(cls, blocks: Iterable[BlockRecord]) -> "Dataset":
        blocks = list(blocks)
        txs = [(blk.height, tx) for blk in blocks for tx in blk.txs]
        col = lambda f: np.array([f(h, tx) for h, tx in txs], dtype=np.int64)
        return cls(
            height=np.array([blk.height for blk in blocks], dtype=np.int64),
            base_fee=np.array([blk.base_fee for blk in blocks], dtype=np.int64),
            gas_used=np.array([blk.gas_used for blk in blocks], dtype=np.int64),
            gas_limit=np.array([blk.gas_limit for blk in blocks], dtype=np.int64),
            tx_id=col(lambda h, tx: tx.id), tx_block=col(lambda h, tx: h),
            tx_type=col(lambda h, tx: tx.tx_type), tx_max_fee=col(lambda h, tx: tx.max_fee),
            tx_priority_fee=col(lambda h, tx: tx.max_priority_fee),
            tx_gas_limit=col(lambda h, tx: tx.gas_limit),
        )

    def __len__(self):
        return self.height.size

    @property
    def first_height(self) -> int:
        return int(self.height[0])

    @property
    def last_height(self) -> int:
        return int(self.height[-1])

    def window(self, from_height: int | None = None, to_height: int | None = None) -> "Dataset":
        lo = self.first_height if from_height is None else from_height
        hi = self.last_height if to_height is None else to_height
        if lo > hi or lo < self.first_height or hi > self.last_height:
            raise DataError(
                f"block range [{lo}, {hi}] not covered by dataset "
                f"[{self.first_height}, {self.last_height}]")
        bsel = slice(lo - self.first_height, hi - self.first_height + 1)
        tsel = (self.tx_block >= lo) & (self.tx_block <= hi)
        return Dataset(
            self.height[bsel], self.base_fee[bsel], self.gas_used[bsel], self.gas_limit[bsel],
            self.tx_id[tsel], self.tx_block[tsel], self.tx_type[tsel], self.tx_max_fee[tsel],
            self.tx_priority_fee[tsel], self.tx_gas_limit[tsel],
        )

    def block(self, height: int) -> BlockRecord:
        i = height - self.first_height
        sel = np.flatnonzero(self._pos == i)
        txs = tuple(
            Transaction(int(self.tx_id[j]), int(self.tx_type[j]), int(self.tx_max_fee[j]),
                        int(self.tx_priority_fee[j]), int(self.tx_gas_limit[j]), height)
            for j in sel
        )
        return BlockRecord(height, int(self.base_fee[i]), int(self.gas_used[i]),
                           int(self.gas_limit[i]), txs)

    def blocks(self) -> list[BlockRecord]:
        return [self.block(int(h)) for h in self.height]

    def _weighted_mean(self, values) -> Series:
        w = self.tx_gas_limit.astype(float)
        num = np.bincount(self._pos, weights=w * np.asarray(values, dtype=float), minlength=len(self))
        den = np.bincount(self._pos, weights=w, minlength=len(self))
        out = np.divide(num, den, out=np.zeros(len(self)), where=den > 0)
        return Series(self.height, out)

    def avg_gas_prices(self) -> Series:
        return self._weighted_mean(self.tx_max_fee)

    def eip_fractions(self) -> Series:
        return self._weighted_mean(self.tx_type)

    def relative_sizes(self) -> Series:
        return Series(self.height, self.gas_used.astype(float) / self.gas_limit.astype(float))

    def base_fees(self) -> Series:
        return Series(self.height, self.base_fee.astype(float))
